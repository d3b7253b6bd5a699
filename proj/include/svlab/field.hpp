#pragma once

#include <memory>
#include <vector>

#include "svlab/mesh.hpp"

namespace svlab::grid {

/// A real scalar sampled on every node of a sector mesh (flat layout).
struct SectorField {
  std::shared_ptr<const SectorMesh> mesh;
  std::vector<double> v;

  SectorField() = default;
  explicit SectorField(std::shared_ptr<const SectorMesh> m, double fill = 0.0)
      : mesh(std::move(m)), v(mesh->size(), fill) {}
  std::size_t size() const { return v.size(); }
  double& operator[](std::size_t n) { return v[n]; }
  double operator[](std::size_t n) const { return v[n]; }
};

/// Fill a field from f(r, θ).
template <class F>
SectorField sample(std::shared_ptr<const SectorMesh> m, F&& f) {
  SectorField s(m);
  const auto& M = *m;
  s.v[0] = f(0.0, 0.0);
  for (std::size_t i = 1; i < M.rings(); ++i)
    for (int j = 0; j < M.m_theta(); ++j) s.v[M.index(i, j)] = f(M.radial().r(i), M.theta(j));
  return s;
}

struct WeightedNorms {
  double alpha = 0.25;
  explicit WeightedNorms(double a = 0.25);
};

/// |∇f| per node from centered differences in (r, θ); θ is periodic over the
/// sector and the origin gets the k-fold symmetric value 0.
std::vector<double> gradient_magnitude(const SectorField& f);

/// sup_z [ |ψ1| + (1+|z|)|∇ψ1| + (1+|z|)^{1+α}(|ψ2| + |∇ψ2|) ] over nodes with r ≥ r_min.
double norm_star(const SectorField& psi1, const SectorField& psi2, const WeightedNorms& w,
                 double r_min = 0.0);
/// sup_z (1+|z|)^{2+α}(|h1| + |h2|) over nodes.
double norm_dstar(const SectorField& h1, const SectorField& h2, const WeightedNorms& w);
/// ∫_{disk} f, k × sector integral.
double quad_disk(const SectorField& f);

}  // namespace svlab::grid
