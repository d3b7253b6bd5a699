#include "svlab/field.hpp"

#include <algorithm>
#include <cmath>

#include "svlab/errors.hpp"
#include "svlab/kernels.hpp"

namespace svlab::grid {

WeightedNorms::WeightedNorms(double a) : alpha(a) {
  if (!(a > 0.0 && a < 0.5)) throw Error(ErrorKind::config, "alpha must lie in (0, 1/2)");
}

namespace {

void same_mesh(const SectorField& a, const SectorField& b) {
  if (!a.mesh || !b.mesh) throw Error(ErrorKind::mesh_mismatch, "field without mesh");
  if (a.mesh != b.mesh && !a.mesh->same_as(*b.mesh))
    throw Error(ErrorKind::mesh_mismatch, "fields live on different meshes");
  if (a.v.size() != a.mesh->size() || b.v.size() != b.mesh->size())
    throw Error(ErrorKind::mesh_mismatch, "field length differs from mesh");
}

}  // namespace

std::vector<double> gradient_magnitude(const SectorField& f) {
  const auto& m = *f.mesh;
  const auto& rm = m.radial();
  const int M = m.m_theta();
  const std::size_t N = m.rings() - 1;
  std::vector<double> g(m.size(), 0.0);
  auto val = [&](std::size_t i, int j) { return f.v[m.index(i, j)]; };
  for (std::size_t i = 1; i <= N; ++i) {
    const double r = rm.r(i);
    for (int j = 0; j < M; ++j) {
      double dr;
      if (i < N) {
        const double a = rm.r(i - 1), c = rm.r(i + 1);
        const double fa = val(i - 1, j), fb = val(i, j), fc = val(i + 1, j);
        dr = fa * (r - c) / ((a - r) * (a - c)) + fb * ((r - a) + (r - c)) / ((r - a) * (r - c)) +
             fc * (r - a) / ((c - a) * (c - r));
      } else {
        const double a = rm.r(i - 2), b = rm.r(i - 1);
        const double fa = val(i - 2, j), fb = val(i - 1, j), fc = val(i, j);
        dr = fa * (r - b) / ((a - b) * (a - r)) + fb * (r - a) / ((b - a) * (b - r)) +
             fc * ((r - a) + (r - b)) / ((r - a) * (r - b));
      }
      const int jp = (j + 1) % M, jm = (j + M - 1) % M;
      const double dth = (val(i, jp) - val(i, jm)) / (2.0 * m.dtheta() * r);
      g[m.index(i, j)] = std::hypot(dr, dth);
    }
  }
  return g;
}

double norm_star(const SectorField& psi1, const SectorField& psi2, const WeightedNorms& w,
                 double r_min) {
  same_mesh(psi1, psi2);
  const auto g1 = gradient_magnitude(psi1);
  const auto g2 = gradient_magnitude(psi2);
  const auto& r = psi1.mesh->node_r();
  double s = 0.0;
  for (std::size_t n = 0; n < r.size(); ++n) {
    if (r[n] < r_min) continue;
    const double t = std::abs(psi1.v[n]) + (1.0 + r[n]) * g1[n] +
                     std::pow(1.0 + r[n], 1.0 + w.alpha) * (std::abs(psi2.v[n]) + g2[n]);
    s = std::max(s, t);
  }
  return s;
}

double norm_dstar(const SectorField& h1, const SectorField& h2, const WeightedNorms& w) {
  same_mesh(h1, h2);
  const auto& r = h1.mesh->node_r();
  std::vector<double> wt(r.size());
  for (std::size_t n = 0; n < r.size(); ++n) wt[n] = std::pow(1.0 + r[n], 2.0 + w.alpha);
  return kernels::weighted_sup(wt.data(), h1.v.data(), h2.v.data(), r.size());
}

double quad_disk(const SectorField& f) {
  if (!f.mesh || f.v.size() != f.mesh->size()) throw Error(ErrorKind::mesh_mismatch, "bad field");
  for (double x : f.v)
    if (!std::isfinite(x)) throw Error(ErrorKind::nan_input, "non-finite sample in quadrature");
  return kernels::dot(f.mesh->quad_weights().data(), f.v.data(), f.v.size());
}

}  // namespace svlab::grid
