#pragma once

#include <string>

#include "svlab/coupled.hpp"
#include "svlab/planar.hpp"

namespace svlab::charge {

enum class Method { radial_analytic, quadrature_2d };
const char* to_string(Method m);

struct ChargeReport {
  double Q = 0.0;
  int d = 0;
  Method method = Method::radial_analytic;
  /// radial: the truncation deficit (d/2) sin φ(R_max); 2D: Richardson estimate
  double quadrature_error = 0.0;
  double deficit = 0.0;  ///< (d/2) sin φ(R_max)
  double r_max = 0.0;
};

/// (v1, v2, u)/√(u² + v1² + v2²) per node.
struct NMap {
  grid::SectorField n1, n2, n3;
};
struct RadialNMap {
  std::vector<double> sin_phi, cos_phi;  ///< n = (cos φ cos dθ, cos φ sin dθ, sin φ)
  int d = 0;
};

/// Throws degenerate-point (with the node position) where u = v = 0.
NMap build_nmap(const planar::PlanarField& f);
RadialNMap build_nmap(const radial::CoupledState& s);

ChargeReport charge_radial(const radial::CoupledState& s);
ChargeReport charge_2d(const planar::PlanarField& f);

/// n·(∂ₓn ∧ ∂ᵧn) per node (zero at the origin node).
grid::SectorField charge_density(const planar::PlanarField& f);

/// Radial state on a truncated ball [0, R] (R must be a node).
radial::CoupledState truncate(const radial::CoupledState& s, double R);
/// u(r), f(r)e^{idθ} sampled on a sector mesh sharing the radial nodes of s.
planar::PlanarField planar_from_radial(const radial::CoupledState& s, int m_theta, int k = 2);

}  // namespace svlab::charge
