#pragma once

#include <vector>

#include "svlab/mesh.hpp"

namespace svlab::grid {

/// Row-wise tridiagonal operator on the nodes of a radial mesh.
struct Tridiag {
  std::vector<double> lo, di, up;
  std::size_t size() const { return di.size(); }
  std::vector<double> apply(const std::vector<double>& x) const;
};

/// Finite-volume f'' + f'/r − (d²/r²) f. Row 0 is the regularized limit 2f''(0)
/// when d = 0 and an empty row when d ≥ 1 (f(0) = 0 is a Dirichlet node); the
/// last row is empty (Dirichlet at r_max).
Tridiag laplacian_matrix(const RadialMesh& mesh, int d);

/// Apply the operator above; throws invalid-mesh below three nodes.
std::vector<double> radial_laplacian(const RadialMesh& mesh, const std::vector<double>& f, int d);

/// Second-order nodal derivative (three-point, one-sided at the ends).
std::vector<double> derivative(const RadialMesh& mesh, const std::vector<double>& f);

/// Quadrature weights for ∫_0^{r_max} f(r)·r dr, exact for piecewise quadratic f
/// on consecutive cell pairs.
std::vector<double> weights_rdr(const RadialMesh& mesh);
/// Same construction for ∫_0^{r_max} f(r) dr.
std::vector<double> weights_dr(const RadialMesh& mesh);

}  // namespace svlab::grid
