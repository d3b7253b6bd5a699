#pragma once

#include <vector>

#include "svlab/field.hpp"
#include "svlab/planar.hpp"

namespace svlab::reduction {

struct BalanceRoot {
  double lhat = 0.0;
  double beta = 0.0;
  int k = 2;
  double residual = 0.0;  ///< |lhat^{5/2} e^{−2 lhat sin(π/k)} − β|
};

/// Large-l root of l^{5/2} e^{−2l sin(π/k)} = β by bisection and a Newton polish.
/// Throws no-root when β exceeds the maximum of the map.
BalanceRoot solve_lhat(double beta, int k);

struct ExpansionFit {
  int k = 2;
  double leading = 0.0;  ///< coefficient of log(1/β)
  double target = 0.0;   ///< 1/(2 sin(π/k))
  double rel_error = 0.0;
  double c_k = 0.0;      ///< coefficient of log log(1/β)
  double intercept = 0.0;
  std::vector<double> betas, lhats, residuals;
  /// |lhat − x − (5/(4 sin(π/k))) log x| / log log(1/β) with x = log(1/β)/(2 sin(π/k))
  std::vector<double> remainder;
};

/// Least squares of lhat(β) on [log(1/β), log log(1/β), 1]. Needs four points and
/// four decades below 1e-3 (insufficient-data otherwise).
ExpansionFit check_expansion(const std::vector<double>& beta_grid, int k);

struct ProjectedSolution {
  grid::SectorField phi;
  double c = 0.0;
  double orthogonality = 0.0;  ///< ∫φ ∂u_l/∂l
};

/// L̃₁φ = f + c ∂u_l/∂l with ∫φ ∂u_l/∂l = 0, L̃₁ = Δ − 1 + 3u_l² + βS_d², solved
/// as one bordered system in the reflection-reduced unknowns.
ProjectedSolution projected_solve(const grid::SectorField& f, const planar::PolygonAnsatz& a, double beta = 0.0);

struct ForceOptions {
  planar::AnsatzOptions mesh;
  bool with_correction = false;
  int max_sweeps = 5;
};

struct ReducedForce {
  double l = 0.0, I1 = 0.0, I2 = 0.0, c_of_l = 0.0, denom = 0.0;
  double beta = 0.0;
  int k = 2, d = 1;
  int sweeps = 0;
};

/// I₁ = ∫[Δû − û + û³]∂u_l/∂l, I₂ = β∫û|v̂|²∂u_l/∂l and c = (I₁ + I₂)/∫(∂u_l/∂l)².
ReducedForce reduced_force(double l, double beta, int k, int d, const ForceOptions& opt = {});
ReducedForce reduced_force_on(const planar::PolygonAnsatz& a, double beta, const ForceOptions& opt = {});

struct I2Split {
  double direct = 0.0;
  double decomposed = 0.0;  ///< β∫u_l ∂u_l/∂l − β∫u_l (d²/r²) ∂u_l/∂l
};
I2Split i2_two_ways(const planar::PolygonAnsatz& a, double beta);

struct RootOptions {
  double gamma = 2.0;
  ForceOptions force;
  double rel_tol = 1e-10;
};

struct RootResult {
  double l_beta = 0.0;
  double lhat = 0.0;
  double gamma = 0.0;  ///< bracket half-width actually used
  ReducedForce lo, hi, at_root;
  /// true when c(lhat − γ) > 0 > c(lhat + γ)
  bool decreasing = false;
  int bisections = 0;
};

/// Bracket (lhat − γ, lhat + γ), widen γ once on a missing sign change, then bisect.
RootResult find_root(double beta, int k, int d, const RootOptions& opt = {});

struct PowerFit {
  double slope = 0.0;  ///< d log|I| / dl
  double power = 0.0;
};

/// Exponential rate of |I₁| in l, then the power of l left once e^{−2l sin(π/k)} is removed.
PowerFit fit_I1(const std::vector<double>& ls, const std::vector<double>& I1, int k);
/// Power of l in I₂.
double fit_I2_power(const std::vector<double>& ls, const std::vector<double>& I2);

}  // namespace svlab::reduction
