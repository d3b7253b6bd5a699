#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svlab/mesh.hpp"
#include "svlab/spline.hpp"

namespace svlab::profiles {

enum class Kind { spike, vortex, coupled_u, coupled_f };
const char* to_string(Kind k);

struct RadialProfile {
  grid::RadialMesh mesh;
  std::vector<double> values;
  Kind kind = Kind::spike;
  int degree = 0;
  std::optional<double> decay_coeff;
  /// max-norm residual of the discrete equation the profile was solved from
  double residual = 0.0;
  int iterations = 0;

  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }
  /// Cubic interpolant with the parity implied by kind/degree.
  grid::Spline spline() const;
};

/// Node-wise checks of the per-kind invariants (positivity, monotonicity, ends).
bool satisfies_invariants(const RadialProfile& p, std::string* why = nullptr);

struct SpikeOptions {
  grid::MeshSpec mesh{40.0, 0.003, 1.05, 4.0, 0.02};
  double a_lo = 1.5;   ///< shooting bracket on w(0)
  double a_hi = 3.0;
  double r_shoot = 25.0;
  double tol = 1e-10;  ///< Newton max-norm residual target
  double fit_lo = 8.0;
  double fit_hi = 15.0;
};

/// Shooting + bisection on w(0): returns the separatrix height.
/// Throws no-bracket when [a_lo, a_hi] does not separate the two behaviours.
double shoot_spike(double a_lo, double a_hi, double r_shoot = 25.0);

/// Ground state of w'' + w'/r − w + w³ = 0, w'(0) = 0, w(r_max) = 0.
RadialProfile solve_spike(const SpikeOptions& opt = {});

struct VortexOptions {
  grid::MeshSpec mesh{40.0, 0.01, 1.05, 4.0, 0.05};
  /// Dirichlet data at r_max; unset means the far-field expansion 1 − d²/(2R²).
  std::optional<double> outer_value;
  double tol = 1e-10;
  int max_iter = 60;
};

/// S'' + S'/r − d²S/r² + S − S³ = 0, S(0) = 0 (damped Newton from tanh(r/d)).
RadialProfile solve_vortex(int d, const VortexOptions& opt = {});
/// Same on an explicit mesh.
RadialProfile solve_vortex_on(int d, const grid::RadialMesh& mesh, const VortexOptions& opt = {});

struct DecayFit {
  double A0;
  double rate;
};

/// Least squares of log(f·√r) against r over the nodes in [r_lo, r_hi].
DecayFit fit_decay(const RadialProfile& p, double r_lo, double r_hi);

/// One-line JSON header followed by "r,value" rows.
std::string to_csv(const RadialProfile& p);

}  // namespace svlab::profiles
