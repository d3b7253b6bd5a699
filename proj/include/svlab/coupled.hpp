#pragma once

#include <optional>
#include <vector>

#include "svlab/profiles.hpp"

namespace svlab::radial {

using profiles::RadialProfile;

struct CoupledState {
  RadialProfile u;  ///< kind coupled_u
  RadialProfile f;  ///< kind coupled_f, degree d
  double beta = 0.0;
  double ball_radius = 0.0;
  double energy = 0.0;
  double residual = 0.0;  ///< max-norm residual of both Euler–Lagrange equations
  int iterations = 0;
  const char* route = "";
};

struct NehariDiagnostics {
  double constraint_value = 0.0;  ///< G_R[u, S]
  double t_R = 1.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> energy_history;  ///< energy after each accepted step
};

/// Ball mesh for B_R; uniform spacing so that nodes of different balls coincide.
grid::RadialMesh ball_mesh(double R, double h = 0.05);

/// Five-term energy of (u, S) on B_R with the finite-volume quadrature whose
/// gradient is exactly the discrete Euler–Lagrange system. Integrals carry 2π.
double energy_ER(const RadialProfile& u, const RadialProfile& S, double beta, double R);
/// GL_{B_R}[S]: gradient, d²/r² and quartic-well terms only.
double gl_energy(const RadialProfile& S);
/// ∫(|∇u|² + u² − βS²u² − u⁴).
double nehari_constraint(const RadialProfile& u, const RadialProfile& S, double beta);
/// ∫(|∇u|² + u²) on the ball.
double h1_mass(const RadialProfile& u);
/// t_R = ∫(|∇u|² + u² − βS²u²)/∫u⁴; (√t_R u, S) lies on the Nehari manifold.
double nehari_project(const RadialProfile& u, const RadialProfile& S, double beta);
/// Max-norm residuals of the two equations (u first, then f).
std::pair<double, double> el_residuals(const RadialProfile& u, const RadialProfile& f, double beta,
                                       double outer_f = 1.0);

struct MinimizeOptions {
  double h = 0.05;
  double grad_tol = 1e-8;
  double el_tol = 1e-6;
  int max_iter = 200000;
  double step0 = 0.5;
  double armijo_c = 1e-4;
};

/// Nehari-constrained descent on B_R: H¹-preconditioned gradient steps,
/// Armijo backtracking from `step0`, re-projection onto the manifold.
std::pair<CoupledState, NehariDiagnostics> minimize_ball(double beta, int d, double R,
                                                          const MinimizeOptions& opt = {});

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 40;
  /// f at the outer radius; the ball problem prescribes 1.
  double outer_f = 1.0;
};

/// Damped Newton on the coupled two-point problem, on the mesh of `init`.
CoupledState newton_radial(double beta, int d, double R, const CoupledState& init,
                           const NewtonOptions& opt = {});

/// Initial pair (w, S̄_R) on the ball mesh.
CoupledState decoupled_guess(int d, double R, double h = 0.05);

struct ContinuationStage {
  double beta;
  int newton_steps;
};

/// Newton continuation in β from the decoupled guess, fixed step.
std::pair<CoupledState, std::vector<ContinuationStage>> continue_in_beta(double beta_target, int d,
                                                                          double R, double dbeta = 0.1,
                                                                          double h = 0.05);

struct RadiusRun {
  std::vector<CoupledState> states;
  /// max |u_R − u_{R'}| + |f_R − f_{R'}| on [0, radii[0]] for consecutive pairs
  std::vector<double> cauchy;
};

/// Solve on each ball in turn, warm-starting from the previous radius.
RadiusRun continue_in_R(double beta, int d, const std::vector<double>& radii, double h = 0.05);

}  // namespace svlab::radial
