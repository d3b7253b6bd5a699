#include "svlab/coupled.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <limits>
#include <numbers>

#include "svlab/errors.hpp"
#include "svlab/kernels.hpp"
#include "svlab/linalg.hpp"
#include "svlab/radial_ops.hpp"

namespace svlab::radial {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void same_mesh(const RadialProfile& a, const RadialProfile& b) {
  if (!a.mesh.same_as(b.mesh) || a.size() != a.mesh.size() || b.size() != b.mesh.size())
    throw Error(ErrorKind::mesh_mismatch, "u and S must share one radial mesh");
}

// Σ_c m_c (x_{c+1} − x_c)² / h_c, the finite-volume ∫|x'|² r dr.
double grad_sq(const grid::RadialMesh& m, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t c = 0; c + 1 < m.size(); ++c) {
    const double dx = x[c + 1] - x[c];
    s += m.mid(c) * dx * dx / m.h(c);
  }
  return s;
}

double centrifugal(const grid::RadialMesh& m, const std::vector<double>& S, int d) {
  const auto& W = m.dual_weights();
  double s = 0.0;
  for (std::size_t i = 1; i < m.size(); ++i) s += W[i] * S[i] * S[i] / (m.r(i) * m.r(i));
  return static_cast<double>(d) * d * s;
}

struct Sums {
  double grad_u, mass_u, grad_S, centr, well, coupling, quartic;
};

Sums sums(const RadialProfile& u, const RadialProfile& S) {
  const auto& m = u.mesh;
  const auto& W = m.dual_weights();
  const std::size_t n = m.size();
  std::vector<double> u2(n), S2(n), well(n);
  for (std::size_t i = 0; i < n; ++i) {
    u2[i] = u.values[i] * u.values[i];
    S2[i] = S.values[i] * S.values[i];
    well[i] = (1.0 - S2[i]) * (1.0 - S2[i]);
  }
  Sums s{};
  s.grad_u = grad_sq(m, u.values);
  s.mass_u = kernels::dot(W.data(), u2.data(), n);
  s.grad_S = grad_sq(m, S.values);
  s.centr = centrifugal(m, S.values, S.degree);
  s.well = kernels::dot(W.data(), well.data(), n);
  s.coupling = kernels::dot3(W.data(), S2.data(), u2.data(), n);
  s.quartic = kernels::dot3(W.data(), u2.data(), u2.data(), n);
  return s;
}

double energy_of(const Sums& s, double beta) {
  return kTwoPi * (0.5 * (s.grad_u + s.mass_u) + 0.5 * (s.grad_S + s.centr) + 0.25 * s.well -
                   0.5 * beta * s.coupling - 0.25 * s.quartic);
}

// E[tu, ts] − E[u, S] from node-wise differences, so that steps far below the
// rounding of E itself keep their sign.
double energy_delta(const RadialProfile& u, const RadialProfile& S, const RadialProfile& tu,
                    const RadialProfile& ts, double beta) {
  const auto& m = u.mesh;
  const auto& W = m.dual_weights();
  const std::size_t n = m.size();
  const double d2 = static_cast<double>(S.degree) * S.degree;
  const auto& x = u.values;
  const auto& y = S.values;
  const auto& X = tu.values;
  const auto& Y = ts.values;
  double grad = 0.0, pot = 0.0;
  for (std::size_t c = 0; c + 1 < n; ++c) {
    const double a = x[c + 1] - x[c], A = X[c + 1] - X[c];
    const double b = y[c + 1] - y[c], B = Y[c + 1] - Y[c];
    grad += m.mid(c) / m.h(c) * ((A - a) * (A + a) + (B - b) * (B + b));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double du = X[i] - x[i], dS = Y[i] - y[i];
    const double su = X[i] + x[i], sS = Y[i] + y[i];
    const double du2 = du * su, dS2 = dS * sS;
    const double well = -dS2 * (2.0 - Y[i] * Y[i] - y[i] * y[i]);
    const double dp = Y[i] * du + x[i] * dS, sp = Y[i] * X[i] + y[i] * x[i];
    const double quart = du2 * (X[i] * X[i] + x[i] * x[i]);
    double t = 0.5 * du2 + 0.25 * well - 0.5 * beta * dp * sp - 0.25 * quart;
    if (i > 0) t += 0.5 * d2 * dS2 / (m.r(i) * m.r(i));
    pot += W[i] * t;
  }
  return kTwoPi * (0.5 * grad + pot);
}

RadialProfile like(const RadialProfile& p, std::vector<double> v) {
  RadialProfile q = p;
  q.values = std::move(v);
  return q;
}

}  // namespace

grid::RadialMesh ball_mesh(double R, double h) { return grid::RadialMesh::uniform(R, h); }

double energy_ER(const RadialProfile& u, const RadialProfile& S, double beta, double R) {
  same_mesh(u, S);
  if (std::abs(u.mesh.r_max() - R) > 1e-9 * R)
    throw Error(ErrorKind::mesh_mismatch, "mesh does not end at the ball radius");
  if (std::abs(S.values.front()) > 1e-6 || std::abs(S.values.back() - 1.0) > 1e-6 ||
      std::abs(u.values.back()) > 1e-6)
    throw Error(ErrorKind::boundary_violation, "need S(0) = 0, S(R) = 1, u(R) = 0");
  return energy_of(sums(u, S), beta);
}

double gl_energy(const RadialProfile& S) {
  const auto& m = S.mesh;
  const auto& W = m.dual_weights();
  double well = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double a = 1.0 - S.values[i] * S.values[i];
    well += W[i] * a * a;
  }
  return kTwoPi * (0.5 * (grad_sq(m, S.values) + centrifugal(m, S.values, S.degree)) + 0.25 * well);
}

double nehari_constraint(const RadialProfile& u, const RadialProfile& S, double beta) {
  same_mesh(u, S);
  const Sums s = sums(u, S);
  return kTwoPi * (s.grad_u + s.mass_u - beta * s.coupling - s.quartic);
}

double h1_mass(const RadialProfile& u) {
  const auto& W = u.mesh.dual_weights();
  return kTwoPi * (grad_sq(u.mesh, u.values) + kernels::dot3(W.data(), u.values.data(), u.values.data(), u.size()));
}

double nehari_project(const RadialProfile& u, const RadialProfile& S, double beta) {
  same_mesh(u, S);
  const Sums s = sums(u, S);
  if (!(s.quartic > 0.0)) throw Error(ErrorKind::zero_denominator, "∫u⁴ vanishes");
  return (s.grad_u + s.mass_u - beta * s.coupling) / s.quartic;
}

std::pair<double, double> el_residuals(const RadialProfile& u, const RadialProfile& f, double beta,
                                       double outer_f) {
  same_mesh(u, f);
  const std::size_t n = u.size();
  const auto Lu = grid::radial_laplacian(u.mesh, u.values, 0);
  const auto Lf = grid::radial_laplacian(f.mesh, f.values, f.degree);
  double ru = std::abs(u.values[n - 1]), rf = std::max(std::abs(f.values[0]), std::abs(f.values[n - 1] - outer_f));
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double x = u.values[i], y = f.values[i];
    ru = std::max(ru, std::abs(Lu[i] - x + x * x * x + beta * y * y * x));
    if (i > 0) rf = std::max(rf, std::abs(Lf[i] + y - y * y * y + beta * x * x * y));
  }
  return {ru, rf};
}

CoupledState decoupled_guess(int d, double R, double h) {
  profiles::SpikeOptions so;
  so.mesh = {R, h, 1.0, R, std::numeric_limits<double>::infinity()};
  if (R < 16.0) so.fit_lo = so.fit_hi = 0.0;
  RadialProfile w;
  try {
    w = profiles::solve_spike(so);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::insufficient_window) throw;
    so.fit_lo = 0.5 * R;
    so.fit_hi = 0.75 * R;
    w = profiles::solve_spike(so);
  }
  profiles::VortexOptions vo;
  vo.outer_value = 1.0;
  RadialProfile S = profiles::solve_vortex_on(d, w.mesh, vo);
  CoupledState st;
  st.u = w;
  st.u.kind = profiles::Kind::coupled_u;
  st.f = S;
  st.f.kind = profiles::Kind::coupled_f;
  st.beta = 0.0;
  st.ball_radius = R;
  st.energy = energy_ER(st.u, st.f, 0.0, R);
  st.route = "decoupled";
  return st;
}

CoupledState newton_radial(double beta, int d, double R, const CoupledState& init,
                           const NewtonOptions& opt) {
  const auto& mesh = init.u.mesh;
  if (std::abs(mesh.r_max() - R) > 1e-9 * R) throw Error(ErrorKind::mesh_mismatch, "init lives on another ball");
  if (init.f.degree != d) throw Error(ErrorKind::config, "init has a different degree");
  const std::size_t n = mesh.size();
  const grid::Tridiag L0 = grid::laplacian_matrix(mesh, 0);
  const grid::Tridiag Ld = grid::laplacian_matrix(mesh, d);
  std::vector<double> u = init.u.values, f = init.f.values;
  u[n - 1] = 0.0;
  f[0] = 0.0;
  f[n - 1] = opt.outer_f;

  auto residual = [&](const std::vector<double>& x, const std::vector<double>& y) {
    Eigen::VectorXd F(2 * n);
    const auto Lx = L0.apply(x);
    const auto Ly = Ld.apply(y);
    for (std::size_t i = 0; i + 1 < n; ++i) F[i] = Lx[i] - x[i] + x[i] * x[i] * x[i] + beta * y[i] * y[i] * x[i];
    F[n - 1] = x[n - 1];
    F[n] = y[0];
    for (std::size_t i = 1; i + 1 < n; ++i)
      F[n + i] = Ly[i] + y[i] - y[i] * y[i] * y[i] + beta * x[i] * x[i] * y[i];
    F[2 * n - 1] = y[n - 1] - opt.outer_f;
    return F;
  };
  Eigen::VectorXd F = residual(u, f);
  double res = F.cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < opt.max_iter && res > opt.tol; ++it) {
    Triplets t;
    t.reserve(10 * n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (i > 0) t.emplace_back(i, i - 1, L0.lo[i]);
      t.emplace_back(i, i, L0.di[i] - 1.0 + 3.0 * u[i] * u[i] + beta * f[i] * f[i]);
      t.emplace_back(i, i + 1, L0.up[i]);
      if (i > 0) t.emplace_back(i, n + i, 2.0 * beta * f[i] * u[i]);
    }
    t.emplace_back(n - 1, n - 1, 1.0);
    t.emplace_back(n, n, 1.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      t.emplace_back(n + i, n + i - 1, Ld.lo[i]);
      t.emplace_back(n + i, n + i, Ld.di[i] + 1.0 - 3.0 * f[i] * f[i] + beta * u[i] * u[i]);
      t.emplace_back(n + i, n + i + 1, Ld.up[i]);
      t.emplace_back(n + i, i, 2.0 * beta * u[i] * f[i]);
    }
    t.emplace_back(2 * n - 1, 2 * n - 1, 1.0);
    SpMat J(2 * n, 2 * n);
    J.setFromTriplets(t.begin(), t.end());
    const Eigen::VectorXd dx = direct_solve(J, -F);
    double lam = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
      std::vector<double> tu(u), tf(f);
      // Dirichlet nodes stay exact
      for (std::size_t i = 0; i + 1 < n; ++i) tu[i] += lam * dx[i];
      for (std::size_t i = 1; i + 1 < n; ++i) tf[i] += lam * dx[n + i];
      Eigen::VectorXd Ft = residual(tu, tf);
      const double rt = Ft.cwiseAbs().maxCoeff();
      if (rt < res) {
        u.swap(tu);
        f.swap(tf);
        F = std::move(Ft);
        res = rt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (res > opt.tol) throw Error(ErrorKind::nonconvergence, "radial Newton stopped at residual " + std::to_string(res));
  CoupledState st;
  st.u = like(init.u, std::move(u));
  st.f = like(init.f, std::move(f));
  st.u.kind = profiles::Kind::coupled_u;
  st.f.kind = profiles::Kind::coupled_f;
  st.u.residual = st.f.residual = res;
  st.beta = beta;
  st.ball_radius = R;
  st.residual = res;
  st.iterations = it;
  st.route = "newton";
  st.energy = opt.outer_f == 1.0 ? energy_ER(st.u, st.f, beta, R) : energy_of(sums(st.u, st.f), beta);
  return st;
}

std::pair<CoupledState, std::vector<ContinuationStage>> continue_in_beta(double beta_target, int d,
                                                                          double R, double dbeta,
                                                                          double h) {
  CoupledState st = decoupled_guess(d, R, h);
  std::vector<ContinuationStage> stages;
  st = newton_radial(0.0, d, R, st);
  stages.push_back({0.0, st.iterations});
  const int n = static_cast<int>(std::ceil(std::abs(beta_target) / dbeta - 1e-9));
  for (int s = 1; s <= n; ++s) {
    const double b = s == n ? beta_target : std::copysign(s * dbeta, beta_target);
    st = newton_radial(b, d, R, st);
    stages.push_back({b, st.iterations});
  }
  return {st, stages};
}

std::pair<CoupledState, NehariDiagnostics> minimize_ball(double beta, int d, double R,
                                                          const MinimizeOptions& opt) {
  if (!(beta < 0.0)) throw Error(ErrorKind::config, "minimize_ball needs beta < 0");
  CoupledState init = decoupled_guess(d, R, opt.h);
  const auto& mesh = init.u.mesh;
  const auto& W = mesh.dual_weights();
  const std::size_t n = mesh.size();

  // H¹ preconditioners: u on nodes 0..n−2, S on nodes 1..n−2
  const grid::Tridiag L0 = grid::laplacian_matrix(mesh, 0);
  const grid::Tridiag Ld = grid::laplacian_matrix(mesh, d);
  auto h1 = [&](const grid::Tridiag& L, std::size_t first, std::size_t last) {
    const std::size_t m = last - first + 1;
    Triplets t;
    for (std::size_t i = first; i <= last; ++i) {
      const std::size_t a = i - first;
      t.emplace_back(a, a, kTwoPi * W[i] * (1.0 - L.di[i]));
      if (i > first) t.emplace_back(a, a - 1, -kTwoPi * W[i] * L.lo[i]);
      if (i < last) t.emplace_back(a, a + 1, -kTwoPi * W[i] * L.up[i]);
    }
    SpMat K(m, m);
    K.setFromTriplets(t.begin(), t.end());
    return K;
  };
  Eigen::SimplicialLDLT<SpMat> Ku(h1(L0, 0, n - 2)), Ks(h1(Ld, 1, n - 2));
  if (Ku.info() != Eigen::Success || Ks.info() != Eigen::Success)
    throw Error(ErrorKind::singular_jacobian, "H1 preconditioner factorization failed");

  RadialProfile u = init.u, S = init.f;
  auto project = [&](RadialProfile& uu) {
    const double t = nehari_project(uu, S, beta);
    if (!(t > 0.0)) throw Error(ErrorKind::stall, "left the region where the Nehari ray meets the manifold");
    const double s = std::sqrt(t);
    for (double& x : uu.values) x *= s;
    return t;
  };
  NehariDiagnostics diag;
  diag.t_R = project(u);
  double E = energy_of(sums(u, S), beta);
  diag.energy_history.push_back(E);

  Eigen::VectorXd gu(n - 1), gs(n - 2);
  auto gradient = [&](const RadialProfile& uu, const RadialProfile& ss) {
    const auto Lu = L0.apply(uu.values);
    const auto Ls = Ld.apply(ss.values);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double x = uu.values[i], y = ss.values[i];
      gu[i] = -kTwoPi * W[i] * (Lu[i] - x + x * x * x + beta * y * y * x);
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double x = uu.values[i], y = ss.values[i];
      gs[i - 1] = -kTwoPi * W[i] * (Ls[i] + y - y * y * y + beta * x * x * y);
    }
  };

  int it = 0;
  double gnorm = 0.0;
  for (; it < opt.max_iter; ++it) {
    gradient(u, S);
    const Eigen::VectorXd pu = -Ku.solve(gu);
    const Eigen::VectorXd ps = -Ks.solve(gs);
    gnorm = std::sqrt(-gu.dot(pu) - gs.dot(ps));
    if (gnorm < opt.grad_tol) {
      const auto [ru, rf] = el_residuals(u, S, beta);
      if (std::max(ru, rf) < opt.el_tol) break;
    }
    double alpha = opt.step0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      RadialProfile tu = u, ts = S;
      for (std::size_t i = 0; i + 1 < n; ++i) tu.values[i] += alpha * pu[i];
      for (std::size_t i = 1; i + 1 < n; ++i) ts.values[i] += alpha * ps[i - 1];
      const double t = nehari_project(tu, ts, beta);
      if (!(t > 0.0)) continue;
      for (double& x : tu.values) x *= std::sqrt(t);
      const double dE = energy_delta(u, S, tu, ts, beta);
      if (dE <= -opt.armijo_c * alpha * gnorm * gnorm) {
        u = std::move(tu);
        S = std::move(ts);
        E += dE;
        diag.t_R = t;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // the energy is flat to rounding along the descent direction
      const auto [ru, rf] = el_residuals(u, S, beta);
      if (std::max(ru, rf) < opt.el_tol && gnorm < 10.0 * opt.grad_tol) break;
      throw Error(ErrorKind::stall, "line search failed at gradient norm " + std::to_string(gnorm));
    }
    diag.energy_history.push_back(E);
  }
  if (it >= opt.max_iter) throw Error(ErrorKind::stall, "descent stalled at gradient norm " + std::to_string(gnorm));
  diag.iterations = it;
  diag.gradient_norm = gnorm;
  diag.constraint_value = nehari_constraint(u, S, beta);

  CoupledState st;
  st.u = std::move(u);
  st.f = std::move(S);
  st.beta = beta;
  st.ball_radius = R;
  st.energy = energy_ER(st.u, st.f, beta, R);
  const auto [ru, rf] = el_residuals(st.u, st.f, beta);
  st.residual = std::max(ru, rf);
  st.u.residual = ru;
  st.f.residual = rf;
  st.iterations = it;
  st.route = "nehari";
  return {st, diag};
}

RadiusRun continue_in_R(double beta, int d, const std::vector<double>& radii, double h) {
  if (radii.size() < 3) throw Error(ErrorKind::config, "need at least three radii");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1])) throw Error(ErrorKind::config, "radii must increase");
  RadiusRun run;
  run.states.push_back(continue_in_beta(beta, d, radii[0], 0.1, h).first);
  for (std::size_t s = 1; s < radii.size(); ++s) {
    const CoupledState& prev = run.states.back();
    const auto mesh = ball_mesh(radii[s], h);
    CoupledState init;
    init.u.mesh = init.f.mesh = mesh;
    init.u.kind = profiles::Kind::coupled_u;
    init.f.kind = profiles::Kind::coupled_f;
    init.f.degree = d;
    init.u.values.assign(mesh.size(), 0.0);
    init.f.values.assign(mesh.size(), 1.0);
    for (std::size_t i = 0; i < prev.u.size(); ++i) {
      init.u.values[i] = prev.u.values[i];
      init.f.values[i] = prev.f.values[i];
    }
    run.states.push_back(newton_radial(beta, d, radii[s], init));
  }
  const std::size_t core = run.states.front().u.size();
  for (std::size_t s = 1; s < run.states.size(); ++s) {
    double m = 0.0;
    for (std::size_t i = 0; i < core; ++i) {
      m = std::max(m, std::abs(run.states[s].u.values[i] - run.states[s - 1].u.values[i]));
      m = std::max(m, std::abs(run.states[s].f.values[i] - run.states[s - 1].f.values[i]));
    }
    run.cauchy.push_back(m);
  }
  return run;
}

}  // namespace svlab::radial
