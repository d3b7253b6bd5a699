#include "svlab/reduction.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>
#include <cmath>
#include <numbers>

#include "svlab/errors.hpp"
#include "svlab/kernels.hpp"

namespace svlab::reduction {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd lstsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
  return A.colPivHouseholderQr().solve(y);
}

double line_slope(const std::vector<double>& x, const std::vector<double>& y) {
  Eigen::MatrixXd A(x.size(), 2);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    A(i, 0) = x[i];
    A(i, 1) = 1.0;
    b[i] = y[i];
  }
  return lstsq(A, b)[0];
}

double wdot(const std::vector<double>& w, const std::vector<double>& a, const std::vector<double>& b) {
  return kernels::dot3(w.data(), a.data(), b.data(), w.size());
}

}  // namespace

BalanceRoot solve_lhat(double beta, int k) {
  if (!(beta > 0.0)) throw Error(ErrorKind::config, "beta must be positive");
  if (k < 2) throw Error(ErrorKind::config, "k must be at least 2");
  const double s = std::sin(kPi / k);
  // g(l) = log of the defining map minus log β; decreasing for l > 5/(4s)
  auto g = [&](double l) { return 2.5 * std::log(l) - 2.0 * l * s - std::log(beta); };
  const double lstar = 5.0 / (4.0 * s);
  if (!(g(lstar) > 0.0)) throw Error(ErrorKind::no_root, "beta exceeds the maximum of the balance map");
  double lo = lstar, hi = 2.0 * lstar;
  while (g(hi) > 0.0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-9 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  double l = 0.5 * (lo + hi);
  for (int i = 0; i < 8; ++i) {
    const double step = g(l) / (2.5 / l - 2.0 * s);
    l -= step;
    if (std::abs(step) < 1e-15 * l) break;
  }
  BalanceRoot r;
  r.lhat = l;
  r.beta = beta;
  r.k = k;
  r.residual = std::abs(std::pow(l, 2.5) * std::exp(-2.0 * l * s) - beta);
  return r;
}

ExpansionFit check_expansion(const std::vector<double>& beta_grid, int k) {
  if (beta_grid.size() < 4) throw Error(ErrorKind::insufficient_data, "need at least four beta values");
  double bmin = beta_grid.front(), bmax = beta_grid.front();
  for (double b : beta_grid) {
    bmin = std::min(bmin, b);
    bmax = std::max(bmax, b);
  }
  if (!(bmax <= 1e-3) || std::log10(bmax / bmin) < 4.0 - 1e-9)
    throw Error(ErrorKind::insufficient_data, "beta grid must span four decades below 1e-3");
  ExpansionFit f;
  f.k = k;
  f.target = 1.0 / (2.0 * std::sin(kPi / k));
  const std::size_t n = beta_grid.size();
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double L = std::log(1.0 / beta_grid[i]);
    A(i, 0) = L;
    A(i, 1) = std::log(L);
    A(i, 2) = 1.0;
    y[i] = solve_lhat(beta_grid[i], k).lhat;
    f.betas.push_back(beta_grid[i]);
    f.lhats.push_back(y[i]);
  }
  const Eigen::VectorXd c = lstsq(A, y);
  f.leading = c[0];
  f.c_k = c[1];
  f.intercept = c[2];
  f.rel_error = std::abs(f.leading - f.target) / f.target;
  const Eigen::VectorXd r = y - A * c;
  f.residuals.assign(r.data(), r.data() + n);
  const double s = std::sin(kPi / k);
  for (std::size_t i = 0; i < n; ++i) {
    const double L = A(i, 0), x = L / (2.0 * s);
    f.remainder.push_back(std::abs(y[i] - x - 1.25 / s * std::log(x)) / std::log(L));
  }
  return f;
}

ProjectedSolution projected_solve(const grid::SectorField& f, const planar::PolygonAnsatz& a, double beta) {
  const auto& base = *a.field.base;
  const auto& m = *a.field.mesh;
  if (f.size() != m.size()) throw Error(ErrorKind::mesh_mismatch, "right-hand side lives on another mesh");
  const std::size_t nn = m.size();
  const auto red = planar::detail::reduction(m, a.field.rotation_phase());
  const SpMat Pu = red.P.topLeftCorner(nn, red.n_u);
  const SpMat Put = Pu.transpose();
  const SpMat A = Put * planar::detail::linear_u(base, beta) * Pu;
  const auto& qw = m.quad_weights();
  Eigen::VectorXd e(nn), fq(nn), ef(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    e[i] = base.du_dl[i];
    ef[i] = qw[i] * base.du_dl[i];
    fq[i] = f[i];
  }
  const Eigen::VectorXd pe = Put * e, pw = Put * ef, pf = Put * fq;
  const std::size_t nu = red.n_u;
  Triplets t;
  t.reserve(A.nonZeros() + 2 * pe.size());
  for (int o = 0; o < A.outerSize(); ++o)
    for (SpMat::InnerIterator it(A, o); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (std::size_t i = 0; i < nu; ++i) {
    if (pe[i] != 0.0) t.emplace_back(i, nu, -pe[i]);
    if (pw[i] != 0.0) t.emplace_back(nu, i, pw[i]);
  }
  SpMat B(nu + 1, nu + 1);
  B.setFromTriplets(t.begin(), t.end());
  Eigen::VectorXd rhs(nu + 1);
  rhs.head(nu) = pf;
  rhs[nu] = 0.0;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(B);
  lu.factorize(B);
  if (lu.info() != Eigen::Success) throw Error(ErrorKind::nondegeneracy_failure, "bordered system is singular");
  const Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite())
    throw Error(ErrorKind::nondegeneracy_failure, "bordered solve failed");
  ProjectedSolution s;
  s.phi = grid::SectorField(a.field.mesh);
  const Eigen::VectorXd phi = Pu * x.head(nu);
  for (std::size_t i = 0; i < nn; ++i) s.phi[i] = phi[i];
  s.c = x[nu];
  s.orthogonality = phi.dot(ef);
  return s;
}

ReducedForce reduced_force_on(const planar::PolygonAnsatz& a, double beta, const ForceOptions& opt) {
  const auto& b = *a.field.base;
  const auto& m = *a.field.mesh;
  const auto& qw = m.quad_weights();
  const std::size_t nn = m.size();
  ReducedForce r;
  r.l = a.l;
  r.beta = beta;
  r.k = a.k;
  r.d = a.d;
  r.denom = wdot(qw, b.du_dl, b.du_dl);
  if (!(r.denom > 0.0) || !std::isfinite(r.denom))
    throw Error(ErrorKind::zero_denominator, "∫(∂u_l/∂l)² vanishes");
  std::vector<double> S2(nn), uS2(nn);
  for (std::size_t i = 0; i < nn; ++i) S2[i] = b.S[i] * b.S[i];
  std::vector<double> eq = b.cube;  // Δû − û + û³ at φ = 0
  std::vector<double> uhat = b.U;
  if (opt.with_correction) {
    const SpMat L = planar::detail::linear_u(b, beta);
    std::vector<double> phi(nn, 0.0);
    for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
      grid::SectorField rhs(a.field.mesh);
      for (std::size_t i = 0; i < nn; ++i) {
        const double p = phi[i];
        rhs[i] = -(b.cube[i] + beta * b.U[i] * S2[i] + 3.0 * b.U[i] * p * p + p * p * p);
      }
      const auto ps = projected_solve(rhs, a, beta);
      double change = 0.0, size = 0.0;
      for (std::size_t i = 0; i < nn; ++i) {
        change = std::max(change, std::abs(ps.phi[i] - phi[i]));
        size = std::max(size, std::abs(ps.phi[i]));
      }
      phi = ps.phi.v;
      r.sweeps = sweep + 1;
      if (change <= 1e-12 * std::max(size, 1e-300)) break;
    }
    const Eigen::Map<const Eigen::VectorXd> ph(phi.data(), nn);
    // Δ_hφ from the linearization minus its pointwise part
    const Eigen::VectorXd Lp = L * ph;
    for (std::size_t i = 0; i < nn; ++i) {
      const double U = b.U[i], p = phi[i];
      const double lap = Lp[i] - (-1.0 + 3.0 * U * U + beta * S2[i]) * p;
      eq[i] = b.cube[i] + lap - p + p * (3.0 * U * U + 3.0 * U * p + p * p);
      uhat[i] = U + p;
    }
  }
  for (std::size_t i = 0; i < nn; ++i) uS2[i] = uhat[i] * S2[i];
  r.I1 = wdot(qw, eq, b.du_dl);
  r.I2 = beta * wdot(qw, uS2, b.du_dl);
  r.c_of_l = (r.I1 + r.I2) / r.denom;
  return r;
}

ReducedForce reduced_force(double l, double beta, int k, int d, const ForceOptions& opt) {
  return reduced_force_on(planar::build_ansatz(l, k, d, opt.mesh), beta, opt);
}

I2Split i2_two_ways(const planar::PolygonAnsatz& a, double beta) {
  const auto& b = *a.field.base;
  const auto& m = *a.field.mesh;
  const auto& qw = m.quad_weights();
  const auto& nr = m.node_r();
  const double d2 = static_cast<double>(a.d) * a.d;
  I2Split s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double ue = qw[i] * b.U[i] * b.du_dl[i];
    s.direct += ue * b.S[i] * b.S[i];
    s.decomposed += ue * (nr[i] > 0.0 ? 1.0 - d2 / (nr[i] * nr[i]) : 0.0);
  }
  s.direct *= beta;
  s.decomposed *= beta;
  return s;
}

RootResult find_root(double beta, int k, int d, const RootOptions& opt) {
  RootResult r;
  r.lhat = solve_lhat(beta, k).lhat;
  r.gamma = opt.gamma;
  auto c_at = [&](double l) { return reduced_force(l, beta, k, d, opt.force); };
  for (int attempt = 0; attempt < 2; ++attempt) {
    r.lo = c_at(r.lhat - r.gamma);
    r.hi = c_at(r.lhat + r.gamma);
    if ((r.lo.c_of_l > 0.0) != (r.hi.c_of_l > 0.0)) break;
    if (attempt == 1) throw Error(ErrorKind::no_sign_change, "reduced force keeps one sign on the bracket");
    r.gamma *= 2.0;
    if (r.lhat - r.gamma <= 0.0) throw Error(ErrorKind::no_sign_change, "widened bracket leaves l > 0");
  }
  r.decreasing = r.lo.c_of_l > 0.0 && r.hi.c_of_l < 0.0;
  double a = r.lhat - r.gamma, b = r.lhat + r.gamma;
  ReducedForce fa = r.lo;
  const double scale = std::max(std::abs(r.lo.c_of_l), std::abs(r.hi.c_of_l));
  ReducedForce mid = fa;
  for (int i = 0; i < 200; ++i) {
    const double x = 0.5 * (a + b);
    mid = c_at(x);
    ++r.bisections;
    if (std::abs(mid.c_of_l) <= opt.rel_tol * scale || b - a < 1e-12 * x) break;
    if ((mid.c_of_l > 0.0) == (fa.c_of_l > 0.0)) {
      a = x;
      fa = mid;
    } else {
      b = x;
    }
  }
  r.at_root = mid;
  r.l_beta = mid.l;
  return r;
}

PowerFit fit_I1(const std::vector<double>& ls, const std::vector<double>& I1, int k) {
  if (ls.size() < 3 || ls.size() != I1.size()) throw Error(ErrorKind::insufficient_data, "need three l values");
  PowerFit f;
  std::vector<double> y(ls.size()), x(ls.size()), z(ls.size());
  const double s = 2.0 * std::sin(kPi / k);
  for (std::size_t i = 0; i < ls.size(); ++i) {
    y[i] = std::log(std::abs(I1[i]));
    x[i] = std::log(ls[i]);
    z[i] = y[i] + s * ls[i];
  }
  f.slope = line_slope(ls, y);
  f.power = line_slope(x, z);
  return f;
}

double fit_I2_power(const std::vector<double>& ls, const std::vector<double>& I2) {
  if (ls.size() < 3 || ls.size() != I2.size()) throw Error(ErrorKind::insufficient_data, "need three l values");
  std::vector<double> x(ls.size()), y(ls.size());
  for (std::size_t i = 0; i < ls.size(); ++i) {
    x[i] = std::log(ls[i]);
    y[i] = std::log(std::abs(I2[i]));
  }
  return line_slope(x, y);
}

}  // namespace svlab::reduction
