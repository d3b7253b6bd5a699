#include "svlab/profiles.hpp"

#include <algorithm>
#include <array>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "svlab/errors.hpp"
#include <Eigen/Dense>

#include "svlab/linalg.hpp"
#include "svlab/radial_ops.hpp"

namespace svlab::profiles {

namespace odeint = boost::numeric::odeint;
using State = std::array<double, 2>;

const char* to_string(Kind k) {
  switch (k) {
    case Kind::spike: return "spike";
    case Kind::vortex: return "vortex";
    case Kind::coupled_u: return "coupled_u";
    case Kind::coupled_f: return "coupled_f";
  }
  return "?";
}

grid::Spline RadialProfile::spline() const {
  const bool odd = (kind == Kind::vortex || kind == Kind::coupled_f) && degree % 2 == 1;
  return grid::Spline(mesh.nodes(), values, odd ? grid::Spline::Parity::odd : grid::Spline::Parity::even);
}

bool satisfies_invariants(const RadialProfile& p, std::string* why) {
  auto fail = [&](const char* m) {
    if (why) *why = m;
    return false;
  };
  const auto& v = p.values;
  if (v.size() != p.mesh.size()) return fail("length mismatch");
  switch (p.kind) {
    case Kind::spike:
    case Kind::coupled_u:
      for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        if (!(v[i] > 0.0)) return fail("not positive");
        if (!(v[i + 1] < v[i])) return fail("not strictly decreasing");
      }
      if (p.kind == Kind::spike && !(v.back() < 1e-6)) return fail("tail not small");
      return true;
    case Kind::vortex:
    case Kind::coupled_f:
      if (v.front() != 0.0) return fail("value at origin not zero");
      for (std::size_t i = 0; i + 1 < v.size(); ++i)
        if (!(v[i + 1] > v[i])) return fail("not strictly increasing");
      if (p.kind == Kind::vortex && !(v.back() > 0.9 && v.back() <= 1.0)) return fail("far value");
      return true;
  }
  return true;
}

namespace {

struct SpikeRhs {
  void operator()(const State& y, State& dy, double r) const {
    dy[0] = y[1];
    dy[1] = -y[1] / r + y[0] - y[0] * y[0] * y[0];
  }
};

enum class Fate { high, low, neither };

// Integrate from the series start and classify; optionally sample at `at`.
Fate shoot(double a, double r_end, const std::vector<double>* at = nullptr,
           std::vector<double>* out = nullptr, double* r_stop = nullptr) {
  const double r0 = 1e-4;
  const double c = 0.5 * (a - a * a * a);  // w''(0)
  State y{a + 0.5 * c * r0 * r0, c * r0};
  auto stepper = odeint::make_dense_output(1e-13, 1e-13, odeint::runge_kutta_dopri5<State>());
  stepper.initialize(y, r0, 1e-3);
  std::size_t next = 0;
  if (at && out) {
    out->assign(at->size(), std::numeric_limits<double>::quiet_NaN());
    while (next < at->size() && (*at)[next] < r0) (*out)[next++] = a;
  }
  Fate fate = Fate::neither;
  while (stepper.current_time() < r_end) {
    stepper.do_step(SpikeRhs{});
    const State& s = stepper.current_state();
    const double t = stepper.current_time();
    if (at && out) {
      while (next < at->size() && (*at)[next] <= std::min(t, r_end)) {
        State tmp;
        stepper.calc_state((*at)[next], tmp);
        (*out)[next++] = tmp[0];
      }
    }
    if (s[0] < 0.0) {
      fate = Fate::high;
      break;
    }
    if (s[1] > 0.0) {
      fate = Fate::low;
      break;
    }
  }
  if (r_stop) *r_stop = std::min(stepper.current_time(), r_end);
  return fate;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

double shoot_spike(double a_lo, double a_hi, double r_shoot) {
  const Fate flo = shoot(a_lo, r_shoot), fhi = shoot(a_hi, r_shoot);
  if (flo != Fate::low || fhi != Fate::high)
    throw Error(ErrorKind::no_bracket, "initial heights do not bracket the ground state");
  double lo = a_lo, hi = a_hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const Fate f = shoot(mid, r_shoot);
    if (f == Fate::neither) return mid;
    (f == Fate::low ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

RadialProfile solve_spike(const SpikeOptions& opt) {
  RadialProfile p;
  p.mesh = grid::RadialMesh::graded(opt.mesh);
  p.kind = Kind::spike;
  const auto& r = p.mesh.nodes();
  const std::size_t n = r.size();

  const double a = shoot_spike(opt.a_lo, opt.a_hi, opt.r_shoot);
  std::vector<double> traj;
  double r_stop = 0.0;
  shoot(a, std::min(12.0, p.mesh.r_max()), &r, &traj, &r_stop);
  // splice an exponential tail where the trajectory stops being trustworthy
  std::size_t cut = p.mesh.locate(std::min({12.0, r_stop, p.mesh.r_max()}));
  while (cut > 0 && !(traj[cut] > 0.0)) --cut;
  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i <= cut; ++i) w[i] = traj[i];
  for (std::size_t i = cut + 1; i < n; ++i)
    w[i] = traj[cut] * std::sqrt(r[cut] / r[i]) * std::exp(-(r[i] - r[cut]));
  w[n - 1] = 0.0;

  const grid::Tridiag L = grid::laplacian_matrix(p.mesh, 0);
  auto residual = [&](const std::vector<double>& x) {
    Eigen::VectorXd F(n);
    const auto Lx = L.apply(x);
    for (std::size_t i = 0; i + 1 < n; ++i) F[i] = Lx[i] - x[i] + x[i] * x[i] * x[i];
    F[n - 1] = x[n - 1];
    return F;
  };
  Eigen::VectorXd F = residual(w);
  double res = max_abs(F);
  int it = 0, stalled = 0;
  for (; it < 50 && res > opt.tol && stalled < 3; ++it) {
    const double before = res;
    Triplets t;
    t.reserve(3 * n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (i > 0) t.emplace_back(i, i - 1, L.lo[i]);
      t.emplace_back(i, i, L.di[i] - 1.0 + 3.0 * w[i] * w[i]);
      t.emplace_back(i, i + 1, L.up[i]);
    }
    t.emplace_back(n - 1, n - 1, 1.0);
    SpMat J(n, n);
    J.setFromTriplets(t.begin(), t.end());
    const Eigen::VectorXd dx = direct_solve(J, -F);
    double lam = 1.0;
    for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
      std::vector<double> trial(w);
      for (std::size_t i = 0; i < n; ++i) trial[i] += lam * dx[i];
      Eigen::VectorXd Ft = residual(trial);
      const double rt = max_abs(Ft);
      if (rt < res || ls == 29) {
        w.swap(trial);
        F = std::move(Ft);
        res = rt;
        break;
      }
    }
    // near the rounding floor progress comes in tiny steps
    stalled = res > 0.5 * before ? stalled + 1 : 0;
  }
  if (res > opt.tol)
    throw Error(ErrorKind::nonconvergence, "spike Newton stopped at residual " + std::to_string(res));
  p.values = std::move(w);
  p.residual = res;
  p.iterations = it;
  p.decay_coeff = fit_decay(p, opt.fit_lo, opt.fit_hi).A0;
  return p;
}

RadialProfile solve_vortex(int d, const VortexOptions& opt) {
  return solve_vortex_on(d, grid::RadialMesh::graded(opt.mesh), opt);
}

RadialProfile solve_vortex_on(int d, const grid::RadialMesh& mesh, const VortexOptions& opt) {
  if (d < 1) throw Error(ErrorKind::config, "vortex degree must be >= 1");
  RadialProfile p;
  p.mesh = mesh;
  p.kind = Kind::vortex;
  p.degree = d;
  const auto& r = mesh.nodes();
  const std::size_t n = r.size();
  const double R = mesh.r_max();
  const double outer = opt.outer_value ? *opt.outer_value : 1.0 - d * d / (2.0 * R * R);
  std::vector<double> S(n);
  for (std::size_t i = 0; i < n; ++i) S[i] = std::tanh(r[i] / d);
  S[0] = 0.0;
  S[n - 1] = outer;

  const grid::Tridiag L = grid::laplacian_matrix(mesh, d);
  auto residual = [&](const std::vector<double>& x) {
    Eigen::VectorXd F(n);
    const auto Lx = L.apply(x);
    F[0] = x[0];
    for (std::size_t i = 1; i + 1 < n; ++i) F[i] = Lx[i] + x[i] - x[i] * x[i] * x[i];
    F[n - 1] = x[n - 1] - outer;
    return F;
  };
  Eigen::VectorXd F = residual(S);
  double res = max_abs(F);
  int it = 0;
  for (; it < opt.max_iter && res > opt.tol; ++it) {
    Triplets t;
    t.reserve(3 * n);
    t.emplace_back(0, 0, 1.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      t.emplace_back(i, i - 1, L.lo[i]);
      t.emplace_back(i, i, L.di[i] + 1.0 - 3.0 * S[i] * S[i]);
      t.emplace_back(i, i + 1, L.up[i]);
    }
    t.emplace_back(n - 1, n - 1, 1.0);
    SpMat J(n, n);
    J.setFromTriplets(t.begin(), t.end());
    const Eigen::VectorXd dx = direct_solve(J, -F);
    // damped fallback: backtrack until the residual drops
    double lam = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, lam *= 0.5) {
      std::vector<double> trial(S);
      for (std::size_t i = 1; i + 1 < n; ++i) trial[i] += lam * dx[i];
      Eigen::VectorXd Ft = residual(trial);
      const double rt = max_abs(Ft);
      if (rt < res) {
        S.swap(trial);
        F = std::move(Ft);
        res = rt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (res > opt.tol) throw Error(ErrorKind::nonconvergence, "vortex Newton stagnated");
  p.values = std::move(S);
  p.residual = res;
  p.iterations = it;
  return p;
}

DecayFit fit_decay(const RadialProfile& p, double r_lo, double r_hi) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = p.mesh.r(i);
    if (r < r_lo || r > r_hi) continue;
    if (!(p.values[i] > 1e-12))
      throw Error(ErrorKind::insufficient_window, "profile too small inside the fit window");
    x.push_back(r);
    y.push_back(std::log(p.values[i] * std::sqrt(r)));
  }
  if (x.size() < 8) throw Error(ErrorKind::insufficient_window, "fit window holds fewer than 8 nodes");
  Eigen::MatrixXd A(x.size(), 2);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = x[i];
    b[i] = y[i];
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  return {std::exp(c[0]), c[1]};
}

std::string to_csv(const RadialProfile& p) {
  nlohmann::json h{{"kind", to_string(p.kind)}, {"d", p.degree}, {"n", p.size()},
                   {"residual", p.residual}};
  h["A0"] = p.decay_coeff ? nlohmann::json(*p.decay_coeff) : nlohmann::json(nullptr);
  std::ostringstream os;
  os.precision(17);
  os << "# " << h.dump() << "\nr,value\n";
  for (std::size_t i = 0; i < p.size(); ++i) os << p.mesh.r(i) << ',' << p.values[i] << '\n';
  return os.str();
}

}  // namespace svlab::profiles
