#include "svlab/planar.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "svlab/errors.hpp"
#include "svlab/profiles.hpp"
#include "svlab/radial_ops.hpp"

namespace svlab::planar {

namespace {

constexpr double kPi = std::numbers::pi;

struct SpikeData {
  profiles::RadialProfile p;
  grid::Spline s;
};

const SpikeData& spike_data() {
  static const SpikeData sd = [] {
    auto p = profiles::solve_spike();
    auto s = p.spline();
    return SpikeData{std::move(p), std::move(s)};
  }();
  return sd;
}

struct VortexData {
  profiles::RadialProfile p;
  grid::Spline s;
};

std::shared_ptr<const VortexData> vortex_data(int d, double need) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const VortexData>> cache;
  const int rmax = std::max(40, 10 * static_cast<int>(std::ceil((need + 10.0) / 10.0)));
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{d, need <= 40.0 ? 40 : rmax}];
  if (!slot) {
    profiles::VortexOptions vo;
    vo.mesh.r_max = need <= 40.0 ? 40.0 : rmax;
    auto p = profiles::solve_vortex(d, vo);
    auto s = p.spline();
    slot = std::make_shared<const VortexData>(VortexData{std::move(p), std::move(s)});
  }
  return slot;
}

double vortex_eval(const VortexData& v, int d, double r) {
  if (r <= v.s.x_max()) return v.s(r);
  return 1.0 - 0.5 * d * d / (r * r);
}

/// Sector Laplacians for the two symmetry types. Lv acts on [χ1; χ2].
struct Ops {
  SpMat Lu, Lv;
};

Ops make_ops(const grid::SectorMesh& m, cplx phase) {
  const auto& rm = m.radial();
  const std::size_t nn = m.size();
  const std::size_t N = m.rings();
  const int M = m.m_theta();
  const grid::Tridiag L0 = grid::laplacian_matrix(rm, 0);
  const double c = phase.real(), s = phase.imag();
  Triplets tu, tv;
  tu.reserve(5 * nn);
  tv.reserve(12 * nn);
  // centre: 4(mean over the first ring − f0)/r1²
  const double r1 = rm.r(1);
  const double cc = 4.0 / (r1 * r1);
  tu.emplace_back(0, 0, -cc);
  tv.emplace_back(0, 0, -cc);
  tv.emplace_back(nn, nn, -cc);
  // the full-circle mean of v picks up (1/k)Σ_s e^{isΦ}
  cplx q = 0.0;
  for (int sct = 0; sct < m.k(); ++sct) q += std::pow(phase, sct);
  q /= static_cast<double>(m.k());
  for (int j = 0; j < M; ++j) {
    const std::size_t n = m.index(1, j);
    tu.emplace_back(0, n, cc / M);
    tv.emplace_back(0, n, cc / M * q.real());
    tv.emplace_back(0, nn + n, -cc / M * q.imag());
    tv.emplace_back(nn, n, cc / M * q.imag());
    tv.emplace_back(nn, nn + n, cc / M * q.real());
  }
  const double dth2 = m.dtheta() * m.dtheta();
  for (std::size_t i = 1; i < N; ++i) {
    const double r = rm.r(i);
    double lo, di, up;
    if (i + 1 < N) {
      lo = L0.lo[i];
      di = L0.di[i];
      up = L0.up[i];
    } else {
      // outer ring: ghost correction 0 one cell further out
      const double h = rm.h(i - 1);
      const double mo = r + 0.5 * h, mi = rm.mid(i - 1);
      const double W = 0.5 * (mo * mo - mi * mi);
      lo = mi / h / W;
      di = -(mi / h + mo / h) / W;
      up = 0.0;
    }
    const double a = 1.0 / (r * r * dth2);
    for (int j = 0; j < M; ++j) {
      const std::size_t n = m.index(i, j);
      const std::size_t nin = m.index(i - 1, i == 1 ? 0 : j);
      tu.emplace_back(n, n, di - 2.0 * a);
      tv.emplace_back(n, n, di - 2.0 * a);
      tv.emplace_back(nn + n, nn + n, di - 2.0 * a);
      if (i > 1) {
        tu.emplace_back(n, nin, lo);
        tv.emplace_back(n, nin, lo);
        tv.emplace_back(nn + n, nn + nin, lo);
      } else {
        tu.emplace_back(n, 0, lo);
        tv.emplace_back(n, 0, lo);
        tv.emplace_back(nn + n, nn, lo);
      }
      if (up != 0.0) {
        const std::size_t nout = m.index(i + 1, j);
        tu.emplace_back(n, nout, up);
        tv.emplace_back(n, nout, up);
        tv.emplace_back(nn + n, nn + nout, up);
      }
      // θ neighbours; crossing the sector edge rotates v by e^{±iΦ}
      const std::size_t np = m.index(i, (j + 1) % M), nm = m.index(i, (j + M - 1) % M);
      tu.emplace_back(n, np, a);
      tu.emplace_back(n, nm, a);
      if (j + 1 < M) {
        tv.emplace_back(n, np, a);
        tv.emplace_back(nn + n, nn + np, a);
      } else {
        tv.emplace_back(n, np, a * c);
        tv.emplace_back(n, nn + np, -a * s);
        tv.emplace_back(nn + n, np, a * s);
        tv.emplace_back(nn + n, nn + np, a * c);
      }
      if (j > 0) {
        tv.emplace_back(n, nm, a);
        tv.emplace_back(nn + n, nn + nm, a);
      } else {
        tv.emplace_back(n, nm, a * c);
        tv.emplace_back(n, nn + nm, a * s);
        tv.emplace_back(nn + n, nm, -a * s);
        tv.emplace_back(nn + n, nn + nm, a * c);
      }
    }
  }
  Ops o;
  o.Lu.resize(nn, nn);
  o.Lu.setFromTriplets(tu.begin(), tu.end());
  o.Lv.resize(2 * nn, 2 * nn);
  o.Lv.setFromTriplets(tv.begin(), tv.end());
  return o;
}

std::vector<double> corr(const grid::SectorField& f, const std::vector<double>& base) {
  std::vector<double> c(f.size());
  for (std::size_t n = 0; n < c.size(); ++n) c[n] = f.v[n] - base[n];
  return c;
}

void check_field(const PlanarField& f) {
  if (!f.mesh) throw Error(ErrorKind::mesh_mismatch, "planar field without mesh");
  const std::size_t n = f.mesh->size();
  if (f.u.size() != n || f.v1.size() != n || f.v2.size() != n)
    throw Error(ErrorKind::mesh_mismatch, "planar field length differs from mesh");
  if (f.base && !(f.base->mesh == f.mesh || f.base->mesh->same_as(*f.mesh)))
    throw Error(ErrorKind::mesh_mismatch, "base lives on another mesh");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(f.u[i]) || !std::isfinite(f.v1[i]) || !std::isfinite(f.v2[i]))
      throw Error(ErrorKind::nan_input, "non-finite planar field");
}

std::shared_ptr<const Base> base_or_zero(const PlanarField& f) {
  if (f.base) return f.base;
  return make_base(f.mesh, {}, 0);
}

struct Residuals {
  std::vector<double> F1, F2r, F2i;
};

Residuals residuals_of(const PlanarField& f, double beta) {
  check_field(f);
  const auto b = base_or_zero(f);
  Residuals r;
  detail::residual(*b, f.rotation_phase(), beta, corr(f.u, b->U), corr(f.v1, b->vd1), corr(f.v2, b->vd2), r.F1,
                   r.F2r, r.F2i);
  return r;
}

}  // namespace

cplx PlanarField::rotation_phase() const { return std::polar(1.0, 2.0 * kPi * d / k); }

double spike(double rho) {
  const auto& sd = spike_data();
  return rho < sd.s.x_max() ? sd.s(rho) : 0.0;
}

double spike_deriv(double rho) {
  const auto& sd = spike_data();
  return rho < sd.s.x_max() ? sd.s.deriv(rho) : 0.0;
}

double vortex(int d, double r) { return vortex_eval(*vortex_data(d, 40.0), d, r); }

bool degree_condition(int d, int k) { return d == 1 || (d >= 2 && (2 * (d - 1)) % k != 0); }
bool predicted_resonant(int d, int k) { return d >= 2 && (2 * (d - 1)) % k == 0; }

std::shared_ptr<const Base> make_base(std::shared_ptr<const grid::SectorMesh> mesh, std::vector<cplx> centers,
                                      int d, double l) {
  auto b = std::make_shared<Base>();
  const auto& m = *mesh;
  const std::size_t nn = m.size();
  b->mesh = mesh;
  b->centers = std::move(centers);
  b->d = d;
  b->U.assign(nn, 0.0);
  b->cube.assign(nn, 0.0);
  b->S.assign(nn, 0.0);
  b->vd1.assign(nn, 0.0);
  b->vd2.assign(nn, 0.0);
  b->du_dl.assign(nn, 0.0);
  std::shared_ptr<const VortexData> vd;
  if (d > 0) vd = vortex_data(d, m.radial().r_max());
  for (std::size_t n = 0; n < nn; ++n) {
    const double r = m.r_of(n), th = m.theta_of(n);
    const cplx z = std::polar(r, th);
    double s = 0.0, acc = 0.0, dl = 0.0;
    for (const cplx& c : b->centers) {
      const cplx dz = z - c;
      const double rho = std::abs(dz);
      const double a = spike(rho);
      // (s + a)³ − s³ − a³ = 3sa(s + a): the sum telescopes to the cube difference
      acc += 3.0 * s * a * (s + a);
      s += a;
      if (l > 0.0 && rho > 0.0) {
        const cplx e = c / std::abs(c);
        dl += spike_deriv(rho) * -(dz.real() * e.real() + dz.imag() * e.imag()) / rho;
      }
    }
    b->U[n] = s;
    b->cube[n] = acc;
    b->du_dl[n] = dl;
    if (vd) {
      const double S = n == 0 ? 0.0 : vortex_eval(*vd, d, r);
      b->S[n] = S;
      b->vd1[n] = S * std::cos(d * th);
      b->vd2[n] = S * std::sin(d * th);
    }
  }
  return b;
}

PlanarField field_from_base(std::shared_ptr<const Base> base, int d_symmetry) {
  PlanarField f;
  f.mesh = base->mesh;
  f.k = base->mesh->k();
  f.d = d_symmetry;
  f.u = grid::SectorField(f.mesh);
  f.v1 = grid::SectorField(f.mesh);
  f.v2 = grid::SectorField(f.mesh);
  f.u.v = base->U;
  f.v1.v = base->vd1;
  f.v2.v = base->vd2;
  f.base = std::move(base);
  return f;
}

PolygonAnsatz build_ansatz_on(double l, int d, std::shared_ptr<const grid::SectorMesh> mesh) {
  if (!(l > 0.0)) throw Error(ErrorKind::invalid_radius, "polygon radius must be positive");
  if (d < 1) throw Error(ErrorKind::config, "degree must be at least 1");
  const int k = mesh->k();
  PolygonAnsatz a;
  a.l = l;
  a.k = k;
  a.d = d;
  a.degree_ok = degree_condition(d, k);
  for (int j = 0; j < k; ++j) a.centers.push_back(std::polar(l, 2.0 * kPi * j / k));
  a.field = field_from_base(make_base(mesh, a.centers, d, l), d);
  return a;
}

PolygonAnsatz build_ansatz(double l, int k, int d, const AnsatzOptions& opt) {
  if (!(l > 0.0)) throw Error(ErrorKind::invalid_radius, "polygon radius must be positive");
  if (k < 2) throw Error(ErrorKind::config, "k must be at least 2");
  if (!(opt.h > 0.0) || !(opt.pad > 0.0) || !(opt.arc > 0.0)) throw Error(ErrorKind::config, "bad ansatz mesh options");
  int M = opt.m_theta;
  if (M == 0) {
    M = static_cast<int>(std::ceil(2.0 * kPi * l / (k * opt.arc)));
    M = std::max(32, (M + 3) / 4 * 4);
  }
  const double R = l + opt.pad;
  const double h = R / std::ceil(R / opt.h);
  auto mesh = std::make_shared<const grid::SectorMesh>(grid::RadialMesh::uniform(R, h), M, k);
  return build_ansatz_on(l, d, std::move(mesh));
}

double PolygonAnsatz::u_at(double x, double y) const {
  double s = 0.0;
  for (const cplx& c : centers) s += spike(std::abs(cplx(x, y) - c));
  return s;
}

cplx PolygonAnsatz::v_at(double x, double y) const {
  const double r = std::hypot(x, y);
  if (r == 0.0) return 0.0;
  return std::polar(vortex_eval(*vortex_data(d, std::max(40.0, r)), d, r), d * std::atan2(y, x));
}

SymmetryDefect symmetry_defect(const PlanarField& f) {
  check_field(f);
  const auto& m = *f.mesh;
  const int M = m.m_theta();
  const cplx ph = f.rotation_phase();
  SymmetryDefect s;
  for (std::size_t n = 0; n < m.size(); ++n) s.bound_v = std::max(s.bound_v, std::hypot(f.v1[n], f.v2[n]));
  for (std::size_t i = 1; i < m.rings(); ++i)
    for (int j = 0; j <= M / 2; ++j) {
      const std::size_t a = m.index(i, j), b = m.index(i, (M - j) % M);
      s.reflection_u = std::max(s.reflection_u, std::abs(f.u[a] - f.u[b]));
      // v at θ = −θ_j is e^{−iΦ} v_{M−j}, and must equal conj(v_j)
      const cplx mirror = (j == 0 ? ph : 1.0) * cplx(f.v1[b], f.v2[b]) / ph;
      s.reflection_v = std::max(s.reflection_v, std::abs(mirror - std::conj(cplx(f.v1[a], f.v2[a]))));
    }
  return s;
}

namespace detail {

Reduction reduction(const grid::SectorMesh& m, cplx phase) {
  const std::size_t nn = m.size();
  const std::size_t N = m.rings();
  const int M = m.m_theta();
  const double c = phase.real(), s = phase.imag();
  const double half = std::arg(phase) / 2.0;
  Triplets t;
  std::size_t col = 0;
  t.emplace_back(0, col++, 1.0);
  for (std::size_t i = 1; i + 1 < N; ++i)
    for (int j = 0; j <= M / 2; ++j) {
      t.emplace_back(m.index(i, j), col, 1.0);
      if (j > 0 && j < M / 2) t.emplace_back(m.index(i, M - j), col, 1.0);
      ++col;
    }
  const std::size_t n_u = col;
  for (std::size_t i = 1; i + 1 < N; ++i)
    for (int j = 0; j <= M / 2; ++j) {
      const std::size_t a = m.index(i, j);
      if (j == 0) {
        t.emplace_back(nn + a, col++, 1.0);
      } else if (j == M / 2) {
        t.emplace_back(nn + a, col, std::cos(half));
        t.emplace_back(2 * nn + a, col, std::sin(half));
        ++col;
      } else {
        const std::size_t b = m.index(i, M - j);
        t.emplace_back(nn + a, col, 1.0);
        t.emplace_back(nn + b, col, c);
        t.emplace_back(2 * nn + b, col, s);
        ++col;
        t.emplace_back(2 * nn + a, col, 1.0);
        t.emplace_back(nn + b, col, s);
        t.emplace_back(2 * nn + b, col, -c);
        ++col;
      }
    }
  Reduction r;
  r.P.resize(3 * nn, col);
  r.P.setFromTriplets(t.begin(), t.end());
  r.n_u = n_u;
  return r;
}

void residual(const Base& b, cplx phase, double beta, const std::vector<double>& phi,
              const std::vector<double>& c1, const std::vector<double>& c2, std::vector<double>& F1,
              std::vector<double>& F2r, std::vector<double>& F2i) {
  const std::size_t nn = b.mesh->size();
  const Ops ops = make_ops(*b.mesh, phase);
  const Eigen::Map<const Eigen::VectorXd> ph(phi.data(), nn);
  Eigen::VectorXd chi(2 * nn);
  for (std::size_t n = 0; n < nn; ++n) {
    chi[n] = c1[n];
    chi[nn + n] = c2[n];
  }
  const Eigen::VectorXd Lphi = ops.Lu * ph;
  const Eigen::VectorXd Lchi = ops.Lv * chi;
  F1.resize(nn);
  F2r.resize(nn);
  F2i.resize(nn);
  for (std::size_t n = 0; n < nn; ++n) {
    const double U = b.U[n], p = phi[n], S2 = b.S[n] * b.S[n];
    const double w1 = b.vd1[n], w2 = b.vd2[n], x1 = c1[n], x2 = c2[n];
    const double dv2 = 2.0 * (w1 * x1 + w2 * x2) + x1 * x1 + x2 * x2;  // |v|² − S²
    const double v1 = w1 + x1, v2 = w2 + x2, vv = S2 + dv2, u = U + p;
    F1[n] = b.cube[n] + beta * U * S2 + Lphi[n] - p + p * (3.0 * U * U + 3.0 * U * p + p * p) +
            beta * (p * vv + U * dv2);
    F2r[n] = Lchi[n] + x1 * (1.0 - vv) - w1 * dv2 + beta * u * u * v1;
    F2i[n] = Lchi[nn + n] + x2 * (1.0 - vv) - w2 * dv2 + beta * u * u * v2;
  }
}

SpMat jacobian(const Base& b, cplx phase, double beta, const std::vector<double>& phi,
               const std::vector<double>& c1, const std::vector<double>& c2) {
  const std::size_t nn = b.mesh->size();
  const Ops ops = make_ops(*b.mesh, phase);
  Triplets t;
  t.reserve(ops.Lu.nonZeros() + ops.Lv.nonZeros() + 9 * nn);
  for (int o = 0; o < ops.Lu.outerSize(); ++o)
    for (SpMat::InnerIterator it(ops.Lu, o); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (int o = 0; o < ops.Lv.outerSize(); ++o)
    for (SpMat::InnerIterator it(ops.Lv, o); it; ++it) t.emplace_back(nn + it.row(), nn + it.col(), it.value());
  for (std::size_t n = 0; n < nn; ++n) {
    const double u = b.U[n] + phi[n];
    const double v1 = b.vd1[n] + c1[n], v2 = b.vd2[n] + c2[n];
    const double vv = v1 * v1 + v2 * v2;
    t.emplace_back(n, n, -1.0 + 3.0 * u * u + beta * vv);
    t.emplace_back(n, nn + n, 2.0 * beta * u * v1);
    t.emplace_back(n, 2 * nn + n, 2.0 * beta * u * v2);
    t.emplace_back(nn + n, n, 2.0 * beta * u * v1);
    t.emplace_back(2 * nn + n, n, 2.0 * beta * u * v2);
    t.emplace_back(nn + n, nn + n, 1.0 - 3.0 * v1 * v1 - v2 * v2 + beta * u * u);
    t.emplace_back(nn + n, 2 * nn + n, -2.0 * v1 * v2);
    t.emplace_back(2 * nn + n, nn + n, -2.0 * v1 * v2);
    t.emplace_back(2 * nn + n, 2 * nn + n, 1.0 - v1 * v1 - 3.0 * v2 * v2 + beta * u * u);
  }
  SpMat J(3 * nn, 3 * nn);
  J.setFromTriplets(t.begin(), t.end());
  return J;
}

SpMat linear_u(const Base& b, double beta) {
  const std::size_t nn = b.mesh->size();
  SpMat L = make_ops(*b.mesh, 1.0).Lu;
  Triplets t;
  for (std::size_t n = 0; n < nn; ++n) t.emplace_back(n, n, -1.0 + 3.0 * b.U[n] * b.U[n] + beta * b.S[n] * b.S[n]);
  SpMat D(nn, nn);
  D.setFromTriplets(t.begin(), t.end());
  return L + D;
}

Eigen::VectorXd solve(const SpMat& A, const Eigen::VectorXd& rhs, std::string* which) {
  {
    Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> it;
    it.preconditioner().setDroptol(1e-5);
    it.preconditioner().setFillfactor(20);
    it.setTolerance(1e-13);
    it.setMaxIterations(400);
    it.compute(A);
    if (it.info() == Eigen::Success) {
      Eigen::VectorXd x = it.solve(rhs);
      if (it.info() == Eigen::Success && x.allFinite() &&
          (A * x - rhs).norm() <= 1e-11 * std::max(rhs.norm(), 1e-300)) {
        if (which) *which = "bicgstab-ilut";
        return x;
      }
    }
  }
  if (which) *which = "sparselu";
  return direct_solve(A, rhs);
}

}  // namespace detail

grid::SectorField apply_S1(const PlanarField& f, double beta) {
  auto r = residuals_of(f, beta);
  grid::SectorField out(f.mesh);
  out.v = std::move(r.F1);
  return out;
}

ComplexField apply_S2(const PlanarField& f, double beta, double r_core) {
  auto r = residuals_of(f, beta);
  ComplexField out{grid::SectorField(f.mesh), grid::SectorField(f.mesh)};
  const auto& nr = f.mesh->node_r();
  for (std::size_t n = 0; n < f.mesh->size(); ++n) {
    const cplx F(r.F2r[n], r.F2i[n]);
    const cplx v(f.v1[n], f.v2[n]);
    cplx s = F;
    if (nr[n] >= r_core && std::abs(v) > 0.0) s = cplx(0.0, -1.0) * F / v;
    out.re[n] = s.real();
    out.im[n] = s.imag();
  }
  return out;
}

ComplexField extract_psi(const PlanarField& f, double r_min) {
  check_field(f);
  if (r_min < 0.5) throw Error(ErrorKind::core_exclusion, "ψ is not extracted inside r < 0.5");
  const auto b = base_or_zero(f);
  if (b->d == 0) throw Error(ErrorKind::config, "ψ needs a vortex base");
  ComplexField out{grid::SectorField(f.mesh), grid::SectorField(f.mesh)};
  const auto& nr = f.mesh->node_r();
  for (std::size_t n = 0; n < f.mesh->size(); ++n) {
    if (nr[n] < r_min) continue;
    const cplx v(f.v1[n], f.v2[n]), vd(b->vd1[n], b->vd2[n]);
    const cplx q = v * std::conj(vd);
    out.re[n] = std::arg(q);
    out.im[n] = -std::log(std::abs(v) / b->S[n]);
  }
  return out;
}

double winding_number(const PlanarField& f, double r) {
  check_field(f);
  const auto& m = *f.mesh;
  const auto& rm = m.radial();
  const std::size_t i = std::max<std::size_t>(1, std::min(rm.find(r), m.rings() - 1));
  const cplx ph = f.rotation_phase();
  const int M = m.m_theta();
  double total = 0.0;
  cplx rot = 1.0;
  for (int s = 0; s < m.k(); ++s, rot *= ph)
    for (int j = 0; j < M; ++j) {
      const std::size_t a = m.index(i, j);
      const cplx va = rot * cplx(f.v1[a], f.v2[a]);
      cplx vb;
      if (j + 1 < M) {
        const std::size_t b = m.index(i, j + 1);
        vb = rot * cplx(f.v1[b], f.v2[b]);
      } else {
        const std::size_t b = m.index(i, 0);
        vb = rot * ph * cplx(f.v1[b], f.v2[b]);
      }
      total += std::arg(vb / va);
    }
  return total / (2.0 * kPi);
}

int off_center_zeros(const PlanarField& f) {
  check_field(f);
  const auto& m = *f.mesh;
  const cplx ph = f.rotation_phase();
  const int M = m.m_theta();
  auto val = [&](std::size_t i, int j) {
    if (j < M) return cplx(f.v1[m.index(i, j)], f.v2[m.index(i, j)]);
    return ph * cplx(f.v1[m.index(i, 0)], f.v2[m.index(i, 0)]);
  };
  int count = 0;
  for (std::size_t i = 1; i + 1 < m.rings(); ++i)
    for (int j = 0; j < M; ++j) {
      const cplx q[4] = {val(i, j), val(i, j + 1), val(i + 1, j + 1), val(i + 1, j)};
      double w = 0.0;
      for (int e = 0; e < 4; ++e) w += std::arg(q[(e + 1) % 4] / q[e]);
      if (std::lround(w / (2.0 * kPi)) != 0) ++count;
    }
  return count;
}

double correction_scale(double l, int k, double beta, double alpha) {
  return std::exp(-2.0 * l * std::sin(kPi / k)) + std::abs(beta) * std::pow(l, 2.0 + alpha);
}

NewtonReport newton_planar(const PolygonAnsatz& init, double beta, const NewtonOptions& opt) {
  const PlanarField& f0 = init.field;
  check_field(f0);
  if (!f0.base) throw Error(ErrorKind::config, "Newton starts from an ansatz with a base");
  const Base& b = *f0.base;
  const auto& m = *f0.mesh;
  const std::size_t nn = m.size();
  const cplx ph = f0.rotation_phase();
  const auto red = detail::reduction(m, ph);
  const SpMat Pt = red.P.transpose();

  std::vector<double> phi = corr(f0.u, b.U), c1 = corr(f0.v1, b.vd1), c2 = corr(f0.v2, b.vd2);
  // rows that carry equations: everything but the outer ring, χ rows except the centre
  const std::size_t outer0 = m.index(m.rings() - 1, 0);
  auto res_max = [&](const std::vector<double>& F1, const std::vector<double>& F2r,
                     const std::vector<double>& F2i) {
    double r = 0.0;
    for (std::size_t n = 0; n < outer0; ++n) {
      r = std::max(r, std::abs(F1[n]));
      if (n > 0) r = std::max({r, std::abs(F2r[n]), std::abs(F2i[n])});
    }
    return r;
  };
  std::vector<double> F1, F2r, F2i;
  detail::residual(b, ph, beta, phi, c1, c2, F1, F2r, F2i);
  double res = res_max(F1, F2r, F2i);
  NewtonReport rep;
  rep.residual_history.push_back(res);
  int it = 0;
  while (res > opt.tol) {
    if (it >= opt.max_iter || !std::isfinite(res)) {
      std::ostringstream os;
      os << "planar Newton residual history:";
      for (double x : rep.residual_history) os << ' ' << x;
      throw Error(ErrorKind::diverged, os.str());
    }
    Eigen::VectorXd F(3 * nn);
    for (std::size_t n = 0; n < nn; ++n) {
      F[n] = F1[n];
      F[nn + n] = F2r[n];
      F[2 * nn + n] = F2i[n];
    }
    const SpMat J = detail::jacobian(b, ph, beta, phi, c1, c2);
    const SpMat A = Pt * J * red.P;
    const Eigen::VectorXd g = Pt * F;
    const Eigen::VectorXd dy = detail::solve(A, -g, &rep.linear_solver);
    const Eigen::VectorXd dx = red.P * dy;
    double lam = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 12; ++ls, lam *= 0.5) {
      std::vector<double> tp(phi), t1(c1), t2(c2);
      for (std::size_t n = 0; n < nn; ++n) {
        tp[n] += lam * dx[n];
        t1[n] += lam * dx[nn + n];
        t2[n] += lam * dx[2 * nn + n];
      }
      std::vector<double> G1, G2r, G2i;
      detail::residual(b, ph, beta, tp, t1, t2, G1, G2r, G2i);
      const double rt = res_max(G1, G2r, G2i);
      if (rt < res) {
        phi.swap(tp);
        c1.swap(t1);
        c2.swap(t2);
        F1.swap(G1);
        F2r.swap(G2r);
        F2i.swap(G2i);
        res = rt;
        accepted = true;
        break;
      }
    }
    ++it;
    rep.residual_history.push_back(res);
    if (!accepted) {
      std::ostringstream os;
      os << "planar Newton line search failed; residual history:";
      for (double x : rep.residual_history) os << ' ' << x;
      throw Error(ErrorKind::diverged, os.str());
    }
  }
  rep.iterations = it;
  PlanarField out = f0;
  for (std::size_t n = 0; n < nn; ++n) {
    out.u[n] = b.U[n] + phi[n];
    out.v1[n] = b.vd1[n] + c1[n];
    out.v2[n] = b.vd2[n] + c2[n];
    rep.max_du = std::max(rep.max_du, std::abs(phi[n]));
  }
  const auto psi = extract_psi(out, 0.5);
  rep.psi_star = grid::norm_star(psi.re, psi.im, grid::WeightedNorms(opt.alpha), 0.5);
  rep.winding = winding_number(out, 2.0);
  rep.zeros_off_center = off_center_zeros(out);
  rep.field = std::move(out);
  return rep;
}

ResidualReport residual_report(const PolygonAnsatz& a, double beta, double alpha) {
  ResidualReport r;
  r.l = a.l;
  r.k = a.k;
  r.beta = beta;
  r.alpha = alpha;
  auto s1 = apply_S1(a.field, beta);
  for (double& x : s1.v) x *= x;
  r.s1_l2 = std::sqrt(grid::quad_disk(s1));
  const auto s2 = apply_S2(a.field, beta);
  r.s2_dstar = grid::norm_dstar(s2.re, s2.im, grid::WeightedNorms(alpha));
  return r;
}

NondegResult check_nondegeneracy(int d, int k, const NondegOptions& opt) {
  if (d < 1 || k < 2) throw Error(ErrorKind::config, "need d ≥ 1 and k ≥ 2");
  const auto mesh = grid::RadialMesh::uniform(opt.r_max, opt.h);
  const auto S = profiles::solve_vortex_on(d, mesh);
  const auto& W = mesh.dual_weights();
  const std::size_t N = mesh.size();
  auto mod = [k](int x) { return ((x % k) + k) % k; };

  NondegResult res;
  res.resonant = predicted_resonant(d, k);
  res.sigma_min = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= opt.m_max; ++m) {
    // Fourier indices d ∓ m survive the rotation condition when ≡ 1 mod k
    const bool has_a = mod(d - m - 1) == 0, has_b = mod(d + m - 1) == 0;
    if (!has_a && !has_b) continue;
    // unknowns: one radial profile per allowed component, nodes 1..N−2 (node 0 too for index 0)
    struct Comp {
      int nu;
      std::size_t first, offset;
    };
    std::vector<Comp> comps;
    std::size_t n = 0;
    for (int c = 0; c < 2; ++c) {
      if ((c == 0 && !has_a) || (c == 1 && !has_b)) continue;
      const int nu = c == 0 ? d - m : d + m;
      const std::size_t first = nu == 0 ? 0 : 1;
      comps.push_back({nu, first, n});
      n += N - 1 - first;
    }
    Triplets t;
    std::vector<double> wt(n);
    for (const Comp& c : comps) {
      const grid::Tridiag L = grid::laplacian_matrix(mesh, c.nu);
      for (std::size_t i = c.first; i + 1 < N; ++i) {
        const std::size_t row = c.offset + i - c.first;
        const double s2 = S.values[i] * S.values[i];
        wt[row] = W[i];
        // symmetric form: rows scaled by the dual weight
        t.emplace_back(row, row, W[i] * (L.di[i] + 1.0 - 2.0 * s2));
        if (i > c.first) t.emplace_back(row, row - 1, W[i] * L.lo[i]);
        if (i + 2 < N) t.emplace_back(row, row + 1, W[i] * L.up[i]);
        for (const Comp& o : comps)
          if (o.offset != c.offset && i >= o.first) t.emplace_back(row, o.offset + i - o.first, -W[i] * s2);
      }
    }
    SpMat K(n, n);
    K.setFromTriplets(t.begin(), t.end());
    // B = W^{-1/2} K W^{-1/2}
    Eigen::VectorXd isq(n);
    for (std::size_t i = 0; i < n; ++i) isq[i] = 1.0 / std::sqrt(wt[i]);
    SpMat B = isq.asDiagonal() * K * isq.asDiagonal();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(B);
    lu.factorize(B);
    if (lu.info() != Eigen::Success) {
      res.sigma_min = 0.0;
      res.m_at_min = m;
      res.coupled_at_min = comps.size() == 2;
      return res;
    }
    Eigen::VectorXd x = Eigen::VectorXd::Ones(n).normalized();
    double lam = 0.0, prev = 0.0;
    for (int itr = 0; itr < 2000; ++itr) {
      Eigen::VectorXd y = lu.solve(x);
      const double nrm = y.norm();
      if (!(nrm > 0.0) || !std::isfinite(nrm)) break;
      x = y / nrm;
      lam = x.dot(B * x);
      if (itr > 5 && std::abs(lam - prev) <= 1e-12 * std::abs(lam)) break;
      prev = lam;
    }
    const double sig = std::abs(lam);
    if (sig < res.sigma_min) {
      res.sigma_min = sig;
      res.m_at_min = m;
      res.coupled_at_min = comps.size() == 2;
    }
  }
  return res;
}

std::string to_csv(const PlanarField& f, double l, double beta) {
  check_field(f);
  const auto& m = *f.mesh;
  nlohmann::json h = {{"k", f.k}, {"d", f.d}, {"l", l}, {"beta", beta},
                      {"rings", m.rings()}, {"m_theta", m.m_theta()}};
  std::ostringstream os;
  os.precision(17);
  os << "# " << h.dump() << "\nr,theta,u,v1,v2\n";
  for (std::size_t n = 0; n < m.size(); ++n)
    os << m.r_of(n) << ',' << m.theta_of(n) << ',' << f.u[n] << ',' << f.v1[n] << ',' << f.v2[n] << '\n';
  return os.str();
}

}  // namespace svlab::planar
