#include "svlab/charge.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "svlab/errors.hpp"

namespace svlab::charge {

namespace {

constexpr double kPi = std::numbers::pi;
using planar::cplx;

struct Vec3 {
  double x, y, z;
};
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
double triple(Vec3 a, Vec3 b, Vec3 c) {
  return a.x * (b.y * c.z - b.z * c.y) + a.y * (b.z * c.x - b.x * c.z) + a.z * (b.x * c.y - b.y * c.x);
}

/// Sphere point at ring i, angle j, with j outside [0, M) reached through the sector rotation.
struct Sampler {
  const grid::SectorMesh& m;
  const NMap& n;
  cplx ph;
  Vec3 operator()(std::size_t i, int j) const {
    if (i == 0) return {n.n1[0], n.n2[0], n.n3[0]};
    const int M = m.m_theta();
    const int q = j >= M ? 1 : (j < 0 ? -1 : 0);
    const std::size_t a = m.index(i, ((j % M) + M) % M);
    Vec3 v{n.n1[a], n.n2[a], n.n3[a]};
    if (q != 0) {
      const cplx r = (q > 0 ? ph : std::conj(ph)) * cplx(v.x, v.y);
      v.x = r.real();
      v.y = r.imag();
    }
    return v;
  }
};

/// Rings 1, 1 + rs, 1 + 2rs, ... and always the outer ring.
std::vector<std::size_t> ring_list(const grid::SectorMesh& m, std::size_t rs) {
  std::vector<std::size_t> rings;
  for (std::size_t i = 1; i < m.rings(); i += rs) rings.push_back(i);
  if (rings.back() != m.rings() - 1) rings.push_back(m.rings() - 1);
  return rings;
}

/// n·(n_r × n_θ) (the density times r) on the listed rings, every ts-th angle.
std::vector<double> polar_integrand(const planar::PlanarField& f, const NMap& n,
                                    const std::vector<std::size_t>& rings, int ts) {
  const auto& m = *f.mesh;
  const auto& rm = m.radial();
  const Sampler node{m, n, f.rotation_phase()};
  const int Ms = m.m_theta() / ts;
  const std::size_t R = rings.size();
  std::vector<double> g(R * Ms, 0.0);
  const double dth = m.dtheta() * ts;
  for (std::size_t a = 0; a < R; ++a) {
    const std::size_t i = rings[a];
    // three-point radial derivative, one-sided at the first and last ring
    const std::size_t c = a == 0 ? 1 : (a + 1 == R ? R - 2 : a);
    const std::size_t i0 = rings[c - 1], i1 = rings[c], i2 = rings[c + 1];
    const double x = rm.r(i), r0 = rm.r(i0), r1 = rm.r(i1), r2 = rm.r(i2);
    const double l0 = ((x - r1) + (x - r2)) / ((r0 - r1) * (r0 - r2));
    const double l1 = ((x - r0) + (x - r2)) / ((r1 - r0) * (r1 - r2));
    const double l2 = ((x - r0) + (x - r1)) / ((r2 - r0) * (r2 - r1));
    for (int b = 0; b < Ms; ++b) {
      const int j = b * ts;
      const Vec3 nr = l0 * node(i0, j) + l1 * node(i1, j) + l2 * node(i2, j);
      const Vec3 nt = (1.0 / (2.0 * dth)) * (node(i, j + ts) - node(i, j - ts));
      g[a * Ms + b] = triple(node(i, j), nr, nt);
    }
  }
  return g;
}

/// Charge inside ring i from its image curve: (1/4π)∮(1 − n₃) dϕ, ϕ = arg(n₁ + in₂).
/// Exact for any map with n₃ > −1 inside the disk, so an unresolved core costs nothing.
double disk_charge(const planar::PlanarField& f, const NMap& n, std::size_t i, int ts) {
  const auto& m = *f.mesh;
  const Sampler node{m, n, f.rotation_phase()};
  double s = 0.0;
  for (int j = 0; j < m.m_theta(); j += ts) {
    const Vec3 a = node(i, j), b = node(i, j + ts);
    const double dphi = std::arg(cplx(b.x, b.y) * std::conj(cplx(a.x, a.y)));
    s += (1.0 - 0.5 * (a.z + b.z)) * dphi;
  }
  return s * m.k() / (4.0 * kPi);
}

/// Core disk plus the trapezoid rule in r and θ over the rings outside it.
double integrate(const planar::PlanarField& f, const NMap& n, std::size_t rs, int ts) {
  const auto& rm = f.mesh->radial();
  const auto rings = ring_list(*f.mesh, rs);
  const auto g = polar_integrand(f, n, rings, ts);
  const int Ms = f.mesh->m_theta() / ts;
  double s = 0.0;
  for (std::size_t a = 0; a < rings.size(); ++a) {
    const double lo = a == 0 ? rm.r(rings[a]) : rm.r(rings[a - 1]);
    const double hi = a + 1 == rings.size() ? rm.r(rings[a]) : rm.r(rings[a + 1]);
    double row = 0.0;
    for (int b = 0; b < Ms; ++b) row += g[a * Ms + b];
    s += 0.5 * (hi - lo) * row;
  }
  return disk_charge(f, n, rings.front(), ts) + s * f.mesh->dtheta() * ts * f.mesh->k() / (4.0 * kPi);
}

}  // namespace

const char* to_string(Method m) { return m == Method::radial_analytic ? "radial_analytic" : "quadrature_2d"; }

NMap build_nmap(const planar::PlanarField& f) {
  const auto& m = *f.mesh;
  NMap n{grid::SectorField(f.mesh), grid::SectorField(f.mesh), grid::SectorField(f.mesh)};
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double a = f.v1[i], b = f.v2[i], c = f.u[i];
    const double s = std::sqrt(a * a + b * b + c * c);
    if (!(s > 0.0)) {
      std::ostringstream os;
      os << "u = v = 0 at r = " << m.r_of(i) << ", theta = " << m.theta_of(i);
      throw Error(ErrorKind::degenerate_point, os.str());
    }
    n.n1[i] = a / s;
    n.n2[i] = b / s;
    n.n3[i] = c / s;
  }
  return n;
}

RadialNMap build_nmap(const radial::CoupledState& st) {
  RadialNMap n;
  n.d = st.f.degree;
  for (std::size_t i = 0; i < st.u.size(); ++i) {
    const double u = st.u[i], f = std::abs(st.f[i]);
    const double s = std::hypot(u, f);
    if (!(s > 0.0)) {
      std::ostringstream os;
      os << "u = f = 0 at r = " << st.u.mesh.r(i);
      throw Error(ErrorKind::degenerate_point, os.str());
    }
    n.sin_phi.push_back(u / s);
    n.cos_phi.push_back(f / s);
  }
  return n;
}

ChargeReport charge_radial(const radial::CoupledState& s) {
  const auto n = build_nmap(s);
  ChargeReport r;
  r.d = n.d;
  r.method = Method::radial_analytic;
  r.r_max = s.u.mesh.r_max();
  r.deficit = 0.5 * n.d * n.sin_phi.back();
  r.Q = 0.5 * n.d * (n.sin_phi.front() - n.sin_phi.back());
  r.quadrature_error = std::abs(r.deficit);
  return r;
}

ChargeReport charge_2d(const planar::PlanarField& f) {
  const auto n = build_nmap(f);
  ChargeReport r;
  r.d = f.d;
  r.method = Method::quadrature_2d;
  r.r_max = f.mesh->radial().r_max();
  // second-order rule on the full and the every-other-node grids, extrapolated
  const double fine = integrate(f, n, 1, 1);
  const double coarse = integrate(f, n, 2, 2);
  r.Q = (4.0 * fine - coarse) / 3.0;
  r.quadrature_error = std::abs(fine - coarse) / 3.0;
  // outer value of sin φ averaged over the last ring
  const auto& m = *f.mesh;
  double s = 0.0;
  for (int j = 0; j < m.m_theta(); ++j) s += n.n3[m.index(m.rings() - 1, j)];
  r.deficit = 0.5 * f.d * s / m.m_theta();
  return r;
}

grid::SectorField charge_density(const planar::PlanarField& f) {
  const auto n = build_nmap(f);
  const auto& m = *f.mesh;
  const auto rings = ring_list(m, 1);
  const auto g = polar_integrand(f, n, rings, 1);
  const int M = m.m_theta();
  grid::SectorField out(f.mesh);
  for (std::size_t a = 0; a < rings.size(); ++a)
    for (int j = 0; j < M; ++j) out[m.index(rings[a], j)] = g[a * M + j] / m.radial().r(rings[a]);
  return out;
}

radial::CoupledState truncate(const radial::CoupledState& s, double R) {
  radial::CoupledState t = s;
  const auto mesh = s.u.mesh.truncated(R);
  t.u.mesh = t.f.mesh = mesh;
  t.u.values.resize(mesh.size());
  t.f.values.resize(mesh.size());
  t.ball_radius = mesh.r_max();
  return t;
}

planar::PlanarField planar_from_radial(const radial::CoupledState& s, int m_theta, int k) {
  auto mesh = std::make_shared<const grid::SectorMesh>(s.u.mesh, m_theta, k);
  planar::PlanarField f;
  f.mesh = mesh;
  f.k = k;
  f.d = s.f.degree;
  f.u = grid::SectorField(mesh);
  f.v1 = grid::SectorField(mesh);
  f.v2 = grid::SectorField(mesh);
  for (std::size_t n = 0; n < mesh->size(); ++n) {
    const std::size_t i = n == 0 ? 0 : 1 + (n - 1) / m_theta;
    const double th = mesh->theta_of(n);
    f.u[n] = s.u[i];
    f.v1[n] = s.f[i] * std::cos(f.d * th);
    f.v2[n] = s.f[i] * std::sin(f.d * th);
  }
  return f;
}

}  // namespace svlab::charge
