#include "svlab/radial_ops.hpp"

#include <array>
#include <cmath>

#include "svlab/errors.hpp"
#include "svlab/kernels.hpp"

namespace svlab::grid {

std::vector<double> Tridiag::apply(const std::vector<double>& x) const {
  std::vector<double> y(di.size());
  kernels::tridiag_apply(lo.data(), di.data(), up.data(), x.data(), y.data(), di.size());
  return y;
}

Tridiag laplacian_matrix(const RadialMesh& mesh, int d) {
  const std::size_t n = mesh.size();
  if (n < 3) throw Error(ErrorKind::invalid_mesh, "radial operator needs at least 3 nodes");
  Tridiag t;
  t.lo.assign(n, 0.0);
  t.di.assign(n, 0.0);
  t.up.assign(n, 0.0);
  const auto& W = mesh.dual_weights();
  const double d2 = static_cast<double>(d) * d;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (i == 0 && d != 0) continue;
    const double fr = mesh.mid(i) / mesh.h(i);
    double diag = -fr;
    t.up[i] = fr / W[i];
    if (i > 0) {
      const double fl = mesh.mid(i - 1) / mesh.h(i - 1);
      t.lo[i] = fl / W[i];
      diag -= fl;
    }
    t.di[i] = diag / W[i];
    if (i > 0) t.di[i] -= d2 / (mesh.r(i) * mesh.r(i));
  }
  return t;
}

std::vector<double> radial_laplacian(const RadialMesh& mesh, const std::vector<double>& f, int d) {
  if (mesh.size() < 3) throw Error(ErrorKind::invalid_mesh, "radial operator needs at least 3 nodes");
  if (f.size() != mesh.size()) throw Error(ErrorKind::mesh_mismatch, "profile length differs from mesh");
  return laplacian_matrix(mesh, d).apply(f);
}

std::vector<double> derivative(const RadialMesh& mesh, const std::vector<double>& f) {
  const std::size_t n = mesh.size();
  if (n < 3) throw Error(ErrorKind::invalid_mesh, "derivative needs at least 3 nodes");
  std::vector<double> g(n);
  auto three = [&](std::size_t a, std::size_t b, std::size_t c, double x) {
    // derivative at x of the quadratic through (r_a, r_b, r_c)
    const double ra = mesh.r(a), rb = mesh.r(b), rc = mesh.r(c);
    const double la = ((x - rb) + (x - rc)) / ((ra - rb) * (ra - rc));
    const double lb = ((x - ra) + (x - rc)) / ((rb - ra) * (rb - rc));
    const double lc = ((x - ra) + (x - rb)) / ((rc - ra) * (rc - rb));
    return la * f[a] + lb * f[b] + lc * f[c];
  };
  g[0] = three(0, 1, 2, mesh.r(0));
  for (std::size_t i = 1; i + 1 < n; ++i) g[i] = three(i - 1, i, i + 1, mesh.r(i));
  g[n - 1] = three(n - 3, n - 2, n - 1, mesh.r(n - 1));
  return g;
}

namespace {

std::vector<double> pair_weights(const RadialMesh& mesh, bool with_r) {
  const std::size_t n = mesh.size();
  std::vector<double> w(n, 0.0);
  // 3-point Gauss-Legendre on [-1, 1]
  const std::array<double, 3> gx{-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const std::array<double, 3> gw{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  std::size_t i = 0;
  for (; i + 2 < n; i += 2) {
    const double a = mesh.r(i), b = mesh.r(i + 1), c = mesh.r(i + 2);
    const double half = 0.5 * (c - a), ctr = 0.5 * (a + c);
    for (int q = 0; q < 3; ++q) {
      const double x = ctr + half * gx[q];
      const double rho = with_r ? x : 1.0;
      const double s = half * gw[q] * rho;
      w[i] += s * (x - b) * (x - c) / ((a - b) * (a - c));
      w[i + 1] += s * (x - a) * (x - c) / ((b - a) * (b - c));
      w[i + 2] += s * (x - a) * (x - b) / ((c - a) * (c - b));
    }
  }
  if (i + 1 < n) {
    // odd cell count: linear rule on the last cell
    const double a = mesh.r(i), b = mesh.r(i + 1), h = b - a;
    if (with_r) {
      w[i] += h * (2.0 * a + b) / 6.0;
      w[i + 1] += h * (a + 2.0 * b) / 6.0;
    } else {
      w[i] += 0.5 * h;
      w[i + 1] += 0.5 * h;
    }
  }
  return w;
}

}  // namespace

std::vector<double> weights_rdr(const RadialMesh& mesh) { return pair_weights(mesh, true); }
std::vector<double> weights_dr(const RadialMesh& mesh) { return pair_weights(mesh, false); }

}  // namespace svlab::grid
