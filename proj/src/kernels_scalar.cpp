#include <algorithm>
#include <cmath>

#include "svlab/kernels.hpp"

namespace svlab::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3(const double* w, const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

double weighted_sup(const double* wt, const double* a, const double* b, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = std::abs(a[i]);
    if (b) v += std::abs(b[i]);
    m = std::max(m, wt[i] * v);
  }
  return m;
}

void cubic_response(const double* lap, const double* u, const double* s, double beta,
                    double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = u[i];
    out[i] = lap[i] - x + x * x * x + beta * x * s[i];
  }
}

void tridiag_apply(const double* lo, const double* di, const double* up, const double* x,
                   double* y, std::size_t n) {
  if (n == 0) return;
  if (n == 1) {
    y[0] = di[0] * x[0];
    return;
  }
  y[0] = di[0] * x[0] + up[0] * x[1];
  for (std::size_t i = 1; i + 1 < n; ++i) y[i] = lo[i] * x[i - 1] + di[i] * x[i] + up[i] * x[i + 1];
  y[n - 1] = lo[n - 1] * x[n - 2] + di[n - 1] * x[n - 1];
}

}  // namespace svlab::kernels::scalar
