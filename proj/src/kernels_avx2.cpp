// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "svlab/kernels.hpp"

namespace svlab::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

inline __m256d vabs(__m256d v) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  return _mm256_and_pd(v, mask);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double dot3(const double* w, const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d wa = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(a + i));
    acc = _mm256_fmadd_pd(wa, _mm256_loadu_pd(b + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

double weighted_sup(const double* wt, const double* a, const double* b, std::size_t n) {
  __m256d m = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = vabs(_mm256_loadu_pd(a + i));
    if (b) v = _mm256_add_pd(v, vabs(_mm256_loadu_pd(b + i)));
    m = _mm256_max_pd(m, _mm256_mul_pd(_mm256_loadu_pd(wt + i), v));
  }
  double r = hmax(m);
  for (; i < n; ++i) {
    double v = std::abs(a[i]);
    if (b) v += std::abs(b[i]);
    r = std::max(r, wt[i] * v);
  }
  return r;
}

void cubic_response(const double* lap, const double* u, const double* s, double beta,
                    double* out, std::size_t n) {
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x = _mm256_loadu_pd(u + i);
    __m256d x2 = _mm256_mul_pd(x, x);
    // x·(x² + β s − 1) + lap
    __m256d t = _mm256_fmadd_pd(vb, _mm256_loadu_pd(s + i), x2);
    t = _mm256_sub_pd(t, _mm256_set1_pd(1.0));
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(x, t, _mm256_loadu_pd(lap + i)));
  }
  for (; i < n; ++i) {
    const double x = u[i];
    out[i] = lap[i] - x + x * x * x + beta * x * s[i];
  }
}

void tridiag_apply(const double* lo, const double* di, const double* up, const double* x,
                   double* y, std::size_t n) {
  if (n < 3) {
    scalar::tridiag_apply(lo, di, up, x, y, n);
    return;
  }
  y[0] = di[0] * x[0] + up[0] * x[1];
  std::size_t i = 1;
  for (; i + 4 < n; i += 4) {
    __m256d acc = _mm256_mul_pd(_mm256_loadu_pd(lo + i), _mm256_loadu_pd(x + i - 1));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(di + i), _mm256_loadu_pd(x + i), acc);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(up + i), _mm256_loadu_pd(x + i + 1), acc);
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i + 1 < n; ++i) y[i] = lo[i] * x[i - 1] + di[i] * x[i] + up[i] * x[i + 1];
  y[n - 1] = lo[n - 1] * x[n - 2] + di[n - 1] * x[n - 1];
}

}  // namespace svlab::kernels::avx2
