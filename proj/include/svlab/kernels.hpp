#pragma once

#include <cstddef>

// Data-parallel inner loops. Every kernel has a scalar reference version and
// an AVX2/FMA version; the public entry points dispatch once at startup.
namespace svlab::kernels {

enum class Isa { scalar, avx2 };

/// ISA picked at first use: AVX2 when the CPU has avx2+fma, unless the
/// environment variable SVLAB_ISA=scalar forces the reference path.
Isa active_isa();
const char* isa_name(Isa isa);
bool cpu_has_avx2();
/// Override the dispatch (tests only; not thread safe).
void force_isa(Isa isa);

double dot(const double* a, const double* b, std::size_t n);
/// Three-term sum Σ w·a·b.
double dot3(const double* w, const double* a, const double* b, std::size_t n);
/// max_i wt[i]·(|a[i]| + |b[i]|); b may be null.
double weighted_sup(const double* wt, const double* a, const double* b, std::size_t n);
/// out = lap − u + u³ + beta·u·s
void cubic_response(const double* lap, const double* u, const double* s, double beta,
                    double* out, std::size_t n);
/// y[i] = lo[i]·x[i−1] + di[i]·x[i] + up[i]·x[i+1]; lo[0] and up[n−1] ignored.
void tridiag_apply(const double* lo, const double* di, const double* up, const double* x,
                   double* y, std::size_t n);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double dot3(const double* w, const double* a, const double* b, std::size_t n);
double weighted_sup(const double* wt, const double* a, const double* b, std::size_t n);
void cubic_response(const double* lap, const double* u, const double* s, double beta,
                    double* out, std::size_t n);
void tridiag_apply(const double* lo, const double* di, const double* up, const double* x,
                   double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double dot3(const double* w, const double* a, const double* b, std::size_t n);
double weighted_sup(const double* wt, const double* a, const double* b, std::size_t n);
void cubic_response(const double* lap, const double* u, const double* s, double beta,
                    double* out, std::size_t n);
void tridiag_apply(const double* lo, const double* di, const double* up, const double* x,
                   double* y, std::size_t n);
}  // namespace avx2

}  // namespace svlab::kernels
