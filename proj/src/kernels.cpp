#include <cstdlib>
#include <cstring>

#include "svlab/kernels.hpp"

namespace svlab::kernels {

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*dot3)(const double*, const double*, const double*, std::size_t);
  double (*weighted_sup)(const double*, const double*, const double*, std::size_t);
  void (*cubic_response)(const double*, const double*, const double*, double, double*,
                         std::size_t);
  void (*tridiag_apply)(const double*, const double*, const double*, const double*, double*,
                        std::size_t);
};

constexpr Table kScalar{scalar::dot, scalar::dot3, scalar::weighted_sup, scalar::cubic_response,
                        scalar::tridiag_apply};
constexpr Table kAvx2{avx2::dot, avx2::dot3, avx2::weighted_sup, avx2::cubic_response,
                      avx2::tridiag_apply};

Isa detect() {
  const char* env = std::getenv("SVLAB_ISA");
  if (env && std::strcmp(env, "scalar") == 0) return Isa::scalar;
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

Isa g_isa = detect();
const Table* g_table = g_isa == Isa::avx2 ? &kAvx2 : &kScalar;

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return g_isa; }

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !cpu_has_avx2()) isa = Isa::scalar;
  g_isa = isa;
  g_table = isa == Isa::avx2 ? &kAvx2 : &kScalar;
}

double dot(const double* a, const double* b, std::size_t n) { return g_table->dot(a, b, n); }

double dot3(const double* w, const double* a, const double* b, std::size_t n) {
  return g_table->dot3(w, a, b, n);
}

double weighted_sup(const double* wt, const double* a, const double* b, std::size_t n) {
  return g_table->weighted_sup(wt, a, b, n);
}

void cubic_response(const double* lap, const double* u, const double* s, double beta,
                    double* out, std::size_t n) {
  g_table->cubic_response(lap, u, s, beta, out, n);
}

void tridiag_apply(const double* lo, const double* di, const double* up, const double* x,
                   double* y, std::size_t n) {
  g_table->tridiag_apply(lo, di, up, x, y, n);
}

}  // namespace svlab::kernels
