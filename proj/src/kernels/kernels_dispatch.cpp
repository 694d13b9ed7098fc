#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "akspace/kernels.hpp"
#include "kernels_impl.hpp"

namespace akspace::kern {
namespace {

Isa detect() {
  const char* env = std::getenv("AKSPACE_ISA");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Isa::kScalar;
    if (std::strcmp(env, "avx2") == 0 && isa_supported(Isa::kAvx2)) return Isa::kAvx2;
    if (std::strcmp(env, "neon") == 0 && isa_supported(Isa::kNeon)) return Isa::kNeon;
    return Isa::kScalar;
  }
  if (isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_supported(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
#if defined(__x86_64__) || defined(__i386__)
    case Isa::kAvx2:
      return &kAvx2Table;
#endif
#if defined(__aarch64__)
    case Isa::kNeon:
      return &kNeonTable;
#endif
    default:
      return &kScalarTable;
  }
}

struct State {
  Isa isa;
  const KernelTable* tbl;
  State() : isa(detect()), tbl(table_for(isa)) {}
};

State& state() {
  static State s;
  return s;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(__i386__)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return state().isa; }

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "?";
}

void force_isa(Isa isa) {
  if (!isa_supported(isa)) throw std::runtime_error("instruction set not supported on this host");
  state().isa = isa;
  state().tbl = table_for(isa);
}

void axpy(int n, float a, const float* x, float* y) { state().tbl->axpy(n, a, x, y); }
void axpy_g2(int n, float a, const float* x, float* y) { state().tbl->axpy_g2(n, a, x, y); }
void axpy_s2(int n, float a, const float* x, float* y) { state().tbl->axpy_s2(n, a, x, y); }
float dot(int n, const float* x, const float* y) { return state().tbl->dot(n, x, y); }
float dot_g2(int n, const float* x, const float* y) { return state().tbl->dot_g2(n, x, y); }
void vadd(int n, const float* x, const float* y, float* z) { state().tbl->vadd(n, x, y, z); }
void vmul(int n, const float* x, const float* y, float* z) { state().tbl->vmul(n, x, y, z); }
void vaffine(int n, float a, float b, const float* x, float* y) {
  state().tbl->vaffine(n, a, b, x, y);
}
void vrelu(int n, const float* x, float* y) { state().tbl->vrelu(n, x, y); }
void vlrelu(int n, float slope, const float* x, float* y) { state().tbl->vlrelu(n, slope, x, y); }
double sum_f64(int n, const float* x) { return state().tbl->sum_f64(n, x); }
double sumsq_f64(int n, const float* x) { return state().tbl->sumsq_f64(n, x); }

}  // namespace akspace::kern
