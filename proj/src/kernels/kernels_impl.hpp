#pragma once

// Dispatch table shared by the per-ISA translation units.

namespace akspace::kern {

struct KernelTable {
  void (*axpy)(int, float, const float*, float*);
  void (*axpy_g2)(int, float, const float*, float*);
  void (*axpy_s2)(int, float, const float*, float*);
  float (*dot)(int, const float*, const float*);
  float (*dot_g2)(int, const float*, const float*);
  void (*vadd)(int, const float*, const float*, float*);
  void (*vmul)(int, const float*, const float*, float*);
  void (*vaffine)(int, float, float, const float*, float*);
  void (*vrelu)(int, const float*, float*);
  void (*vlrelu)(int, float, const float*, float*);
  double (*sum_f64)(int, const float*);
  double (*sumsq_f64)(int, const float*);
};

extern const KernelTable kScalarTable;
#if defined(__x86_64__) || defined(__i386__)
extern const KernelTable kAvx2Table;
#endif
#if defined(__aarch64__)
extern const KernelTable kNeonTable;
#endif

}  // namespace akspace::kern
