#pragma once

#include <string>

// Inner-loop kernels used by the compute graph. Float entry points dispatch
// at runtime to the best instruction set the host supports; the scalar build
// is the reference and every SIMD variant is equivalence-tested against it.
// Double overloads are plain scalar loops and exist for the high-precision
// instantiation of the graph used in derivative checks.

namespace akspace::kern {

enum class Isa { kScalar, kAvx2, kNeon };

Isa active_isa();
const char* isa_name(Isa isa);
// Test hook. Throws if the host cannot run the requested set.
void force_isa(Isa isa);
bool isa_supported(Isa isa);

// y[i] += a * x[i]
void axpy(int n, float a, const float* x, float* y);
// y[i] += a * x[2i]
void axpy_g2(int n, float a, const float* x, float* y);
// y[2i] += a * x[i]
void axpy_s2(int n, float a, const float* x, float* y);
// sum_i x[i] * y[i]
float dot(int n, const float* x, const float* y);
// sum_i x[i] * y[2i]
float dot_g2(int n, const float* x, const float* y);
// z[i] = x[i] + y[i]
void vadd(int n, const float* x, const float* y, float* z);
// z[i] = x[i] * y[i]
void vmul(int n, const float* x, const float* y, float* z);
// y[i] = a * x[i] + b
void vaffine(int n, float a, float b, const float* x, float* y);
// y[i] = max(x[i], 0)
void vrelu(int n, const float* x, float* y);
// y[i] = x[i] > 0 ? x[i] : slope * x[i]
void vlrelu(int n, float slope, const float* x, float* y);
// double-accumulated reductions (normalization statistics)
double sum_f64(int n, const float* x);
double sumsq_f64(int n, const float* x);

// scalar double overloads
inline void axpy(int n, double a, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}
inline void axpy_g2(int n, double a, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += a * x[2 * i];
}
inline void axpy_s2(int n, double a, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[2 * i] += a * x[i];
}
inline double dot(int n, const double* x, const double* y) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}
inline double dot_g2(int n, const double* x, const double* y) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += x[i] * y[2 * i];
  return s;
}
inline void vadd(int n, const double* x, const double* y, double* z) {
  for (int i = 0; i < n; ++i) z[i] = x[i] + y[i];
}
inline void vmul(int n, const double* x, const double* y, double* z) {
  for (int i = 0; i < n; ++i) z[i] = x[i] * y[i];
}
inline void vaffine(int n, double a, double b, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = a * x[i] + b;
}
inline void vrelu(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0 ? x[i] : 0;
}
inline void vlrelu(int n, double slope, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0 ? x[i] : slope * x[i];
}
inline double sum_f64(int n, const double* x) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += x[i];
  return s;
}
inline double sumsq_f64(int n, const double* x) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

}  // namespace akspace::kern
