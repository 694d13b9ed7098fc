#include "akspace/kernels.hpp"
#include "kernels_impl.hpp"

namespace akspace::kern {
namespace {

void s_axpy(int n, float a, const float* x, float* y) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

void s_axpy_g2(int n, float a, const float* x, float* y) {
  for (int i = 0; i < n; ++i) y[i] += a * x[2 * i];
}

void s_axpy_s2(int n, float a, const float* x, float* y) {
  for (int i = 0; i < n; ++i) y[2 * i] += a * x[i];
}

float s_dot(int n, const float* x, const float* y) {
  float s = 0.f;
  for (int i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

float s_dot_g2(int n, const float* x, const float* y) {
  float s = 0.f;
  for (int i = 0; i < n; ++i) s += x[i] * y[2 * i];
  return s;
}

void s_vadd(int n, const float* x, const float* y, float* z) {
  for (int i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

void s_vmul(int n, const float* x, const float* y, float* z) {
  for (int i = 0; i < n; ++i) z[i] = x[i] * y[i];
}

void s_vaffine(int n, float a, float b, const float* x, float* y) {
  for (int i = 0; i < n; ++i) y[i] = a * x[i] + b;
}

void s_vrelu(int n, const float* x, float* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void s_vlrelu(int n, float slope, const float* x, float* y) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : slope * x[i];
}

double s_sum_f64(int n, const float* x) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

double s_sumsq_f64(int n, const float* x) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = static_cast<double>(x[i]);
    s += v * v;
  }
  return s;
}

}  // namespace

const KernelTable kScalarTable = {s_axpy, s_axpy_g2, s_axpy_s2, s_dot,   s_dot_g2,   s_vadd,
                                  s_vmul, s_vaffine, s_vrelu,   s_vlrelu, s_sum_f64, s_sumsq_f64};

}  // namespace akspace::kern
