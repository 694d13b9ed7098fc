#if defined(__aarch64__)

#include <arm_neon.h>

#include "akspace/kernels.hpp"
#include "kernels_impl.hpp"

namespace akspace::kern {
namespace {

inline float hsum(float32x4_t v) { return vaddvq_f32(v); }

void n_axpy(int n, float a, const float* x, float* y) {
  float32x4_t va = vdupq_n_f32(a);
  int i = 0;
  for (; i + 4 <= n; i += 4)
    vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void n_axpy_g2(int n, float a, const float* x, float* y) {
  float32x4_t va = vdupq_n_f32(a);
  int i = 0;
  for (; i + 5 <= n; i += 4) {
    float32x4x2_t xs = vld2q_f32(x + 2 * i);
    vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, xs.val[0]));
  }
  for (; i < n; ++i) y[i] += a * x[2 * i];
}

void n_axpy_s2(int n, float a, const float* x, float* y) {
  float32x4_t va = vdupq_n_f32(a);
  int i = 0;
  for (; i + 5 <= n; i += 4) {
    float32x4x2_t ys = vld2q_f32(y + 2 * i);
    ys.val[0] = vfmaq_f32(ys.val[0], va, vld1q_f32(x + i));
    vst2q_f32(y + 2 * i, ys);
  }
  for (; i < n; ++i) y[2 * i] += a * x[i];
}

float n_dot(int n, const float* x, const float* y) {
  float32x4_t acc = vdupq_n_f32(0.f);
  int i = 0;
  for (; i + 4 <= n; i += 4) acc = vfmaq_f32(acc, vld1q_f32(x + i), vld1q_f32(y + i));
  float s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

float n_dot_g2(int n, const float* x, const float* y) {
  float32x4_t acc = vdupq_n_f32(0.f);
  int i = 0;
  for (; i + 5 <= n; i += 4) {
    float32x4x2_t ys = vld2q_f32(y + 2 * i);
    acc = vfmaq_f32(acc, vld1q_f32(x + i), ys.val[0]);
  }
  float s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[2 * i];
  return s;
}

void n_vadd(int n, const float* x, const float* y, float* z) {
  int i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(z + i, vaddq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
  for (; i < n; ++i) z[i] = x[i] + y[i];
}

void n_vmul(int n, const float* x, const float* y, float* z) {
  int i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(z + i, vmulq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
  for (; i < n; ++i) z[i] = x[i] * y[i];
}

void n_vaffine(int n, float a, float b, const float* x, float* y) {
  float32x4_t va = vdupq_n_f32(a);
  float32x4_t vb = vdupq_n_f32(b);
  int i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_f32(vb, va, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] = a * x[i] + b;
}

void n_vrelu(int n, const float* x, float* y) {
  float32x4_t z = vdupq_n_f32(0.f);
  int i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmaxq_f32(vld1q_f32(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void n_vlrelu(int n, float slope, const float* x, float* y) {
  float32x4_t vs = vdupq_n_f32(slope);
  float32x4_t z = vdupq_n_f32(0.f);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t v = vld1q_f32(x + i);
    uint32x4_t m = vcgtq_f32(v, z);
    vst1q_f32(y + i, vbslq_f32(m, v, vmulq_f32(vs, v)));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : slope * x[i];
}

double n_sum_f64(int n, const float* x) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t v = vld1q_f32(x + i);
    acc0 = vaddq_f64(acc0, vcvt_f64_f32(vget_low_f32(v)));
    acc1 = vaddq_f64(acc1, vcvt_f64_f32(vget_high_f32(v)));
  }
  double s = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

double n_sumsq_f64(int n, const float* x) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    float32x4_t v = vld1q_f32(x + i);
    float64x2_t lo = vcvt_f64_f32(vget_low_f32(v));
    float64x2_t hi = vcvt_f64_f32(vget_high_f32(v));
    acc0 = vfmaq_f64(acc0, lo, lo);
    acc1 = vfmaq_f64(acc1, hi, hi);
  }
  double s = vaddvq_f64(acc0) + vaddvq_f64(acc1);
  for (; i < n; ++i) {
    double v = static_cast<double>(x[i]);
    s += v * v;
  }
  return s;
}

}  // namespace

const KernelTable kNeonTable = {n_axpy, n_axpy_g2, n_axpy_s2, n_dot,    n_dot_g2,   n_vadd,
                                n_vmul, n_vaffine, n_vrelu,   n_vlrelu, n_sum_f64, n_sumsq_f64};

}  // namespace akspace::kern

#endif
