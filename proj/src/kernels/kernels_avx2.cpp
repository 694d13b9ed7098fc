#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include "akspace/kernels.hpp"
#include "kernels_impl.hpp"

// Compiled with -mavx2 -mfma; only reached through the runtime dispatcher
// after a cpuid check.

namespace akspace::kern {
namespace {

inline __m256i even_idx() { return _mm256_setr_epi32(0, 1, 4, 5, 2, 3, 6, 7); }

// even-index elements of x[0..15] in order
inline __m256 deinterleave_even(__m256 a, __m256 b) {
  __m256 t = _mm256_shuffle_ps(a, b, _MM_SHUFFLE(2, 0, 2, 0));
  return _mm256_permutevar8x32_ps(t, even_idx());
}

inline __m256 deinterleave_odd(__m256 a, __m256 b) {
  __m256 t = _mm256_shuffle_ps(a, b, _MM_SHUFFLE(3, 1, 3, 1));
  return _mm256_permutevar8x32_ps(t, even_idx());
}

inline void interleave(__m256 e, __m256 o, __m256& lo, __m256& hi) {
  __m256 u = _mm256_unpacklo_ps(e, o);
  __m256 v = _mm256_unpackhi_ps(e, o);
  lo = _mm256_permute2f128_ps(u, v, 0x20);
  hi = _mm256_permute2f128_ps(u, v, 0x31);
}

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
  return _mm_cvtss_f32(s);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

void a_axpy(int n, float a, const float* x, float* y) {
  __m256 va = _mm256_set1_ps(a);
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void a_axpy_g2(int n, float a, const float* x, float* y) {
  __m256 va = _mm256_set1_ps(a);
  int i = 0;
  for (; i + 9 <= n; i += 8) {
    __m256 xa = _mm256_loadu_ps(x + 2 * i);
    __m256 xb = _mm256_loadu_ps(x + 2 * i + 8);
    __m256 xe = deinterleave_even(xa, xb);
    __m256 vy = _mm256_loadu_ps(y + i);
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, xe, vy));
  }
  for (; i < n; ++i) y[i] += a * x[2 * i];
}

void a_axpy_s2(int n, float a, const float* x, float* y) {
  __m256 va = _mm256_set1_ps(a);
  int i = 0;
  for (; i + 9 <= n; i += 8) {
    __m256 ya = _mm256_loadu_ps(y + 2 * i);
    __m256 yb = _mm256_loadu_ps(y + 2 * i + 8);
    __m256 ye = deinterleave_even(ya, yb);
    __m256 yo = deinterleave_odd(ya, yb);
    ye = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), ye);
    __m256 lo, hi;
    interleave(ye, yo, lo, hi);
    _mm256_storeu_ps(y + 2 * i, lo);
    _mm256_storeu_ps(y + 2 * i + 8, hi);
  }
  for (; i < n; ++i) y[2 * i] += a * x[i];
}

float a_dot(int n, const float* x, const float* y) {
  __m256 acc = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8)
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
  float s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

float a_dot_g2(int n, const float* x, const float* y) {
  __m256 acc = _mm256_setzero_ps();
  int i = 0;
  for (; i + 9 <= n; i += 8) {
    __m256 ya = _mm256_loadu_ps(y + 2 * i);
    __m256 yb = _mm256_loadu_ps(y + 2 * i + 8);
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), deinterleave_even(ya, yb), acc);
  }
  float s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[2 * i];
  return s;
}

void a_vadd(int n, const float* x, const float* y, float* z) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(z + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) z[i] = x[i] + y[i];
}

void a_vmul(int n, const float* x, const float* y, float* z) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(z + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) z[i] = x[i] * y[i];
}

void a_vaffine(int n, float a, float b, const float* x, float* y) {
  __m256 va = _mm256_set1_ps(a);
  __m256 vb = _mm256_set1_ps(b);
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vb));
  for (; i < n; ++i) y[i] = a * x[i] + b;
}

void a_vrelu(int n, const float* x, float* y) {
  __m256 z = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), z));
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : 0.f;
}

void a_vlrelu(int n, float slope, const float* x, float* y) {
  __m256 vs = _mm256_set1_ps(slope);
  __m256 z = _mm256_setzero_ps();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    __m256 neg = _mm256_mul_ps(vs, v);
    __m256 mask = _mm256_cmp_ps(v, z, _CMP_GT_OQ);
    _mm256_storeu_ps(y + i, _mm256_blendv_ps(neg, v, mask));
  }
  for (; i < n; ++i) y[i] = x[i] > 0.f ? x[i] : slope * x[i];
}

double a_sum_f64(int n, const float* x) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m128 lo = _mm_loadu_ps(x + i);
    __m128 hi = _mm_loadu_ps(x + i + 4);
    acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(lo));
    acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(hi));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

double a_sumsq_f64(int n, const float* x) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d lo = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
    __m256d hi = _mm256_cvtps_pd(_mm_loadu_ps(x + i + 4));
    acc0 = _mm256_fmadd_pd(lo, lo, acc0);
    acc1 = _mm256_fmadd_pd(hi, hi, acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    double v = static_cast<double>(x[i]);
    s += v * v;
  }
  return s;
}

}  // namespace

const KernelTable kAvx2Table = {a_axpy, a_axpy_g2, a_axpy_s2, a_dot,    a_dot_g2,   a_vadd,
                                a_vmul, a_vaffine, a_vrelu,   a_vlrelu, a_sum_f64, a_sumsq_f64};

}  // namespace akspace::kern

#endif
