#include "akspace/fft.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace akspace::fft {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct Plan {
  int n = 0;
  std::vector<int> bitrev;          // radix-2 only
  std::vector<double> tw_re, tw_im; // radix-2: per-stage twiddles; direct: full kernel row
};

Plan make_plan(int n) {
  Plan p;
  p.n = n;
  if (is_pow2(n)) {
    p.bitrev.resize(n);
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < log2n; ++b)
        if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
      p.bitrev[i] = r;
    }
    // twiddles for the forward kernel, half-length per stage, stages concatenated
    p.tw_re.reserve(n);
    p.tw_im.reserve(n);
    for (int len = 2; len <= n; len <<= 1) {
      for (int k = 0; k < len / 2; ++k) {
        double ang = -kTwoPi * k / len;
        p.tw_re.push_back(std::cos(ang));
        p.tw_im.push_back(std::sin(ang));
      }
    }
  } else {
    p.tw_re.resize(n);
    p.tw_im.resize(n);
    for (int k = 0; k < n; ++k) {
      double ang = -kTwoPi * k / n;
      p.tw_re[k] = std::cos(ang);
      p.tw_im[k] = std::sin(ang);
    }
  }
  return p;
}

const Plan& plan_for(int n) {
  thread_local std::unordered_map<int, Plan> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_plan(n)).first;
  return it->second;
}

void radix2(double* re, double* im, int n, bool inverse, const Plan& p) {
  for (int i = 0; i < n; ++i) {
    int j = p.bitrev[i];
    if (j > i) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  int tw_base = 0;
  for (int len = 2; len <= n; len <<= 1) {
    int half = len / 2;
    for (int start = 0; start < n; start += len) {
      for (int k = 0; k < half; ++k) {
        double wr = p.tw_re[tw_base + k];
        double wi = p.tw_im[tw_base + k];
        if (inverse) wi = -wi;
        int a = start + k;
        int b = a + half;
        double tr = re[b] * wr - im[b] * wi;
        double ti = re[b] * wi + im[b] * wr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
      }
    }
    tw_base += half;
  }
}

void direct(double* re, double* im, int n, bool inverse, const Plan& p) {
  std::vector<double> or_(n), oi(n);
  for (int k = 0; k < n; ++k) {
    double sr = 0, si = 0;
    for (int j = 0; j < n; ++j) {
      int64_t idx = (static_cast<int64_t>(j) * k) % n;
      double wr = p.tw_re[idx];
      double wi = inverse ? -p.tw_im[idx] : p.tw_im[idx];
      sr += re[j] * wr - im[j] * wi;
      si += re[j] * wi + im[j] * wr;
    }
    or_[k] = sr;
    oi[k] = si;
  }
  for (int k = 0; k < n; ++k) {
    re[k] = or_[k];
    im[k] = oi[k];
  }
}

}  // namespace

void transform(double* re, double* im, int n, bool inverse) {
  if (n <= 0) throw std::invalid_argument("transform length must be positive");
  if (n == 1) return;
  const Plan& p = plan_for(n);
  if (is_pow2(n))
    radix2(re, im, n, inverse, p);
  else
    direct(re, im, n, inverse, p);
}

void dft2_planes(double* re, double* im, int n, bool inverse) {
  for (int i = 0; i < n; ++i) transform(re + static_cast<size_t>(i) * n, im + static_cast<size_t>(i) * n, n, inverse);
  std::vector<double> cr(n), ci(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      cr[i] = re[static_cast<size_t>(i) * n + j];
      ci[i] = im[static_cast<size_t>(i) * n + j];
    }
    transform(cr.data(), ci.data(), n, inverse);
    for (int i = 0; i < n; ++i) {
      re[static_cast<size_t>(i) * n + j] = cr[i];
      im[static_cast<size_t>(i) * n + j] = ci[i];
    }
  }
  double s = 1.0 / n;
  int64_t total = static_cast<int64_t>(n) * n;
  for (int64_t i = 0; i < total; ++i) {
    re[i] *= s;
    im[i] *= s;
  }
}

}  // namespace akspace::fft
