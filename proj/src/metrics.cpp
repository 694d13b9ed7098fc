#include "akspace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "akspace/csv.hpp"
#include "akspace/rng.hpp"

namespace akspace {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

void check_same_n(int a, int b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": size mismatch");
}

}  // namespace

double mse(const ComplexImage& a, const ComplexImage& b) {
  check_same_n(a.n(), b.n(), "mse");
  int n = a.n();
  double s = 0.0;
  const double* ar = a.re_data();
  const double* ai = a.im_data();
  const double* br = b.re_data();
  const double* bi = b.im_data();
  int64_t total = static_cast<int64_t>(n) * n;
  for (int64_t i = 0; i < total; ++i) {
    double dr = ar[i] - br[i];
    double di = ai[i] - bi[i];
    s += dr * dr + di * di;
  }
  return s / static_cast<double>(total);
}

double mse(const DTensor& a, const DTensor& b) {
  if (a.dims != b.dims) throw std::invalid_argument("mse: shape mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

double ssim(const DTensor& a, const DTensor& b) {
  if (a.dims != b.dims) throw std::invalid_argument("ssim: shape mismatch");
  if (a.rank() != 2) throw std::invalid_argument("ssim: rank-2 grids expected");
  int h = a.dims[0], w = a.dims[1];
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kK1 = 0.01, kK2 = 0.03;
  if (h < kWin || w < kWin) throw std::invalid_argument("ssim: image smaller than window");

  double g1[kWin];
  double gsum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    double d = i - (kWin - 1) / 2.0;
    g1[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    gsum += g1[i];
  }
  for (int i = 0; i < kWin; ++i) g1[i] /= gsum;

  double amin = a[0], amax = a[0];
  for (int64_t i = 0; i < a.numel(); ++i) {
    amin = std::min({amin, a[i], b[i]});
    amax = std::max({amax, a[i], b[i]});
  }
  double range = amax - amin;
  if (range < 1e-12) range = 1e-12;
  double c1 = kK1 * range * kK1 * range;
  double c2 = kK2 * range * kK2 * range;

  double acc = 0.0;
  int count = 0;
  for (int ci = 0; ci + kWin <= h; ++ci) {
    for (int cj = 0; cj + kWin <= w; ++cj) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
          double wgt = g1[i] * g1[j];
          double va = a.at(ci + i, cj + j);
          double vb = b.at(ci + i, cj + j);
          ma += wgt * va;
          mb += wgt * vb;
          saa += wgt * va * va;
          sbb += wgt * vb * vb;
          sab += wgt * va * vb;
        }
      }
      double vaa = saa - ma * ma;
      double vbb = sbb - mb * mb;
      double vab = sab - ma * mb;
      double num = (2.0 * ma * mb + c1) * (2.0 * vab + c2);
      double den = (ma * ma + mb * mb + c1) * (vaa + vbb + c2);
      acc += num / den;
      ++count;
    }
  }
  return acc / count;
}

double gaussian_nll(const ComplexImage& r, const ComplexImage& x, const DTensor& u) {
  check_same_n(r.n(), x.n(), "gaussian_nll");
  if (u.rank() != 2 || u.dims[0] != r.n() || u.dims[1] != r.n())
    throw std::invalid_argument("gaussian_nll: uncertainty grid size mismatch");
  int64_t total = static_cast<int64_t>(r.n()) * r.n();
  const double* rr = r.re_data();
  const double* ri = r.im_data();
  const double* xr = x.re_data();
  const double* xi = x.im_data();
  double s = 0.0;
  for (int64_t i = 0; i < total; ++i) {
    double uv = u[i];
    if (!(uv > 0.0)) throw std::invalid_argument("gaussian_nll: uncertainty must be positive");
    double dr = rr[i] - xr[i];
    double di = ri[i] - xi[i];
    s += (dr * dr + di * di) / (2.0 * uv) + 0.5 * std::log(uv) + kHalfLog2Pi;
  }
  return s / static_cast<double>(total);
}

TargetScores target_scores(const ComplexImage& r, const ComplexImage& x, double gamma) {
  check_same_n(r.n(), x.n(), "target_scores");
  std::vector<ComplexImage> mr = spectral_decompose_complex(r);
  std::vector<ComplexImage> mx = spectral_decompose_complex(x);
  int n = r.n();
  TargetScores out;
  out.t.resize(static_cast<size_t>(n));
  int64_t total = static_cast<int64_t>(n) * n;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    const double* ar = mr[static_cast<size_t>(i)].re_data();
    const double* ai = mr[static_cast<size_t>(i)].im_data();
    const double* br = mx[static_cast<size_t>(i)].re_data();
    const double* bi = mx[static_cast<size_t>(i)].im_data();
    for (int64_t k = 0; k < total; ++k) {
      double dr = ar[k] - br[k];
      double di = ai[k] - bi[k];
      s += dr * dr + di * di;
    }
    out.t[static_cast<size_t>(i)] = std::exp(-gamma * s);
  }
  return out;
}

TargetScores target_scores_from_kspace(const ComplexImage& yr, const ComplexImage& yx,
                                       double gamma) {
  check_same_n(yr.n(), yx.n(), "target_scores");
  int n = yr.n();
  TargetScores out;
  out.t.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      double dr = yr.re(i, j) - yx.re(i, j);
      double di = yr.im(i, j) - yx.im(i, j);
      s += dr * dr + di * di;
    }
    out.t[static_cast<size_t>(i)] = std::exp(-gamma * s);
  }
  return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  size_t n = a.size();
  if (n < 2) throw std::invalid_argument("pearson: need at least two samples");
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double saa = 0, sbb = 0, sab = 0;
  for (size_t i = 0; i < n; ++i) {
    double da = a[i] - ma;
    double db = b[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw std::invalid_argument("pearson: zero variance");
  return sab / std::sqrt(saa * sbb);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  size_t n = v.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(average_ranks(a), average_ranks(b));
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q out of range");
  std::sort(v.begin(), v.end());
  double pos = q * (static_cast<double>(v.size()) - 1.0);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

MseDistribution mse_distribution(const ReconstructFn& reconstruct,
                                 const std::vector<const DTensor*>& images,
                                 const std::vector<double>& kma_levels, const MaskFn& sample_mask,
                                 uint64_t seed) {
  if (images.empty()) throw std::invalid_argument("mse_distribution: no images");
  for (double level : kma_levels)
    if (!(level > 0.0) || level > 1.0)
      throw std::invalid_argument("mse_distribution: sampling level outside (0, 1]");
  MseDistribution out;
  out.kma_levels = kma_levels;
  out.values.resize(kma_levels.size());
  for (size_t li = 0; li < kma_levels.size(); ++li) {
    out.values[li].resize(images.size());
    for (size_t ii = 0; ii < images.size(); ++ii) {
      uint64_t item_seed = Rng::mix(seed, li * 1000003ull + ii);
      SamplingMask mask = sample_mask(kma_levels[li], item_seed);
      ComplexImage truth = ComplexImage::from_real(*images[ii], Domain::kImage);
      ComplexImage y = simulate_kspace(*images[ii]);
      ComplexImage xhat = zero_fill(apply_mask(y, mask));
      ComplexImage r = reconstruct(xhat, mask);
      out.values[li][ii] = mse(r, truth);
    }
  }
  return out;
}

void write_mse_distribution_csv(std::ostream& os, const MseDistribution& d,
                                const std::vector<std::string>& image_ids) {
  os << "kma,image_id,mse\n";
  for (size_t li = 0; li < d.kma_levels.size(); ++li) {
    for (size_t ii = 0; ii < d.values[li].size(); ++ii) {
      os << fmt_g(d.kma_levels[li]) << ',' << image_ids[ii] << ',' << fmt_g(d.values[li][ii])
         << '\n';
    }
  }
}

}  // namespace akspace
