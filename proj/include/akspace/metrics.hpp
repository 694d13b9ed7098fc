#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "akspace/kspace.hpp"

namespace akspace {

// mean over pixels of the squared complex modulus of the difference
double mse(const ComplexImage& a, const ComplexImage& b);
double mse(const DTensor& a, const DTensor& b);

// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, dynamic range taken from the joint value range so the
// metric stays symmetric in its arguments. Valid-window mean.
double ssim(const DTensor& a, const DTensor& b);

// mean over pixels of |r-x|^2 / (2u) + log(2*pi*u) / 2
double gaussian_nll(const ComplexImage& r, const ComplexImage& x, const DTensor& u);

// Per-row quality targets t_i = exp(-gamma * ||M(r)_i - M(x)_i||^2) computed
// on the complex per-row band maps.
struct TargetScores {
  std::vector<double> t;
};
TargetScores target_scores(const ComplexImage& r, const ComplexImage& x, double gamma);
// Same values computed from the k-space rows directly (the band maps are
// unitary images of the rows); used on hot paths and pinned to the
// map-space route by tests.
TargetScores target_scores_from_kspace(const ComplexImage& yr, const ComplexImage& yx,
                                       double gamma);

double pearson(const std::vector<double>& a, const std::vector<double>& b);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

double median(std::vector<double> v);
double quantile(std::vector<double> v, double q);

using ReconstructFn = std::function<ComplexImage(const ComplexImage& xhat, const SamplingMask&)>;
using MaskFn = std::function<SamplingMask(double kma_level, uint64_t item_seed)>;

struct MseDistribution {
  std::vector<double> kma_levels;
  std::vector<std::vector<double>> values;  // [level][image]
};

// Per-image reconstruction MSE at each sampling level, fresh mask per image.
MseDistribution mse_distribution(const ReconstructFn& reconstruct,
                                 const std::vector<const DTensor*>& images,
                                 const std::vector<double>& kma_levels, const MaskFn& sample_mask,
                                 uint64_t seed);

// columns: kma,image_id,mse
void write_mse_distribution_csv(std::ostream& os, const MseDistribution& d,
                                const std::vector<std::string>& image_ids);

}  // namespace akspace
