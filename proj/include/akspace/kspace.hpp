#pragma once

#include <cstdint>
#include <vector>

#include "akspace/tensor.hpp"

namespace akspace {

enum class Domain { kImage, kKspace };

// Square complex grid with a domain tag. Frequencies are unshifted: row 0 is
// DC and rows near 0 and N-1 are low frequencies.
class ComplexImage {
 public:
  ComplexImage(int n, Domain domain);

  static ComplexImage from_real(const DTensor& grid, Domain domain);

  int n() const { return n_; }
  Domain domain() const { return domain_; }

  double re(int i, int j) const { return re_[static_cast<size_t>(i) * n_ + j]; }
  double im(int i, int j) const { return im_[static_cast<size_t>(i) * n_ + j]; }
  void set(int i, int j, double re, double im) {
    re_[static_cast<size_t>(i) * n_ + j] = re;
    im_[static_cast<size_t>(i) * n_ + j] = im;
  }

  double* re_data() { return re_.data(); }
  double* im_data() { return im_.data(); }
  const double* re_data() const { return re_.data(); }
  const double* im_data() const { return im_.data(); }

  DTensor real_grid() const;
  DTensor imag_grid() const;
  DTensor magnitude_grid() const;

  bool all_finite() const;

 private:
  int n_;
  Domain domain_;
  std::vector<double> re_, im_;
};

// Row-wise Cartesian sampling pattern.
struct SamplingMask {
  std::vector<uint8_t> observed;

  SamplingMask() = default;
  explicit SamplingMask(int n) : observed(static_cast<size_t>(n), 0) {}

  int n() const { return static_cast<int>(observed.size()); }
  bool is_observed(int i) const { return observed[static_cast<size_t>(i)] != 0; }
  void observe(int i) { observed[static_cast<size_t>(i)] = 1; }
  int count_observed() const;
  bool is_symmetric() const;
  bool operator==(const SamplingMask& o) const { return observed == o.observed; }
};

// N realified magnitude maps, one per k-space row.
struct SpectralMapStack {
  std::vector<DTensor> maps;
  int n() const { return static_cast<int>(maps.size()); }
};

// Unitary transforms (1/sqrt(N) per axis, so 1/N per full pass each way).
ComplexImage dft2(const ComplexImage& img);
ComplexImage idft2(const ComplexImage& ksp);

// Embed a real grid and take it to k-space.
ComplexImage simulate_kspace(const DTensor& grid);

// Zero the unobserved rows.
ComplexImage apply_mask(const ComplexImage& ksp, const SamplingMask& mask);

// Direct inverse reconstruction of (masked) k-space.
ComplexImage zero_fill(const ComplexImage& ksp);

// Noiseless hard data consistency:
// r = idft2((1-S) .* dft2(f_out) + S .* dft2(xhat))
ComplexImage data_consistency(const ComplexImage& f_out, const ComplexImage& xhat,
                              const SamplingMask& mask);

// Per-row band decomposition: map i = idft2(select_row_i(dft2(r))).
std::vector<ComplexImage> spectral_decompose_complex(const ComplexImage& img);
SpectralMapStack spectral_decompose(const ComplexImage& img);

inline int conjugate_pair(int i, int n) { return (n - i) % n; }

SamplingMask symmetrize_mask(const SamplingMask& mask);

// Observed conjugate-pair count over N/2, clamped to 1. Requires symmetry.
double kma(const SamplingMask& mask);

}  // namespace akspace
