#include "akspace/kspace.hpp"

#include <cmath>
#include <stdexcept>

#include "akspace/fft.hpp"

namespace akspace {

namespace {

void check_size(int n) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("grid size must be even and >= 2");
}

void check_finite(const ComplexImage& img, const char* what) {
  if (!img.all_finite()) throw std::invalid_argument(std::string(what) + ": non-finite values");
}

void check_domain(const ComplexImage& img, Domain want, const char* what) {
  if (img.domain() != want)
    throw std::invalid_argument(std::string(what) + ": wrong domain tag");
}

void check_mask(const SamplingMask& mask, int n, const char* what) {
  if (mask.n() != n) throw std::invalid_argument(std::string(what) + ": mask size mismatch");
}

}  // namespace

ComplexImage::ComplexImage(int n, Domain domain)
    : n_(n), domain_(domain), re_(static_cast<size_t>(n) * n, 0.0),
      im_(static_cast<size_t>(n) * n, 0.0) {
  check_size(n);
}

ComplexImage ComplexImage::from_real(const DTensor& grid, Domain domain) {
  if (grid.rank() != 2 || grid.dims[0] != grid.dims[1])
    throw std::invalid_argument("from_real: grid must be square");
  ComplexImage out(grid.dims[0], domain);
  for (size_t i = 0; i < grid.data.size(); ++i) out.re_[i] = grid.data[i];
  return out;
}

DTensor ComplexImage::real_grid() const {
  DTensor g({n_, n_});
  g.data.assign(re_.begin(), re_.end());
  return g;
}

DTensor ComplexImage::imag_grid() const {
  DTensor g({n_, n_});
  g.data.assign(im_.begin(), im_.end());
  return g;
}

DTensor ComplexImage::magnitude_grid() const {
  DTensor g({n_, n_});
  for (size_t i = 0; i < re_.size(); ++i) g.data[i] = std::hypot(re_[i], im_[i]);
  return g;
}

bool ComplexImage::all_finite() const {
  for (double v : re_)
    if (!std::isfinite(v)) return false;
  for (double v : im_)
    if (!std::isfinite(v)) return false;
  return true;
}

int SamplingMask::count_observed() const {
  int c = 0;
  for (uint8_t v : observed) c += v != 0;
  return c;
}

bool SamplingMask::is_symmetric() const {
  int n = this->n();
  for (int i = 0; i < n; ++i)
    if (is_observed(i) != is_observed(conjugate_pair(i, n))) return false;
  return true;
}

ComplexImage dft2(const ComplexImage& img) {
  check_domain(img, Domain::kImage, "dft2");
  check_finite(img, "dft2");
  ComplexImage out(img.n(), Domain::kKspace);
  std::copy(img.re_data(), img.re_data() + static_cast<size_t>(img.n()) * img.n(), out.re_data());
  std::copy(img.im_data(), img.im_data() + static_cast<size_t>(img.n()) * img.n(), out.im_data());
  fft::dft2_planes(out.re_data(), out.im_data(), img.n(), false);
  return out;
}

ComplexImage idft2(const ComplexImage& ksp) {
  check_domain(ksp, Domain::kKspace, "idft2");
  check_finite(ksp, "idft2");
  ComplexImage out(ksp.n(), Domain::kImage);
  std::copy(ksp.re_data(), ksp.re_data() + static_cast<size_t>(ksp.n()) * ksp.n(), out.re_data());
  std::copy(ksp.im_data(), ksp.im_data() + static_cast<size_t>(ksp.n()) * ksp.n(), out.im_data());
  fft::dft2_planes(out.re_data(), out.im_data(), ksp.n(), true);
  return out;
}

ComplexImage simulate_kspace(const DTensor& grid) {
  return dft2(ComplexImage::from_real(grid, Domain::kImage));
}

ComplexImage apply_mask(const ComplexImage& ksp, const SamplingMask& mask) {
  check_domain(ksp, Domain::kKspace, "apply_mask");
  check_mask(mask, ksp.n(), "apply_mask");
  ComplexImage out = ksp;
  int n = ksp.n();
  for (int i = 0; i < n; ++i) {
    if (mask.is_observed(i)) continue;
    for (int j = 0; j < n; ++j) out.set(i, j, 0.0, 0.0);
  }
  return out;
}

ComplexImage zero_fill(const ComplexImage& ksp) { return idft2(ksp); }

ComplexImage data_consistency(const ComplexImage& f_out, const ComplexImage& xhat,
                              const SamplingMask& mask) {
  check_domain(f_out, Domain::kImage, "data_consistency");
  check_domain(xhat, Domain::kImage, "data_consistency");
  if (f_out.n() != xhat.n()) throw std::invalid_argument("data_consistency: size mismatch");
  check_mask(mask, f_out.n(), "data_consistency");
  ComplexImage yf = dft2(f_out);
  ComplexImage yx = dft2(xhat);
  int n = f_out.n();
  ComplexImage mixed(n, Domain::kKspace);
  for (int i = 0; i < n; ++i) {
    const ComplexImage& src = mask.is_observed(i) ? yx : yf;
    for (int j = 0; j < n; ++j) mixed.set(i, j, src.re(i, j), src.im(i, j));
  }
  return idft2(mixed);
}

std::vector<ComplexImage> spectral_decompose_complex(const ComplexImage& img) {
  check_domain(img, Domain::kImage, "spectral_decompose");
  check_finite(img, "spectral_decompose");
  ComplexImage y = dft2(img);
  int n = img.n();
  std::vector<ComplexImage> maps;
  maps.reserve(n);
  for (int i = 0; i < n; ++i) {
    ComplexImage row(n, Domain::kKspace);
    for (int j = 0; j < n; ++j) row.set(i, j, y.re(i, j), y.im(i, j));
    maps.push_back(idft2(row));
  }
  return maps;
}

SpectralMapStack spectral_decompose(const ComplexImage& img) {
  std::vector<ComplexImage> cplx = spectral_decompose_complex(img);
  SpectralMapStack out;
  out.maps.reserve(cplx.size());
  for (const ComplexImage& m : cplx) out.maps.push_back(m.magnitude_grid());
  return out;
}

SamplingMask symmetrize_mask(const SamplingMask& mask) {
  int n = mask.n();
  check_size(n);
  SamplingMask out = mask;
  for (int i = 0; i < n; ++i)
    if (mask.is_observed(i)) out.observe(conjugate_pair(i, n));
  return out;
}

double kma(const SamplingMask& mask) {
  int n = mask.n();
  check_size(n);
  if (!mask.is_symmetric()) throw std::invalid_argument("kma: mask is not conjugate-symmetric");
  int pairs = 0;
  for (int i = 0; i <= n / 2; ++i) pairs += mask.is_observed(i);
  double v = static_cast<double>(pairs) / (n / 2);
  return v > 1.0 ? 1.0 : v;
}

}  // namespace akspace
