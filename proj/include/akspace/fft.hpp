#pragma once

namespace akspace::fft {

// In-place complex transform over split real/imaginary arrays of length n.
// Forward kernel is e^{-2pi i jk/n}, inverse e^{+2pi i jk/n}; no scaling is
// applied here. Power-of-two lengths use an iterative radix-2 path, other
// even lengths fall back to a cached direct evaluation.
void transform(double* re, double* im, int n, bool inverse);

// Unitary 2D transform of an n*n plane pair (row-major): rows, then columns,
// then a single 1/n scale, so forward and inverse are exact adjoints.
void dft2_planes(double* re, double* im, int n, bool inverse);

}  // namespace akspace::fft
