#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "akspace/kspace.hpp"
#include "akspace/rng.hpp"
#include "akspace/tensor.hpp"

namespace akspace {

// ---------- datasets ----------

struct DatasetItem {
  std::string id;
  DTensor grid;           // standardized N x N
  double mean = 0.0;      // raw-image statistics removed by standardization
  double std_dev = 1.0;
};

struct Dataset {
  std::vector<DatasetItem> items;
  std::string split_tag;  // train / val / test, set by the caller

  int count() const { return static_cast<int>(items.size()); }
  int n() const;          // throws on an empty dataset
};

struct Standardization {
  double mean;
  double std_dev;  // floored away from zero for degenerate images
};

// In-place (x - mean) / max(std, floor); a constant image becomes zeros.
Standardization standardize(DTensor& grid);

// Random superpositions of 3..8 rotated ellipses and rectangles in [0,1],
// standardized per item. Deterministic in (seed, count, n).
Dataset generate_phantoms(uint64_t seed, int count, int n);

// Reads every regular file in dir as binary 8-bit PGM, warning and skipping
// unparseable ones; resizes to n x n, scales to [0,1], standardizes.
Dataset load_image_dir(const std::string& dir, int n);

// index.csv (image_id,file,mean,std) plus one AKT1 tensor file per item.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

// ---------- images ----------

DTensor load_pgm(const std::string& path);                     // values in [0,1]
void save_pgm(const std::string& path, const DTensor& grid);   // min-max normalized
DTensor resize_bilinear(const DTensor& src, int n);            // half-pixel centers

// ---------- sampling masks ----------

struct MaskSamplerConfig {
  int n = 32;
  int fixed_low_rows = 4;  // always-observed lowest-frequency rows (fixed/2 pairs)
  int min_pairs = 4;       // total pair-count range drawn per mask, inclusive
  int max_pairs = 12;

  void validate() const;
};

// Rows {1..f/2} and their conjugates {n-f/2..n-1}.
SamplingMask fixed_low_freq_mask(int n, int fixed_rows);

// Fixed rows plus uniformly sampled extra conjugate pairs until pair_target
// pairs are observed (the fixed rows alone may already exceed the target).
SamplingMask sample_mask_with_pairs(Rng& rng, int n, int fixed_rows, int pair_target);

SamplingMask sample_training_mask(Rng& rng, const MaskSamplerConfig& cfg);

}  // namespace akspace
