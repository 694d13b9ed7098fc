#pragma once

#include <string>
#include <vector>

#include "akspace/autodiff.hpp"
#include "akspace/kspace.hpp"

namespace akspace {

// ---------- configuration ----------

struct ReconstructorConfig {
  int n = 32;               // image size; 3 stride-2 halvings need n % 8 == 0
  int base_channels = 32;   // encoder widths b, 2b, 4b; decoder ends at b/2
  int cascades = 3;
  int resblocks = 3;
  float log_var_lo = -10.f;
  float log_var_hi = 10.f;

  void validate() const;
};

struct EvaluatorConfig {
  int n = 32;               // conv widths scale as 2n, 4n, 8n
  int embed_channels = 6;   // mask-column embedding width

  void validate() const;
};

// ---------- graph builders ----------

// Node ids for the pieces training and inference need to reach.
struct ReconstructorHandles {
  int xhat = -1;                // input {2,N,N}, zero-filled estimate
  int y_obs = -1;               // input {2,N,N}, masked k-space
  int mask = -1;                // input {N}, 0/1 row weights
  std::vector<int> r;           // per cascade, {2,N,N}, after consistency
  std::vector<int> log_var;     // per cascade, {1,N,N}, clamped
  std::vector<int> u;           // per cascade, {1,N,N}, exp(log_var)
};

struct EvaluatorHandles {
  int image = -1;               // input {2,N,N}, image-domain reconstruction
  int mask = -1;                // input {N}, 0/1 row weights
  int scores = -1;              // {N}
};

// Each cascade module: three stride-2 convolutions (IN + ReLU), residual
// blocks, three stride-2 transposed convolutions (IN + ReLU), then a raw 1x1
// projection to 2 residual channels plus 1 log-variance channel. The residual
// is added to the module input and observed rows are hard-copied from y_obs.
// Modules after the first receive an additive skip from the predecessor's
// last residual-block output into their third encoder activation. The final
// 1x1 projections are zero-initialized, so an untrained reconstructor is the
// identity on its input with unit variance.
ReconstructorHandles append_reconstructor(GraphBuilder& b, const ReconstructorConfig& cfg,
                                          const std::string& prefix);

// Spectral band maps (N channels) concatenated with a spatially replicated
// 1x1 embedding of the mask column, three stride-2 convolutions
// (IN + LeakyReLU 0.2), global average pooling, and a raw 1x1 projection to
// one score per k-space row.
EvaluatorHandles append_evaluator(GraphBuilder& b, const EvaluatorConfig& cfg,
                                  const std::string& prefix);
// Attach the evaluator to existing graph nodes (pass -1 to create an input).
EvaluatorHandles append_evaluator(GraphBuilder& b, const EvaluatorConfig& cfg,
                                  const std::string& prefix, int image, int mask);

// ---------- runtime wrappers ----------

struct ReconstructionResult {
  std::vector<ComplexImage> images;       // r^1 .. r^K, image domain
  std::vector<Tensor> uncertainties;      // u^1 .. u^K, {N,N}, strictly positive

  const ComplexImage& final_image() const { return images.back(); }
  const Tensor& final_uncertainty() const { return uncertainties.back(); }
};

// ---------- graph input packing ----------

Tensor pack_complex(const ComplexImage& img);                  // {2,N,N}
ComplexImage unpack_complex(const Tensor& t, Domain domain);
Tensor pack_mask(const SamplingMask& mask);                    // {N}
// dft2(xhat) with unobserved rows forced to exact zero.
Tensor pack_observed_kspace(const ComplexImage& xhat, const SamplingMask& mask);

class Reconstructor {
 public:
  Reconstructor(ReconstructorConfig cfg, ParamStore params);
  static Reconstructor randomly_initialized(ReconstructorConfig cfg, uint64_t seed);

  ReconstructionResult reconstruct(const ComplexImage& xhat, const SamplingMask& mask) const;

  const ReconstructorConfig& config() const { return cfg_; }
  const Graph& graph() const { return graph_; }
  const ReconstructorHandles& handles() const { return handles_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

 private:
  ReconstructorConfig cfg_;
  Graph graph_;
  ReconstructorHandles handles_;
  ParamStore params_;
};

class Evaluator {
 public:
  Evaluator(EvaluatorConfig cfg, ParamStore params);
  static Evaluator randomly_initialized(EvaluatorConfig cfg, uint64_t seed);

  std::vector<float> score(const ComplexImage& r, const SamplingMask& mask) const;

  const EvaluatorConfig& config() const { return cfg_; }
  const Graph& graph() const { return graph_; }
  const EvaluatorHandles& handles() const { return handles_; }
  const ParamStore& params() const { return params_; }
  ParamStore& params() { return params_; }

 private:
  EvaluatorConfig cfg_;
  Graph graph_;
  EvaluatorHandles handles_;
  ParamStore params_;
};

// ---------- checkpoints ----------
// Magic "AKSP", u32 version, u32 tensor count; per tensor: u16 name length,
// name bytes, u8 rank, u32 dims, f32 little-endian data. Tensors are written
// in name order. Parameters must be finite.
void save_checkpoint(const std::string& path, const ParamStore& params);
ParamStore load_checkpoint(const std::string& path);

}  // namespace akspace
