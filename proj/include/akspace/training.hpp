#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "akspace/autodiff.hpp"
#include "akspace/data.hpp"
#include "akspace/models.hpp"

namespace akspace {

// ---------- configuration ----------

enum class EvaluatorLossMode { kKernel, kBinary };

EvaluatorLossMode parse_evaluator_loss_mode(const std::string& s);  // "kernel" | "binary"
std::string to_string(EvaluatorLossMode mode);

struct TrainConfig {
  ReconstructorConfig recon;   // cascade count lives here
  EvaluatorConfig eval;
  MaskSamplerConfig masks;     // per-item training masks
  double beta = 0.1;           // weight of the score-to-one term in the reconstructor loss
  double gamma = 100.0;        // kernel sharpness for evaluator targets
  AdamConfig adam;             // lr 0.0006, beta1 0.5, beta2 0.999
  int epochs_constant = 10;    // flat learning rate, then linear decay to zero
  int epochs_decay = 10;
  int batch_size = 8;
  EvaluatorLossMode evaluator_loss_mode = EvaluatorLossMode::kKernel;
  double clip_norm = 10.0;     // global-norm gradient clip per update
  uint64_t seed = 1;
  int val_pairs = 0;           // observed pairs in the fixed validation masks; 0 = n/8

  int total_epochs() const { return epochs_constant + epochs_decay; }
  void validate() const;
};

// Flat for epochs 1..epochs_constant, then affine to zero: the last decay
// epoch keeps one step worth of rate and the epoch after the schedule is 0.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

// True when the latest validation NLL is NaN, or at least four entries exist
// and the latest exceeds ten times the value three epochs back (floored at
// 0.1 so near-zero and negative baselines do not trip on noise).
bool nll_diverged(const std::vector<double>& val_nll_history);

// ---------- loss graphs ----------

// Reconstructor update graph: the cascade stack, a per-cascade Gaussian
// negative log likelihood head averaged over cascades, and the evaluator
// appended on the final reconstruction so its distance from all-ones scores
// can push gradients back through the cascades. Parameters are prefixed
// "recon." and "eval." so one store serves every graph in this header.
struct ReconTrainGraph {
  Graph graph;
  ReconstructorHandles recon;
  EvaluatorHandles eval;       // eval.image aliases recon.r.back()
  int truth = -1;              // input {2,N,N}, standardized ground truth
  std::vector<int> nll_k;      // scalar per cascade
  int nll = -1;                // mean over cascades
  int adv = -1;                // sum_i (e_i - 1)^2 on the final reconstruction
  int loss = -1;               // nll + beta * adv
};
ReconTrainGraph build_recon_train_graph(const ReconstructorConfig& rc, const EvaluatorConfig& ec,
                                        double beta);

// Evaluator update graph: scores against bound targets, summed squared error.
// The image input is a detached reconstruction, so no reconstructor
// parameters appear here at all.
struct EvalTrainGraph {
  Graph graph;
  EvaluatorHandles eval;
  int targets = -1;            // input {N}
  int loss = -1;               // sum_i (e_i - t_i)^2
};
EvalTrainGraph build_eval_train_graph(const EvaluatorConfig& ec);

// Per-row regression targets: kernel mode exp(-gamma * band-map error), which
// is 1 on observed rows of a consistency-projected reconstruction; binary
// mode is the mask itself.
std::vector<float> evaluator_targets(EvaluatorLossMode mode, const ComplexImage& r,
                                     const ComplexImage& x, const SamplingMask& mask,
                                     double gamma);

// The fixed validation masks train() scores against: one per item, derived
// from the config seed alone so callers can rebuild them (e.g. to compare a
// zero-filled baseline on identical masks) without running the trainer.
std::vector<SamplingMask> validation_masks(const TrainConfig& cfg, int count);

// ---------- training loop ----------

struct TrainLogRow {
  int epoch = 0;
  double lr = 0.0;
  double train_nll = 0.0;
  double val_mse = 0.0;
  double val_ssim = 0.0;
  double val_nll = 0.0;
  double val_eval_loss = 0.0;
};

// columns: epoch,lr,train_nll,val_mse,val_ssim,val_nll,val_eval_loss
void write_train_log_csv(std::ostream& os, const std::vector<TrainLogRow>& rows);

// Flat key=value lines, one per field.
void write_config_echo(std::ostream& os, const TrainConfig& cfg);

struct TrainResult {
  ParamStore params;           // final epoch, "recon.*" and "eval.*" together
  ParamStore best_params;      // lowest validation MSE
  int best_epoch = 0;
  std::vector<TrainLogRow> log;
};

// Alternating optimization: per batch one evaluator Adam step on detached
// final reconstructions, then one reconstructor Adam step through the updated
// evaluator. Deterministic in cfg.seed. If run_dir is nonempty it receives
// train_config.txt, train_log.csv, checkpoint_final.aksp and
// checkpoint_best.aksp. Aborts on non-finite losses and on a validation NLL
// that is NaN or grows tenfold over three epochs.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::string& run_dir = "");

}  // namespace akspace
