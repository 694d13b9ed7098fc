#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "akspace/data.hpp"
#include "akspace/kspace.hpp"
#include "akspace/models.hpp"
#include "akspace/rng.hpp"

namespace akspace {

// ---------- policies ----------

// "c" variants only ever look at the zero-filled estimate; the others re-run
// the reconstructor after every acquisition. The evaluator-driven policy
// acquires the lowest-scored conjugate pair; the oracle enumerates every
// candidate pair and takes the one whose acquisition would minimize the true
// next-step error, as a learning-free reference.
enum class PolicyKind {
  kRandomC,
  kRandomCR,
  kOrderC,
  kOrderCR,
  kEvaluatorGreedy,
  kOracleGreedy,
};

PolicyKind parse_policy(const std::string& s);  // "random-c", "order-cr", "eval-greedy", ...
std::string to_string(PolicyKind kind);
bool uses_reconstructor(PolicyKind kind);

struct Policy {
  PolicyKind kind = PolicyKind::kRandomC;
  uint64_t seed = 0;  // consumed by the random policies only
};

// ---------- rows and pairs ----------

// Conjugate pair p covers rows p and (n - p) % n; pairs 0 and n/2 are single
// self-conjugate rows. There are n/2 + 1 pair slots.
std::pair<int, int> pair_rows(int p, int n);
int pair_of_row(int row, int n);
std::vector<int> unobserved_pairs(const SamplingMask& mask);
int observed_pair_count(const SamplingMask& mask);

// ---------- state ----------

struct AcquisitionState {
  ComplexImage truth;  // image domain, standardized
  ComplexImage y;      // its k-space
  SamplingMask mask;
  ComplexImage xhat;   // always zero_fill(apply_mask(y, mask))
  ReconstructionResult recon;  // populated when the policy reconstructs
  std::vector<float> scores;   // populated when an evaluator is supplied
  bool has_reconstruction = false;
  bool has_scores = false;
  int steps = 0;          // acquisitions made so far
  int initial_pairs = 0;  // observed pair slots in the initial mask

  AcquisitionState() : truth(2, Domain::kImage), y(2, Domain::kKspace),
                       mask(2), xhat(2, Domain::kImage) {}
};

// Zero-filled estimate for copy-only policies, final reconstruction otherwise.
const ComplexImage& current_image(const AcquisitionState& s);
double mean_uncertainty(const AcquisitionState& s);        // 0 without a reconstruction
double mean_unobserved_score(const AcquisitionState& s);   // 0 without scores

struct AcquisitionContext {
  Policy policy;
  const Reconstructor* recon = nullptr;  // required when the policy reconstructs
  const Evaluator* eval = nullptr;       // required for the evaluator policy
  Rng rng{0};
};

AcquisitionContext make_context(Policy policy, const Reconstructor* recon, const Evaluator* eval);

AcquisitionState make_initial_state(AcquisitionContext& ctx, const DTensor& truth_grid,
                                    const SamplingMask& initial_mask);

// Next pair slot to acquire; throws once the mask is fully observed.
int select_next(AcquisitionContext& ctx, const AcquisitionState& s);

// Observes both rows of the pair, recomputes the zero-filled estimate from
// the true k-space, and re-runs reconstructor and evaluator when the policy
// calls for them. Throws if the pair is already observed.
void acquire(AcquisitionContext& ctx, AcquisitionState& s, int pair);

// ---------- simulation ----------

struct StopCriteria {
  int budget = -1;                      // max acquisitions; negative = no cap
  double uncertainty_threshold = -1.0;  // stop when mean uncertainty < tau; negative = off

  void validate() const;  // at least one criterion must be active
};

enum class StopReason { kFullyObserved, kBudget, kUncertainty };
std::string to_string(StopReason r);

struct TraceRow {
  int step = 0;
  int pair = -1;  // -1 on the initial row
  double kma = 0.0;
  double mse = 0.0;
  double ssim = 0.0;
  double mean_uncertainty = 0.0;
  double mean_eval_score = 0.0;
};

struct AcquisitionTrace {
  std::vector<TraceRow> rows;
  StopReason stop = StopReason::kFullyObserved;
};

// columns: step,row_pair,kma,mse,ssim,mean_uncertainty,mean_eval_score
void write_trace_csv(std::ostream& os, const AcquisitionTrace& trace);

// Called after every recorded row, initial state included; used for frame dumps.
using StepHook = std::function<void(const AcquisitionState&, const TraceRow&)>;

// Select-acquire-record loop. Runs until the mask is fully observed, the
// acquisition budget is exhausted, or (for reconstructing policies) the mean
// uncertainty falls below the threshold. The coverage fraction saturates at
// 1.0 one slot before full observation, so the last two rows of a
// run-to-completion trace share kma 1.0 while the error drops to zero.
// Deterministic in (policy, truth, initial mask).
AcquisitionTrace run_simulation(Policy policy, const DTensor& truth_grid,
                                const SamplingMask& initial_mask, StopCriteria stop,
                                const Reconstructor* recon, const Evaluator* eval,
                                const StepHook& hook = nullptr);

// ---------- policy comparison ----------

struct PolicyCurve {
  Policy policy;
  std::vector<double> kma;  // shared step grid: every acquisition adds one slot
  std::vector<double> mse_mean, mse_std;
  std::vector<double> ssim_mean, ssim_std;
  double auc_mse = 0.0;  // trapezoid area of mean MSE over kma; lower is better
};

// Runs every policy over the dataset from the same initial mask with a fixed
// per-image acquisition budget. Per-image seeds derive from the policy seed,
// so reruns are identical. Throws when a reconstructing policy lacks a model.
std::vector<PolicyCurve> compare_policies(const std::vector<Policy>& policies, const Dataset& ds,
                                          const SamplingMask& initial_mask, int budget,
                                          const Reconstructor* recon, const Evaluator* eval);

// columns: policy,seed,step,kma,mse_mean,mse_std,ssim_mean,ssim_std
void write_policy_curves_csv(std::ostream& os, const std::vector<PolicyCurve>& curves);
// columns: policy,seed,auc_mse
void write_policy_auc_csv(std::ostream& os, const std::vector<PolicyCurve>& curves);

}  // namespace akspace
