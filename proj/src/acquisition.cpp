#include "akspace/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "akspace/csv.hpp"
#include "akspace/metrics.hpp"

namespace akspace {

// ---------- policies ----------

PolicyKind parse_policy(const std::string& s) {
  if (s == "random-c") return PolicyKind::kRandomC;
  if (s == "random-cr") return PolicyKind::kRandomCR;
  if (s == "order-c") return PolicyKind::kOrderC;
  if (s == "order-cr") return PolicyKind::kOrderCR;
  if (s == "eval-greedy") return PolicyKind::kEvaluatorGreedy;
  if (s == "oracle-greedy") return PolicyKind::kOracleGreedy;
  throw std::invalid_argument("unknown policy: " + s);
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kRandomC: return "random-c";
    case PolicyKind::kRandomCR: return "random-cr";
    case PolicyKind::kOrderC: return "order-c";
    case PolicyKind::kOrderCR: return "order-cr";
    case PolicyKind::kEvaluatorGreedy: return "eval-greedy";
    case PolicyKind::kOracleGreedy: return "oracle-greedy";
  }
  throw std::invalid_argument("unknown policy kind");
}

bool uses_reconstructor(PolicyKind kind) {
  return kind != PolicyKind::kRandomC && kind != PolicyKind::kOrderC;
}

// ---------- rows and pairs ----------

std::pair<int, int> pair_rows(int p, int n) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("pair_rows: size must be even");
  if (p < 0 || p > n / 2) throw std::invalid_argument("pair_rows: pair index out of range");
  return {p, (n - p) % n};
}

int pair_of_row(int row, int n) {
  if (row < 0 || row >= n) throw std::invalid_argument("pair_of_row: row out of range");
  return row <= n / 2 ? row : n - row;
}

std::vector<int> unobserved_pairs(const SamplingMask& mask) {
  std::vector<int> out;
  for (int p = 0; p <= mask.n() / 2; ++p)
    if (!mask.is_observed(p)) out.push_back(p);
  return out;
}

int observed_pair_count(const SamplingMask& mask) {
  int count = 0;
  for (int p = 0; p <= mask.n() / 2; ++p) count += mask.is_observed(p) ? 1 : 0;
  return count;
}

// ---------- state ----------

const ComplexImage& current_image(const AcquisitionState& s) {
  return s.has_reconstruction ? s.recon.final_image() : s.xhat;
}

double mean_uncertainty(const AcquisitionState& s) {
  if (!s.has_reconstruction) return 0.0;
  const Tensor& u = s.recon.final_uncertainty();
  double sum = 0.0;
  for (int64_t i = 0; i < u.numel(); ++i) sum += static_cast<double>(u.ptr()[i]);
  return sum / static_cast<double>(u.numel());
}

double mean_unobserved_score(const AcquisitionState& s) {
  if (!s.has_scores) return 0.0;
  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < s.mask.n(); ++i) {
    if (s.mask.is_observed(i)) continue;
    sum += static_cast<double>(s.scores[static_cast<size_t>(i)]);
    ++count;
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

AcquisitionContext make_context(Policy policy, const Reconstructor* recon, const Evaluator* eval) {
  AcquisitionContext ctx;
  ctx.policy = policy;
  ctx.recon = recon;
  ctx.eval = eval;
  ctx.rng = Rng(policy.seed);
  if (uses_reconstructor(policy.kind) && recon == nullptr)
    throw std::invalid_argument(to_string(policy.kind) + " needs a reconstructor model");
  if (policy.kind == PolicyKind::kEvaluatorGreedy && eval == nullptr)
    throw std::invalid_argument("eval-greedy needs an evaluator model");
  return ctx;
}

namespace {

// recompute everything derived from (y, mask); the zero-filled estimate is
// always rebuilt from the true k-space
void refresh(AcquisitionContext& ctx, AcquisitionState& s) {
  s.xhat = zero_fill(apply_mask(s.y, s.mask));
  if (uses_reconstructor(ctx.policy.kind)) {
    s.recon = ctx.recon->reconstruct(s.xhat, s.mask);
    s.has_reconstruction = true;
  }
  if (ctx.eval != nullptr) {
    s.scores = ctx.eval->score(current_image(s), s.mask);
    s.has_scores = true;
  }
}

}  // namespace

AcquisitionState make_initial_state(AcquisitionContext& ctx, const DTensor& truth_grid,
                                    const SamplingMask& initial_mask) {
  if (!initial_mask.is_symmetric())
    throw std::invalid_argument("initial mask must be conjugate-symmetric");
  if (truth_grid.rank() != 2 || truth_grid.dims[0] != truth_grid.dims[1] ||
      truth_grid.dims[0] != initial_mask.n())
    throw std::invalid_argument("truth grid and mask sizes do not match");

  AcquisitionState s;
  s.truth = ComplexImage::from_real(truth_grid, Domain::kImage);
  s.y = simulate_kspace(truth_grid);
  s.mask = initial_mask;
  s.initial_pairs = observed_pair_count(initial_mask);
  refresh(ctx, s);
  return s;
}

int select_next(AcquisitionContext& ctx, const AcquisitionState& s) {
  std::vector<int> cands = unobserved_pairs(s.mask);
  if (cands.empty()) throw std::runtime_error("select_next: mask is fully observed");
  if (cands.size() == 1) return cands[0];  // forced for every policy

  switch (ctx.policy.kind) {
    case PolicyKind::kRandomC:
    case PolicyKind::kRandomCR:
      return cands[static_cast<size_t>(ctx.rng.index(static_cast<int64_t>(cands.size())))];

    case PolicyKind::kOrderC:
    case PolicyKind::kOrderCR:
      return cands[0];  // ascending pair index == ascending |frequency|

    case PolicyKind::kEvaluatorGreedy: {
      if (!s.has_scores) throw std::runtime_error("eval-greedy: no evaluator scores in state");
      const int n = s.mask.n();
      int best = cands[0];
      double best_score = std::numeric_limits<double>::infinity();
      for (int p : cands) {
        auto [a, b] = pair_rows(p, n);
        double score = a == b ? static_cast<double>(s.scores[static_cast<size_t>(a)])
                              : 0.5 * (static_cast<double>(s.scores[static_cast<size_t>(a)]) +
                                       static_cast<double>(s.scores[static_cast<size_t>(b)]));
        if (score < best_score) {
          best_score = score;
          best = p;
        }
      }
      return best;
    }

    case PolicyKind::kOracleGreedy: {
      const int n = s.mask.n();
      int best = cands[0];
      double best_mse = std::numeric_limits<double>::infinity();
      for (int p : cands) {
        SamplingMask m = s.mask;
        auto [a, b] = pair_rows(p, n);
        m.observe(a);
        m.observe(b);
        ComplexImage xh = zero_fill(apply_mask(s.y, m));
        ComplexImage img = ctx.recon->reconstruct(xh, m).final_image();
        double e = mse(img, s.truth);
        if (e < best_mse) {
          best_mse = e;
          best = p;
        }
      }
      return best;
    }
  }
  throw std::invalid_argument("unknown policy kind");
}

void acquire(AcquisitionContext& ctx, AcquisitionState& s, int pair) {
  auto [a, b] = pair_rows(pair, s.mask.n());
  if (s.mask.is_observed(a) || s.mask.is_observed(b))
    throw std::invalid_argument("acquire: pair already observed");
  s.mask.observe(a);
  s.mask.observe(b);
  s.steps += 1;
  refresh(ctx, s);
}

// ---------- simulation ----------

void StopCriteria::validate() const {
  if (std::isnan(uncertainty_threshold))
    throw std::invalid_argument("stop criteria: uncertainty threshold is NaN");
  if (budget < 0 && uncertainty_threshold < 0.0)
    throw std::invalid_argument("stop criteria: no budget and no uncertainty threshold");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kFullyObserved: return "complete";
    case StopReason::kBudget: return "budget";
    case StopReason::kUncertainty: return "uncertainty";
  }
  throw std::invalid_argument("unknown stop reason");
}

void write_trace_csv(std::ostream& os, const AcquisitionTrace& trace) {
  os << "step,row_pair,kma,mse,ssim,mean_uncertainty,mean_eval_score\n";
  for (const auto& r : trace.rows) {
    os << r.step << ',' << r.pair << ',' << fmt_g(r.kma) << ',' << fmt_g(r.mse) << ','
       << fmt_g(r.ssim) << ',' << fmt_g(r.mean_uncertainty) << ',' << fmt_g(r.mean_eval_score)
       << '\n';
  }
}

namespace {

TraceRow record_row(const AcquisitionState& s, const DTensor& truth_grid, int pair) {
  TraceRow row;
  row.step = s.steps;
  row.pair = pair;
  row.kma = kma(s.mask);
  const ComplexImage& img = current_image(s);
  row.mse = mse(img, s.truth);
  row.ssim = ssim(img.real_grid(), truth_grid);
  row.mean_uncertainty = mean_uncertainty(s);
  row.mean_eval_score = mean_unobserved_score(s);
  return row;
}

}  // namespace

AcquisitionTrace run_simulation(Policy policy, const DTensor& truth_grid,
                                const SamplingMask& initial_mask, StopCriteria stop,
                                const Reconstructor* recon, const Evaluator* eval,
                                const StepHook& hook) {
  stop.validate();
  AcquisitionContext ctx = make_context(policy, recon, eval);
  AcquisitionState s = make_initial_state(ctx, truth_grid, initial_mask);

  AcquisitionTrace trace;
  trace.rows.push_back(record_row(s, truth_grid, -1));
  if (hook) hook(s, trace.rows.back());

  for (;;) {
    if (unobserved_pairs(s.mask).empty()) {
      trace.stop = StopReason::kFullyObserved;
      break;
    }
    if (stop.budget >= 0 && s.steps >= stop.budget) {
      trace.stop = StopReason::kBudget;
      break;
    }
    if (stop.uncertainty_threshold >= 0.0 && s.has_reconstruction &&
        mean_uncertainty(s) < stop.uncertainty_threshold) {
      trace.stop = StopReason::kUncertainty;
      break;
    }
    int p = select_next(ctx, s);
    acquire(ctx, s, p);
    trace.rows.push_back(record_row(s, truth_grid, p));
    if (hook) hook(s, trace.rows.back());
  }
  return trace;
}

// ---------- policy comparison ----------

std::vector<PolicyCurve> compare_policies(const std::vector<Policy>& policies, const Dataset& ds,
                                          const SamplingMask& initial_mask, int budget,
                                          const Reconstructor* recon, const Evaluator* eval) {
  if (policies.empty()) throw std::invalid_argument("compare_policies: no policies given");
  if (ds.count() == 0) throw std::invalid_argument("compare_policies: empty dataset");
  if (budget < 0) throw std::invalid_argument("compare_policies: budget must be nonnegative");
  for (const Policy& p : policies) make_context(p, recon, eval);  // model checks up front

  StopCriteria stop;
  stop.budget = budget;

  std::vector<PolicyCurve> out;
  for (const Policy& base : policies) {
    PolicyCurve curve;
    curve.policy = base;

    std::vector<std::vector<double>> mse_rows, ssim_rows;  // [image][step]
    for (int i = 0; i < ds.count(); ++i) {
      Policy per_image = base;
      per_image.seed = Rng::mix(base.seed, static_cast<uint64_t>(i));
      AcquisitionTrace t =
          run_simulation(per_image, ds.items[static_cast<size_t>(i)].grid, initial_mask, stop,
                         recon, eval);
      std::vector<double> m, q;
      for (const auto& row : t.rows) {
        m.push_back(row.mse);
        q.push_back(row.ssim);
      }
      if (curve.kma.empty())
        for (const auto& row : t.rows) curve.kma.push_back(row.kma);
      if (m.size() != curve.kma.size())
        throw std::runtime_error("compare_policies: inconsistent trace lengths");
      mse_rows.push_back(std::move(m));
      ssim_rows.push_back(std::move(q));
    }

    const size_t steps = curve.kma.size();
    const double inv = 1.0 / static_cast<double>(ds.count());
    auto stats = [&](const std::vector<std::vector<double>>& rows, std::vector<double>& mean,
                     std::vector<double>& sd) {
      mean.assign(steps, 0.0);
      sd.assign(steps, 0.0);
      for (size_t t = 0; t < steps; ++t) {
        double s1 = 0.0, s2 = 0.0;
        for (const auto& r : rows) {
          s1 += r[t];
          s2 += r[t] * r[t];
        }
        mean[t] = s1 * inv;
        sd[t] = std::sqrt(std::max(0.0, s2 * inv - mean[t] * mean[t]));
      }
    };
    stats(mse_rows, curve.mse_mean, curve.mse_std);
    stats(ssim_rows, curve.ssim_mean, curve.ssim_std);

    curve.auc_mse = 0.0;
    for (size_t t = 0; t + 1 < steps; ++t)
      curve.auc_mse += (curve.kma[t + 1] - curve.kma[t]) *
                       0.5 * (curve.mse_mean[t + 1] + curve.mse_mean[t]);
    out.push_back(std::move(curve));
  }
  return out;
}

void write_policy_curves_csv(std::ostream& os, const std::vector<PolicyCurve>& curves) {
  os << "policy,seed,step,kma,mse_mean,mse_std,ssim_mean,ssim_std\n";
  for (const auto& c : curves) {
    for (size_t t = 0; t < c.kma.size(); ++t) {
      os << to_string(c.policy.kind) << ',' << c.policy.seed << ',' << t << ',' << fmt_g(c.kma[t])
         << ',' << fmt_g(c.mse_mean[t]) << ',' << fmt_g(c.mse_std[t]) << ','
         << fmt_g(c.ssim_mean[t]) << ',' << fmt_g(c.ssim_std[t]) << '\n';
    }
  }
}

void write_policy_auc_csv(std::ostream& os, const std::vector<PolicyCurve>& curves) {
  os << "policy,seed,auc_mse\n";
  for (const auto& c : curves)
    os << to_string(c.policy.kind) << ',' << c.policy.seed << ',' << fmt_g(c.auc_mse) << '\n';
}

}  // namespace akspace
