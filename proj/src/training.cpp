#include "akspace/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "akspace/csv.hpp"
#include "akspace/metrics.hpp"

namespace akspace {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

// rng stream tags, mixed with the config seed
constexpr uint64_t kStreamInit = 0x696e6974;
constexpr uint64_t kStreamShuffle = 0x73687566;
constexpr uint64_t kStreamMasks = 0x6d61736b;
constexpr uint64_t kStreamVal = 0x76616c6d;

}  // namespace

// ---------- configuration ----------

EvaluatorLossMode parse_evaluator_loss_mode(const std::string& s) {
  if (s == "kernel") return EvaluatorLossMode::kKernel;
  if (s == "binary") return EvaluatorLossMode::kBinary;
  throw std::invalid_argument("unknown evaluator loss mode: " + s);
}

std::string to_string(EvaluatorLossMode mode) {
  return mode == EvaluatorLossMode::kKernel ? "kernel" : "binary";
}

void TrainConfig::validate() const {
  recon.validate();
  eval.validate();
  masks.validate();
  if (recon.n != eval.n || recon.n != masks.n)
    throw std::invalid_argument("train config: reconstructor, evaluator and mask sizes differ");
  if (beta < 0.0) throw std::invalid_argument("train config: beta must be nonnegative");
  if (gamma <= 0.0) throw std::invalid_argument("train config: gamma must be positive");
  if (adam.lr <= 0.0) throw std::invalid_argument("train config: learning rate must be positive");
  if (epochs_constant < 0 || epochs_decay < 0 || total_epochs() < 1)
    throw std::invalid_argument("train config: need at least one epoch");
  if (batch_size < 1) throw std::invalid_argument("train config: batch size must be at least 1");
  if (clip_norm <= 0.0) throw std::invalid_argument("train config: clip norm must be positive");
  if (val_pairs < 0 || val_pairs > masks.n / 2)
    throw std::invalid_argument("train config: validation pair count out of range");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 1) throw std::invalid_argument("epochs are 1-based");
  if (cfg.epochs_decay == 0)
    return epoch <= cfg.epochs_constant ? cfg.adam.lr : 0.0;
  double steps_left = static_cast<double>(cfg.epochs_constant + cfg.epochs_decay + 1 - epoch) /
                      static_cast<double>(cfg.epochs_decay);
  return cfg.adam.lr * std::clamp(steps_left, 0.0, 1.0);
}

bool nll_diverged(const std::vector<double>& val_nll_history) {
  if (val_nll_history.empty()) return false;
  double last = val_nll_history.back();
  if (std::isnan(last)) return true;
  if (val_nll_history.size() < 4) return false;
  double base = val_nll_history[val_nll_history.size() - 4];
  return last > 10.0 * std::max(base, 0.1);
}

// ---------- loss graphs ----------

namespace {

// mean over pixels of |r - x|^2 / (2u) + log(2 pi u) / 2, with u = exp(lv)
int append_nll_head(GraphBuilder& b, int r, int truth, int log_var) {
  int d = b.add(r, b.affine(truth, -1.f, 0.f));
  int dre = b.slice_c(d, 0, 1);
  int dim = b.slice_c(d, 1, 2);
  int s = b.add(b.mul(dre, dre), b.mul(dim, dim));
  int quad = b.affine(b.mul(s, b.exp_op(b.affine(log_var, -1.f, 0.f))), 0.5f, 0.f);
  int logdet = b.affine(log_var, 0.5f, static_cast<float>(kHalfLog2Pi));
  return b.reduce_mean(b.add(quad, logdet));
}

}  // namespace

ReconTrainGraph build_recon_train_graph(const ReconstructorConfig& rc, const EvaluatorConfig& ec,
                                        double beta) {
  if (rc.n != ec.n) throw std::invalid_argument("reconstructor and evaluator sizes differ");
  if (beta < 0.0) throw std::invalid_argument("beta must be nonnegative");

  GraphBuilder b;
  ReconTrainGraph g;
  g.recon = append_reconstructor(b, rc, "recon.");
  g.truth = b.input({2, rc.n, rc.n}, "truth");

  for (size_t k = 0; k < g.recon.r.size(); ++k)
    g.nll_k.push_back(append_nll_head(b, g.recon.r[k], g.truth, g.recon.log_var[k]));
  int sum = g.nll_k[0];
  for (size_t k = 1; k < g.nll_k.size(); ++k) sum = b.add(sum, g.nll_k[k]);
  g.nll = b.affine(sum, 1.f / static_cast<float>(g.nll_k.size()), 0.f);

  g.eval = append_evaluator(b, ec, "eval.", g.recon.r.back(), g.recon.mask);
  int ds = b.affine(g.eval.scores, 1.f, -1.f);
  g.adv = b.reduce_sum(b.mul(ds, ds));

  g.loss = b.add(g.nll, b.affine(g.adv, static_cast<float>(beta), 0.f));
  g.graph = b.take();
  return g;
}

EvalTrainGraph build_eval_train_graph(const EvaluatorConfig& ec) {
  GraphBuilder b;
  EvalTrainGraph g;
  g.eval = append_evaluator(b, ec, "eval.");
  g.targets = b.input({ec.n}, "targets");
  int d = b.add(g.eval.scores, b.affine(g.targets, -1.f, 0.f));
  g.loss = b.reduce_sum(b.mul(d, d));
  g.graph = b.take();
  return g;
}

std::vector<float> evaluator_targets(EvaluatorLossMode mode, const ComplexImage& r,
                                     const ComplexImage& x, const SamplingMask& mask,
                                     double gamma) {
  const int n = mask.n();
  std::vector<float> t(static_cast<size_t>(n));
  if (mode == EvaluatorLossMode::kBinary) {
    for (int i = 0; i < n; ++i) t[static_cast<size_t>(i)] = mask.is_observed(i) ? 1.f : 0.f;
    return t;
  }
  TargetScores ts = target_scores(r, x, gamma);
  for (int i = 0; i < n; ++i) t[static_cast<size_t>(i)] = static_cast<float>(ts.t[static_cast<size_t>(i)]);
  return t;
}

std::vector<SamplingMask> validation_masks(const TrainConfig& cfg, int count) {
  const int n = cfg.masks.n;
  const int pairs = cfg.val_pairs > 0 ? cfg.val_pairs : n / 8;
  std::vector<SamplingMask> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng vr(Rng::mix(cfg.seed ^ kStreamVal, static_cast<uint64_t>(i)));
    out.push_back(sample_mask_with_pairs(vr, n, cfg.masks.fixed_low_rows, pairs));
  }
  return out;
}

// ---------- logging ----------

void write_train_log_csv(std::ostream& os, const std::vector<TrainLogRow>& rows) {
  os << "epoch,lr,train_nll,val_mse,val_ssim,val_nll,val_eval_loss\n";
  for (const auto& r : rows) {
    os << r.epoch << ',' << fmt_g(r.lr) << ',' << fmt_g(r.train_nll) << ',' << fmt_g(r.val_mse)
       << ',' << fmt_g(r.val_ssim) << ',' << fmt_g(r.val_nll) << ',' << fmt_g(r.val_eval_loss)
       << '\n';
  }
}

void write_config_echo(std::ostream& os, const TrainConfig& cfg) {
  os << "n=" << cfg.recon.n << '\n';
  os << "base_channels=" << cfg.recon.base_channels << '\n';
  os << "cascades=" << cfg.recon.cascades << '\n';
  os << "resblocks=" << cfg.recon.resblocks << '\n';
  os << "log_var_lo=" << fmt_g(cfg.recon.log_var_lo) << '\n';
  os << "log_var_hi=" << fmt_g(cfg.recon.log_var_hi) << '\n';
  os << "embed_channels=" << cfg.eval.embed_channels << '\n';
  os << "fixed_low_rows=" << cfg.masks.fixed_low_rows << '\n';
  os << "min_pairs=" << cfg.masks.min_pairs << '\n';
  os << "max_pairs=" << cfg.masks.max_pairs << '\n';
  os << "beta=" << fmt_g(cfg.beta) << '\n';
  os << "gamma=" << fmt_g(cfg.gamma) << '\n';
  os << "lr=" << fmt_g(cfg.adam.lr) << '\n';
  os << "adam_beta1=" << fmt_g(cfg.adam.beta1) << '\n';
  os << "adam_beta2=" << fmt_g(cfg.adam.beta2) << '\n';
  os << "adam_eps=" << fmt_g(cfg.adam.eps) << '\n';
  os << "epochs_constant=" << cfg.epochs_constant << '\n';
  os << "epochs_decay=" << cfg.epochs_decay << '\n';
  os << "batch_size=" << cfg.batch_size << '\n';
  os << "evaluator_loss_mode=" << to_string(cfg.evaluator_loss_mode) << '\n';
  os << "clip_norm=" << fmt_g(cfg.clip_norm) << '\n';
  os << "seed=" << cfg.seed << '\n';
  os << "val_pairs=" << cfg.val_pairs << '\n';
}

// ---------- training loop ----------

namespace {

struct ItemInputs {
  Tensor xhat;    // {2,N,N}
  Tensor y_obs;   // {2,N,N}, exact zeros off-mask
  Tensor mask;    // {N}
};

ItemInputs make_inputs(const ComplexImage& y, const SamplingMask& mask) {
  ItemInputs in;
  ComplexImage masked = apply_mask(y, mask);
  in.xhat = pack_complex(zero_fill(masked));
  in.y_obs = pack_complex(masked);
  in.mask = pack_mask(mask);
  return in;
}

// param name -> node id, filtered by prefix
std::vector<std::pair<std::string, int>> param_nodes(const Graph& g, const std::string& prefix) {
  std::vector<std::pair<std::string, int>> out;
  for (int i = 0; i < g.node_count(); ++i) {
    const Node& n = g.nodes[static_cast<size_t>(i)];
    if (n.op != OpKind::kParam) continue;
    if (n.name.rfind(prefix, 0) == 0) out.emplace_back(n.name, i);
  }
  return out;
}

void accumulate_grads(std::map<std::string, Tensor>& acc, const Session<float>& sess,
                      const std::vector<std::pair<std::string, int>>& nodes, float scale) {
  for (const auto& [name, id] : nodes) {
    if (!sess.has_grad(id)) continue;
    const Tensor& g = sess.grad(id);
    auto it = acc.find(name);
    if (it == acc.end()) {
      Tensor t(g.dims);
      t.fill(0.f);
      it = acc.emplace(name, std::move(t)).first;
    }
    float* a = it->second.ptr();
    const float* p = g.ptr();
    for (int64_t i = 0; i < g.numel(); ++i) a[i] += scale * p[i];
  }
}

DTensor uncertainty_grid(const Tensor& u) {
  DTensor out({u.dims[1], u.dims[2]});
  for (int64_t i = 0; i < out.numel(); ++i) out.ptr()[i] = static_cast<double>(u.ptr()[i]);
  return out;
}

[[noreturn]] void abort_non_finite(const char* what, int epoch, const std::string& item_id,
                                   const std::string& detail) {
  std::ostringstream os;
  os << "training aborted: non-finite " << what << " at epoch " << epoch << ", item " << item_id
     << " (" << detail << ")";
  throw std::runtime_error(os.str());
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::string& run_dir) {
  cfg.validate();
  if (train_set.count() == 0 || val_set.count() == 0)
    throw std::invalid_argument("train: both splits must be nonempty");
  if (train_set.n() != cfg.recon.n || val_set.n() != cfg.recon.n)
    throw std::invalid_argument("train: dataset size does not match the model");

  const int n = cfg.recon.n;

  ReconTrainGraph rg = build_recon_train_graph(cfg.recon, cfg.eval, cfg.beta);
  EvalTrainGraph eg = build_eval_train_graph(cfg.eval);

  ParamStore params;
  Rng init_rng(Rng::mix(cfg.seed, kStreamInit));
  init_params(params, rg.graph, init_rng);  // declares both recon.* and eval.*
  audit_params(params, eg.graph);

  Session<float> rsess(&rg.graph, &params);
  Session<float> esess(&eg.graph, &params);
  Adam opt_recon(cfg.adam), opt_eval(cfg.adam);

  const auto recon_params = param_nodes(rg.graph, "recon.");
  const auto eval_params = param_nodes(eg.graph, "eval.");

  // per-item ground truth, precomputed once
  auto prep = [](const Dataset& ds) {
    std::vector<ComplexImage> xs, ys;
    xs.reserve(static_cast<size_t>(ds.count()));
    ys.reserve(static_cast<size_t>(ds.count()));
    for (const auto& item : ds.items) {
      xs.push_back(ComplexImage::from_real(item.grid, Domain::kImage));
      ys.push_back(simulate_kspace(item.grid));
    }
    return std::make_pair(std::move(xs), std::move(ys));
  };
  auto [train_x, train_y] = prep(train_set);
  auto [val_x, val_y] = prep(val_set);

  // fixed validation masks, one per item
  std::vector<SamplingMask> val_masks = validation_masks(cfg, val_set.count());

  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    std::ofstream cf(run_dir + "/train_config.txt");
    write_config_echo(cf, cfg);
  }

  Rng shuffle_rng(Rng::mix(cfg.seed, kStreamShuffle));
  Rng mask_rng(Rng::mix(cfg.seed, kStreamMasks));

  TrainResult result;
  result.best_epoch = 0;
  double best_mse = std::numeric_limits<double>::infinity();
  std::vector<double> nll_history;

  std::vector<int> order(static_cast<size_t>(train_set.count()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.total_epochs(); ++epoch) {
    const double lr = lr_at_epoch(cfg, epoch);
    shuffle_rng.shuffle(order);

    double train_nll_sum = 0.0;
    int64_t train_items = 0;

    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const float inv_batch = 1.f / static_cast<float>(stop - start);

      // batch-fixed masks and inputs
      std::vector<SamplingMask> batch_masks;
      std::vector<ItemInputs> batch_in;
      for (size_t j = start; j < stop; ++j) {
        SamplingMask m = sample_training_mask(mask_rng, cfg.masks);
        batch_in.push_back(make_inputs(train_y[static_cast<size_t>(order[j])], m));
        batch_masks.push_back(std::move(m));
      }

      // evaluator step on detached final reconstructions
      std::map<std::string, Tensor> eg_grads;
      for (size_t j = start; j < stop; ++j) {
        const int item = order[j];
        ItemInputs& in = batch_in[j - start];
        rsess.bind(rg.recon.xhat, in.xhat);
        rsess.bind(rg.recon.y_obs, in.y_obs);
        rsess.bind(rg.recon.mask, in.mask);
        rsess.bind(rg.truth, pack_complex(train_x[static_cast<size_t>(item)]));
        rsess.forward();
        {
          double nll = static_cast<double>(rsess.value(rg.nll)[0]);
          double adv = static_cast<double>(rsess.value(rg.adv)[0]);
          if (!std::isfinite(nll) || !std::isfinite(adv))
            abort_non_finite("reconstruction", epoch, train_set.items[static_cast<size_t>(item)].id,
                             "nll=" + fmt_g(nll) + ", adv=" + fmt_g(adv));
        }

        Tensor r_final = rsess.value(rg.recon.r.back());  // detached copy
        ComplexImage r_img = unpack_complex(r_final, Domain::kImage);
        std::vector<float> t =
            evaluator_targets(cfg.evaluator_loss_mode, r_img, train_x[static_cast<size_t>(item)],
                              batch_masks[j - start], cfg.gamma);
        Tensor targets({n});
        std::copy(t.begin(), t.end(), targets.ptr());

        esess.bind(eg.eval.image, std::move(r_final));
        esess.bind(eg.eval.mask, in.mask);
        esess.bind(eg.targets, std::move(targets));
        esess.forward();
        double el = static_cast<double>(esess.value(eg.loss)[0]);
        if (!std::isfinite(el))
          abort_non_finite("evaluator loss", epoch, train_set.items[static_cast<size_t>(item)].id,
                           "fit=" + fmt_g(el));
        esess.zero_grads();
        esess.backward_scalar(eg.loss);
        accumulate_grads(eg_grads, esess, eval_params, inv_batch);
      }
      clip_grad_norm(eg_grads, cfg.clip_norm);
      opt_eval.step(params, eg_grads, lr);

      // reconstructor step through the updated evaluator
      std::map<std::string, Tensor> rg_grads;
      for (size_t j = start; j < stop; ++j) {
        const int item = order[j];
        ItemInputs& in = batch_in[j - start];
        rsess.bind(rg.recon.xhat, std::move(in.xhat));
        rsess.bind(rg.recon.y_obs, std::move(in.y_obs));
        rsess.bind(rg.recon.mask, std::move(in.mask));
        rsess.bind(rg.truth, pack_complex(train_x[static_cast<size_t>(item)]));
        rsess.forward();

        double nll = static_cast<double>(rsess.value(rg.nll)[0]);
        double adv = static_cast<double>(rsess.value(rg.adv)[0]);
        if (!std::isfinite(nll) || !std::isfinite(adv))
          abort_non_finite("reconstructor loss", epoch,
                           train_set.items[static_cast<size_t>(item)].id,
                           "nll=" + fmt_g(nll) + ", adv=" + fmt_g(adv));
        train_nll_sum += nll;
        ++train_items;

        rsess.zero_grads();
        rsess.backward_scalar(rg.loss);
        accumulate_grads(rg_grads, rsess, recon_params, inv_batch);
      }
      clip_grad_norm(rg_grads, cfg.clip_norm);
      opt_recon.step(params, rg_grads, lr);
    }

    // validation on the fixed masks
    double mse_sum = 0.0, ssim_sum = 0.0, nll_sum = 0.0, eval_sum = 0.0;
    for (int i = 0; i < val_set.count(); ++i) {
      ItemInputs in = make_inputs(val_y[static_cast<size_t>(i)], val_masks[static_cast<size_t>(i)]);
      rsess.bind(rg.recon.xhat, std::move(in.xhat));
      rsess.bind(rg.recon.y_obs, std::move(in.y_obs));
      rsess.bind(rg.recon.mask, in.mask);
      rsess.bind(rg.truth, pack_complex(val_x[static_cast<size_t>(i)]));
      rsess.forward();

      Tensor r_final = rsess.value(rg.recon.r.back());
      ComplexImage r_img = unpack_complex(r_final, Domain::kImage);
      DTensor u = uncertainty_grid(rsess.value(rg.recon.u.back()));

      mse_sum += mse(r_img, val_x[static_cast<size_t>(i)]);
      ssim_sum += ssim(r_img.real_grid(), val_set.items[static_cast<size_t>(i)].grid);
      nll_sum += gaussian_nll(r_img, val_x[static_cast<size_t>(i)], u);

      std::vector<float> t =
          evaluator_targets(cfg.evaluator_loss_mode, r_img, val_x[static_cast<size_t>(i)],
                            val_masks[static_cast<size_t>(i)], cfg.gamma);
      Tensor targets({n});
      std::copy(t.begin(), t.end(), targets.ptr());
      esess.bind(eg.eval.image, std::move(r_final));
      esess.bind(eg.eval.mask, std::move(in.mask));
      esess.bind(eg.targets, std::move(targets));
      esess.forward();
      eval_sum += static_cast<double>(esess.value(eg.loss)[0]);
    }
    const double inv_val = 1.0 / static_cast<double>(val_set.count());

    TrainLogRow row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_nll = train_items > 0 ? train_nll_sum / static_cast<double>(train_items) : 0.0;
    row.val_mse = mse_sum * inv_val;
    row.val_ssim = ssim_sum * inv_val;
    row.val_nll = nll_sum * inv_val;
    row.val_eval_loss = eval_sum * inv_val;
    result.log.push_back(row);

    if (!run_dir.empty()) {
      std::ofstream lf(run_dir + "/train_log.csv");
      write_train_log_csv(lf, result.log);
    }

    if (row.val_mse < best_mse) {
      best_mse = row.val_mse;
      result.best_epoch = epoch;
      result.best_params = params;
    }

    nll_history.push_back(row.val_nll);
    if (nll_diverged(nll_history)) {
      std::ostringstream os;
      os << "training aborted: validation NLL diverged at epoch " << epoch
         << " (latest=" << fmt_g(row.val_nll) << ")";
      throw std::runtime_error(os.str());
    }
  }

  result.params = params;
  if (!run_dir.empty()) {
    save_checkpoint(run_dir + "/checkpoint_final.aksp", result.params);
    save_checkpoint(run_dir + "/checkpoint_best.aksp", result.best_params);
  }
  return result;
}

}  // namespace akspace
