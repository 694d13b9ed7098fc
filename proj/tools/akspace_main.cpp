// Command-line front end: data generation, training, metric sweeps, and the
// closed-loop acquisition simulator. Every subcommand echoes its effective
// configuration to <out>/config.txt before doing any work, so a run can be
// reproduced from the echo plus the seed alone.
//
// Exit codes: 0 success, 2 for usage or configuration problems (bad flags,
// missing inputs, invalid grids), 1 for failures during computation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "akspace/acquisition.hpp"
#include "akspace/csv.hpp"
#include "akspace/data.hpp"
#include "akspace/metrics.hpp"
#include "akspace/models.hpp"
#include "akspace/training.hpp"

namespace fs = std::filesystem;
using namespace akspace;

namespace {

// ---------- shared plumbing ----------

uint64_t default_seed() {
  const char* env = std::getenv("AKSPACE_SEED");
  if (env == nullptr || *env == '\0') return 1;
  return std::strtoull(env, nullptr, 10);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Expands `--config file` into option arguments. The file holds one key=value
// pair per line (keys are the long option names without dashes); values given
// on the command line win because they come later in the argument list.
std::vector<std::string> inject_config(const std::vector<std::string>& args) {
  std::string path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty() || args.empty()) return args;

  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot read config file: " + path);
  std::vector<std::string> out;
  out.push_back(args[0]);  // the subcommand name stays in front
  std::string line;
  while (std::getline(f, line)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line is not key=value: " + t);
    out.push_back("--" + trim(t.substr(0, eq)) + "=" + trim(t.substr(eq + 1)));
  }
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

using Echo = std::vector<std::pair<std::string, std::string>>;

void write_echo(const std::string& out_dir, const Echo& kv) {
  fs::create_directories(out_dir);
  std::ofstream f(out_dir + "/config.txt");
  if (!f) throw std::runtime_error("cannot write " + out_dir + "/config.txt");
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
}

std::string fmt_u64(uint64_t v) { return std::to_string(v); }

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << body;
}

Dataset load_data_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("data directory not found: " + dir);
  return load_dataset(dir);
}

// Architecture hyperparameters are recoverable from checkpoint tensor shapes;
// only the grid size has to come from the dataset (the reconstructor is fully
// convolutional, so its parameters never mention N).
ReconstructorConfig infer_recon_config(const ParamStore& p, int n) {
  if (!p.has("recon.mod1.enc1.w"))
    throw std::invalid_argument("checkpoint holds no reconstructor parameters");
  ReconstructorConfig cfg;
  cfg.n = n;
  cfg.base_channels = static_cast<int>(p.get("recon.mod1.enc1.w").dims[0]);
  cfg.cascades = 0;
  while (p.has("recon.mod" + std::to_string(cfg.cascades + 1) + ".enc1.w")) ++cfg.cascades;
  cfg.resblocks = 0;
  while (p.has("recon.mod1.res" + std::to_string(cfg.resblocks + 1) + ".conv1.w"))
    ++cfg.resblocks;
  return cfg;
}

EvaluatorConfig infer_eval_config(const ParamStore& p, int n) {
  if (!p.has("eval.proj.w"))
    throw std::invalid_argument("checkpoint holds no evaluator parameters");
  EvaluatorConfig cfg;
  cfg.n = static_cast<int>(p.get("eval.proj.w").dims[0]);
  if (cfg.n != n)
    throw std::invalid_argument("checkpoint evaluator size " + std::to_string(cfg.n) +
                                " does not match dataset size " + std::to_string(n));
  cfg.embed_channels = static_cast<int>(p.get("eval.embed.w").dims[0]);
  return cfg;
}

double mean_of(const Tensor& t) {
  double s = 0.0;
  for (float v : t.data) s += v;
  return t.data.empty() ? 0.0 : s / static_cast<double>(t.data.size());
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("bad grid entry: " + tok);
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty grid");
  return out;
}

// Pair count that realizes a requested coverage level. The coverage ratio is
// counted against N/2 while there are N/2+1 pair slots, so level 1.0 must map
// to full observation rather than to round(N/2) slots.
int pairs_for_level(double level, int n) {
  if (level >= 1.0) return n / 2 + 1;
  return static_cast<int>(std::lround(level * (n / 2)));
}

SamplingMask mask_for_target(Rng& rng, int n, int fixed_rows, int target) {
  if (target <= n / 2) return sample_mask_with_pairs(rng, n, fixed_rows, target);
  SamplingMask m(n);
  for (int i = 0; i < n; ++i) m.observe(i);
  return m;
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  double s = 0.0, s2 = 0.0;
  for (double v : xs) {
    s += v;
    s2 += v * v;
  }
  double inv = 1.0 / static_cast<double>(xs.size());
  r.mean = s * inv;
  r.stddev = std::sqrt(std::max(0.0, s2 * inv - r.mean * r.mean));
  return r;
}

// ---------- gen-data ----------

int cmd_gen_data(const std::string& out, int count, int size, const std::string& from_dir,
                 uint64_t seed) {
  try {
    if (from_dir.empty() && count < 1)
      throw std::invalid_argument("--count must be at least 1");
    if (!from_dir.empty() && !fs::is_directory(from_dir))
      throw std::invalid_argument("image directory not found: " + from_dir);
    write_echo(out, {{"subcommand", "gen-data"},
                     {"out", out},
                     {"count", std::to_string(count)},
                     {"size", std::to_string(size)},
                     {"from_dir", from_dir},
                     {"seed", fmt_u64(seed)}});
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    Dataset ds = from_dir.empty() ? generate_phantoms(seed, count, size)
                                  : load_image_dir(from_dir, size);
    save_dataset(out, ds);
    std::cout << "wrote " << ds.count() << " images to " << out << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------- train ----------

struct TrainArgs {
  std::string data, val_data, out;
  double val_frac = 0.125;
  TrainConfig cfg;
  std::string loss_mode = "kernel";
};

int cmd_train(TrainArgs& a) {
  Dataset train_set, val_set;
  try {
    Dataset ds = load_data_dir(a.data);
    if (!a.val_data.empty()) {
      train_set = ds;
      val_set = load_data_dir(a.val_data);
    } else {
      int val_n = std::max(1, static_cast<int>(std::lround(a.val_frac * ds.count())));
      if (val_n >= ds.count())
        throw std::invalid_argument("validation split leaves no training images");
      train_set.items.assign(ds.items.begin(), ds.items.end() - val_n);
      val_set.items.assign(ds.items.end() - val_n, ds.items.end());
    }
    train_set.split_tag = "train";
    val_set.split_tag = "val";
    if (val_set.n() != train_set.n())
      throw std::invalid_argument("train and validation image sizes differ");

    int n = train_set.n();
    a.cfg.recon.n = n;
    a.cfg.eval.n = n;
    a.cfg.masks.n = n;
    a.cfg.evaluator_loss_mode = parse_evaluator_loss_mode(a.loss_mode);
    a.cfg.validate();

    Echo echo = {{"subcommand", "train"},
                 {"data", a.data},
                 {"val_data", a.val_data},
                 {"val_frac", fmt_g(a.val_frac)},
                 {"out", a.out},
                 {"train_count", std::to_string(train_set.count())},
                 {"val_count", std::to_string(val_set.count())}};
    std::ostringstream body;
    write_config_echo(body, a.cfg);
    std::istringstream lines(body.str());
    for (std::string line; std::getline(lines, line);) {
      auto eq = line.find('=');
      if (eq != std::string::npos) echo.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    write_echo(a.out, echo);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    TrainResult res = train(train_set, val_set, a.cfg, a.out);
    std::cout << "trained " << a.cfg.total_epochs() << " epochs; best val mse "
              << fmt_g(res.log[static_cast<size_t>(res.best_epoch) - 1].val_mse)
              << " at epoch " << res.best_epoch << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------- evaluate ----------

struct EvaluateArgs {
  std::string data, checkpoint, out;
  std::string kma_grid = "0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5";
  int masks_per_image = 1;
  int fixed_low_rows = 4;
  uint64_t seed = 1;
  bool boxplot = false;
  bool uncertainty_corr = false;
  int corr_pairs = 200;
  double corr_lo = 0.1, corr_hi = 0.95;
};

int cmd_evaluate(const EvaluateArgs& a) {
  Dataset ds;
  std::vector<double> grid;
  ReconstructorConfig rc;
  ParamStore params;
  try {
    ds = load_data_dir(a.data);
    grid = parse_grid(a.kma_grid);
    for (double v : grid)
      if (!(v > 0.0) || v > 1.0)
        throw std::invalid_argument("coverage level " + fmt_g(v) + " outside (0,1]");
    if (a.masks_per_image < 1) throw std::invalid_argument("--masks-per-image must be >= 1");
    if (a.uncertainty_corr) {
      if (a.corr_pairs < 2) throw std::invalid_argument("--corr-pairs must be >= 2");
      if (!(a.corr_lo > 0.0) || a.corr_hi > 1.0 || a.corr_lo > a.corr_hi)
        throw std::invalid_argument("correlation coverage range outside (0,1]");
    }
    params = load_checkpoint(a.checkpoint);
    rc = infer_recon_config(params, ds.n());
    write_echo(a.out, {{"subcommand", "evaluate"},
                       {"data", a.data},
                       {"checkpoint", a.checkpoint},
                       {"out", a.out},
                       {"kma_grid", a.kma_grid},
                       {"masks_per_image", std::to_string(a.masks_per_image)},
                       {"fixed_low_rows", std::to_string(a.fixed_low_rows)},
                       {"boxplot", a.boxplot ? "1" : "0"},
                       {"uncertainty_correlation", a.uncertainty_corr ? "1" : "0"},
                       {"corr_pairs", std::to_string(a.corr_pairs)},
                       {"corr_kma_lo", fmt_g(a.corr_lo)},
                       {"corr_kma_hi", fmt_g(a.corr_hi)},
                       {"seed", fmt_u64(a.seed)}});
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    Reconstructor recon(rc, std::move(params));
    const int n = ds.n();

    std::ostringstream metrics, box;
    metrics << "kma,mse_mean,mse_std,ssim_mean,ssim_std\n";
    box << "image_id,kma,mse\n";
    for (size_t li = 0; li < grid.size(); ++li) {
      Rng rng(Rng::mix(a.seed, li));
      int target = pairs_for_level(grid[li], n);
      std::vector<double> mses, ssims;
      for (const DatasetItem& item : ds.items) {
        ComplexImage y = simulate_kspace(item.grid);
        for (int rep = 0; rep < a.masks_per_image; ++rep) {
          SamplingMask m = mask_for_target(rng, n, a.fixed_low_rows, target);
          ComplexImage xhat = zero_fill(apply_mask(y, m));
          ComplexImage r = recon.reconstruct(xhat, m).final_image();
          double e = mse(r.real_grid(), item.grid);
          mses.push_back(e);
          ssims.push_back(ssim(r.real_grid(), item.grid));
          if (a.boxplot)
            box << item.id << "," << fmt_g(grid[li]) << "," << fmt_g(e) << "\n";
        }
      }
      MeanStd me = mean_std(mses), se = mean_std(ssims);
      metrics << fmt_g(grid[li]) << "," << fmt_g(me.mean) << "," << fmt_g(me.stddev) << ","
              << fmt_g(se.mean) << "," << fmt_g(se.stddev) << "\n";
    }
    write_text(a.out + "/metrics.csv", metrics.str());
    if (a.boxplot) write_text(a.out + "/boxplot.csv", box.str());

    if (a.uncertainty_corr) {
      Rng rng(Rng::mix(a.seed, 0x636f7272));
      std::ostringstream pairs;
      pairs << "image_id,kma,mse,mean_uncertainty\n";
      std::vector<double> es, us;
      for (int i = 0; i < a.corr_pairs; ++i) {
        const DatasetItem& item = ds.items[static_cast<size_t>(i) % ds.items.size()];
        double level = rng.uniform(a.corr_lo, a.corr_hi);
        int target = pairs_for_level(level, n);
        SamplingMask m = mask_for_target(rng, n, a.fixed_low_rows, target);
        ComplexImage y = simulate_kspace(item.grid);
        ReconstructionResult res = recon.reconstruct(zero_fill(apply_mask(y, m)), m);
        double e = mse(res.final_image().real_grid(), item.grid);
        double u = mean_of(res.final_uncertainty());
        es.push_back(e);
        us.push_back(u);
        pairs << item.id << "," << fmt_g(kma(m)) << "," << fmt_g(e) << "," << fmt_g(u) << "\n";
      }
      double rho = pearson(es, us);
      write_text(a.out + "/uncertainty_pairs.csv", pairs.str());
      write_text(a.out + "/pearson.txt", fmt_g(rho) + "\n");
      std::cout << "pearson " << fmt_g(rho) << " over " << a.corr_pairs << " pairs\n";
    }
    std::cout << "wrote " << a.out << "/metrics.csv (" << grid.size() << " levels, "
              << ds.count() << " images)\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------- simulate ----------

struct SimulateArgs {
  std::string data, image_id, policy_name, checkpoint, out;
  int budget = -1;
  double stop_uncertainty = -1.0;
  int fixed_low_rows = 4;
  bool frames = false;
  uint64_t seed = 1;
};

int cmd_simulate(const SimulateArgs& a) {
  Dataset ds;
  Policy policy;
  StopCriteria stop;
  std::unique_ptr<Reconstructor> recon;
  std::unique_ptr<Evaluator> eval;
  const DatasetItem* item = nullptr;
  try {
    policy.kind = parse_policy(a.policy_name);
    policy.seed = a.seed;
    bool needs_eval = policy.kind == PolicyKind::kEvaluatorGreedy;
    bool needs_model = uses_reconstructor(policy.kind) || needs_eval;
    if (needs_model && a.checkpoint.empty())
      throw std::invalid_argument("policy " + a.policy_name + " requires --checkpoint");

    ds = load_data_dir(a.data);
    item = &ds.items.front();
    if (!a.image_id.empty()) {
      item = nullptr;
      for (const DatasetItem& it : ds.items)
        if (it.id == a.image_id) item = &it;
      if (item == nullptr) throw std::invalid_argument("image not found: " + a.image_id);
    }
    const int n = ds.n();

    if (!a.checkpoint.empty()) {
      ParamStore params = load_checkpoint(a.checkpoint);
      if (uses_reconstructor(policy.kind))
        recon = std::make_unique<Reconstructor>(infer_recon_config(params, n), params);
      if (params.has("eval.proj.w"))
        eval = std::make_unique<Evaluator>(infer_eval_config(params, n), params);
      if (needs_eval && !eval)
        throw std::invalid_argument("checkpoint holds no evaluator parameters");
    }

    stop.budget = a.budget;
    stop.uncertainty_threshold = a.stop_uncertainty;
    if (stop.budget < 0 && stop.uncertainty_threshold < 0.0)
      stop.budget = n / 2 + 1;  // more slots than any mask leaves open
    stop.validate();

    write_echo(a.out, {{"subcommand", "simulate"},
                       {"data", a.data},
                       {"image", item->id},
                       {"policy", a.policy_name},
                       {"checkpoint", a.checkpoint},
                       {"out", a.out},
                       {"budget", std::to_string(stop.budget)},
                       {"stop_uncertainty", fmt_g(stop.uncertainty_threshold)},
                       {"fixed_low_rows", std::to_string(a.fixed_low_rows)},
                       {"frames", a.frames ? "1" : "0"},
                       {"seed", fmt_u64(a.seed)}});
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    const int n = ds.n();
    SamplingMask init = fixed_low_freq_mask(n, a.fixed_low_rows);
    std::string frame_dir = a.out + "/frames";
    if (a.frames) fs::create_directories(frame_dir);

    StepHook hook;
    if (a.frames) {
      const DTensor& truth = item->grid;
      hook = [&frame_dir, &truth, n](const AcquisitionState& s, const TraceRow& row) {
        char tag[16];
        std::snprintf(tag, sizeof(tag), "step_%03d", row.step);
        const ComplexImage& img = current_image(s);
        DTensor mag({n, n}), err({n, n});
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            mag.at(i, j) = std::hypot(img.re(i, j), img.im(i, j));
            err.at(i, j) = std::hypot(img.re(i, j) - truth.at(i, j), img.im(i, j));
          }
        save_pgm(frame_dir + "/" + tag + "_recon.pgm", mag);
        save_pgm(frame_dir + "/" + tag + "_error.pgm", err);
        if (s.has_reconstruction) {
          const Tensor& u = s.recon.final_uncertainty();
          DTensor ug({n, n});
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) ug.at(i, j) = u.data[static_cast<size_t>(i) * n + j];
          save_pgm(frame_dir + "/" + tag + "_uncertainty.pgm", ug);
        }
      };
    }

    AcquisitionTrace trace =
        run_simulation(policy, item->grid, init, stop, recon.get(), eval.get(), hook);
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    write_text(a.out + "/trace.csv", csv.str());

    const TraceRow& last = trace.rows.back();
    std::cout << "stop=" << to_string(trace.stop) << " steps=" << last.step
              << " kma=" << fmt_g(last.kma) << " mse=" << fmt_g(last.mse)
              << " ssim=" << fmt_g(last.ssim) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------- compare-policies ----------

struct CompareArgs {
  std::string data, policies_csv, checkpoint, out;
  int budget = -1;
  int fixed_low_rows = 4;
  uint64_t seed = 1;
};

int cmd_compare(const CompareArgs& a) {
  Dataset ds;
  std::vector<Policy> policies;
  std::unique_ptr<Reconstructor> recon;
  std::unique_ptr<Evaluator> eval;
  int budget = a.budget;
  try {
    std::stringstream ss(a.policies_csv);
    std::string tok;
    bool needs_recon = false, needs_eval = false;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      Policy p;
      p.kind = parse_policy(tok);
      p.seed = a.seed;
      needs_recon = needs_recon || uses_reconstructor(p.kind);
      needs_eval = needs_eval || p.kind == PolicyKind::kEvaluatorGreedy;
      policies.push_back(p);
    }
    if (policies.empty()) throw std::invalid_argument("no policies given");
    if ((needs_recon || needs_eval) && a.checkpoint.empty())
      throw std::invalid_argument("selected policies require --checkpoint");

    ds = load_data_dir(a.data);
    const int n = ds.n();
    if (!a.checkpoint.empty()) {
      ParamStore params = load_checkpoint(a.checkpoint);
      if (needs_recon)
        recon = std::make_unique<Reconstructor>(infer_recon_config(params, n), params);
      if (needs_eval)
        eval = std::make_unique<Evaluator>(infer_eval_config(params, n), params);
    }
    if (budget < 0) budget = n / 2 + 1;

    write_echo(a.out, {{"subcommand", "compare-policies"},
                       {"data", a.data},
                       {"policies", a.policies_csv},
                       {"checkpoint", a.checkpoint},
                       {"out", a.out},
                       {"budget", std::to_string(budget)},
                       {"fixed_low_rows", std::to_string(a.fixed_low_rows)},
                       {"seed", fmt_u64(a.seed)}});
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    SamplingMask init = fixed_low_freq_mask(ds.n(), a.fixed_low_rows);
    std::vector<PolicyCurve> curves =
        compare_policies(policies, ds, init, budget, recon.get(), eval.get());
    std::ostringstream cs, as;
    write_policy_curves_csv(cs, curves);
    write_policy_auc_csv(as, curves);
    write_text(a.out + "/curves.csv", cs.str());
    write_text(a.out + "/auc.csv", as.str());
    for (const PolicyCurve& c : curves)
      std::cout << "policy=" << to_string(c.policy.kind) << " auc=" << fmt_g(c.auc_mse)
                << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

// ---------- argument wiring ----------

int main(int argc, char** argv) {
  CLI::App app{"k-space acquisition and reconstruction toolkit"};
  app.require_subcommand(1);
  uint64_t seed = default_seed();
  std::string config_path;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate or import a dataset");
  gen->add_option("--config", config_path, "file of key=value option lines");
  std::string gen_out, gen_from;
  int gen_count = 0, gen_size = 32;
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--count", gen_count, "number of phantoms to generate");
  gen->add_option("--size", gen_size, "image size N");
  gen->add_option("--from-dir", gen_from, "import 8-bit PGM images from this directory");
  gen->add_option("--seed", seed, "rng seed");

  // train
  auto* tr = app.add_subcommand("train", "train reconstructor and evaluator");
  tr->add_option("--config", config_path, "file of key=value option lines");
  TrainArgs ta;
  tr->add_option("--data", ta.data, "training dataset directory")->required();
  tr->add_option("--val-data", ta.val_data, "separate validation dataset directory");
  tr->add_option("--val-frac", ta.val_frac, "fraction split off for validation");
  tr->add_option("--out", ta.out, "run directory for logs and checkpoints")->required();
  tr->add_option("--epochs-constant", ta.cfg.epochs_constant, "epochs at constant lr");
  tr->add_option("--epochs-decay", ta.cfg.epochs_decay, "epochs of linear lr decay");
  tr->add_option("--batch-size", ta.cfg.batch_size, "images per optimizer step");
  tr->add_option("--lr", ta.cfg.adam.lr, "base learning rate");
  tr->add_option("--beta", ta.cfg.beta, "adversarial score weight");
  tr->add_option("--gamma", ta.cfg.gamma, "target kernel sharpness");
  tr->add_option("--evaluator-loss", ta.loss_mode, "evaluator target mode: kernel or binary");
  tr->add_option("--clip-norm", ta.cfg.clip_norm, "gradient clipping norm");
  tr->add_option("--val-pairs", ta.cfg.val_pairs, "pair count for validation masks (0: N/8)");
  tr->add_option("--base-channels", ta.cfg.recon.base_channels, "reconstructor width");
  tr->add_option("--cascades", ta.cfg.recon.cascades, "cascade count");
  tr->add_option("--resblocks", ta.cfg.recon.resblocks, "residual blocks per cascade");
  tr->add_option("--embed-channels", ta.cfg.eval.embed_channels, "evaluator mask embedding");
  tr->add_option("--fixed-low-rows", ta.cfg.masks.fixed_low_rows, "always-observed rows");
  tr->add_option("--min-pairs", ta.cfg.masks.min_pairs, "minimum pairs per training mask");
  tr->add_option("--max-pairs", ta.cfg.masks.max_pairs, "maximum pairs per training mask");
  tr->add_option("--seed", seed, "rng seed");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "metric sweep over coverage levels");
  ev->add_option("--config", config_path, "file of key=value option lines");
  EvaluateArgs ea;
  ev->add_option("--data", ea.data, "test dataset directory")->required();
  ev->add_option("--checkpoint", ea.checkpoint, "model checkpoint")->required();
  ev->add_option("--out", ea.out, "output directory")->required();
  ev->add_option("--kma", ea.kma_grid, "comma-separated coverage levels in (0,1]");
  ev->add_option("--masks-per-image", ea.masks_per_image, "fresh masks per image per level");
  ev->add_option("--fixed-low-rows", ea.fixed_low_rows, "always-observed rows");
  ev->add_flag("--boxplot", ea.boxplot, "emit per-image mse distribution");
  ev->add_flag("--uncertainty-correlation", ea.uncertainty_corr,
               "emit (mse, mean uncertainty) pairs and their pearson coefficient");
  ev->add_option("--corr-pairs", ea.corr_pairs, "sample count for the correlation");
  ev->add_option("--corr-kma-lo", ea.corr_lo, "correlation coverage lower bound");
  ev->add_option("--corr-kma-hi", ea.corr_hi, "correlation coverage upper bound");
  ev->add_option("--seed", seed, "rng seed");

  // simulate
  auto* si = app.add_subcommand("simulate", "closed-loop acquisition on one image");
  si->add_option("--config", config_path, "file of key=value option lines");
  SimulateArgs sa;
  si->add_option("--data", sa.data, "dataset directory")->required();
  si->add_option("--image", sa.image_id, "image id (default: first in the dataset)");
  si->add_option("--policy", sa.policy_name,
                 "random-c, random-cr, order-c, order-cr, eval-greedy, oracle-greedy")
      ->required();
  si->add_option("--checkpoint", sa.checkpoint, "model checkpoint");
  si->add_option("--out", sa.out, "output directory")->required();
  si->add_option("--budget", sa.budget, "acquisition budget in pairs (-1: run to completion)");
  si->add_option("--stop-uncertainty", sa.stop_uncertainty,
                 "halt once mean uncertainty drops below this");
  si->add_option("--fixed-low-rows", sa.fixed_low_rows, "always-observed rows");
  si->add_flag("--frames", sa.frames, "dump per-step pgm frames");
  si->add_option("--seed", seed, "rng seed");

  // compare-policies
  auto* cp = app.add_subcommand("compare-policies", "mean error curves across policies");
  cp->add_option("--config", config_path, "file of key=value option lines");
  CompareArgs ca;
  cp->add_option("--data", ca.data, "dataset directory")->required();
  cp->add_option("--policies", ca.policies_csv, "comma-separated policy names")->required();
  cp->add_option("--checkpoint", ca.checkpoint, "model checkpoint");
  cp->add_option("--out", ca.out, "output directory")->required();
  cp->add_option("--budget", ca.budget, "acquisition budget in pairs (-1: run to completion)");
  cp->add_option("--fixed-low-rows", ca.fixed_low_rows, "always-observed rows");
  cp->add_option("--seed", seed, "rng seed");

  for (auto* sc : {gen, tr, ev, si, cp})
    for (CLI::Option* o : sc->get_options())
      o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = inject_config(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // help and version exit cleanly, everything else is usage
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  if (gen->parsed()) return cmd_gen_data(gen_out, gen_count, gen_size, gen_from, seed);
  if (tr->parsed()) {
    ta.cfg.seed = seed;
    return cmd_train(ta);
  }
  if (ev->parsed()) {
    ea.seed = seed;
    return cmd_evaluate(ea);
  }
  if (si->parsed()) {
    sa.seed = seed;
    return cmd_simulate(sa);
  }
  if (cp->parsed()) {
    ca.seed = seed;
    return cmd_compare(ca);
  }
  return 2;
}
