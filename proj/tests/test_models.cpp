#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "akspace/kspace.hpp"
#include "akspace/metrics.hpp"
#include "akspace/models.hpp"
#include "akspace/rng.hpp"
#include "doctest.h"

using namespace akspace;

namespace {

ReconstructorConfig small_recon_cfg() {
  ReconstructorConfig cfg;
  cfg.n = 16;
  cfg.base_channels = 4;
  cfg.cascades = 2;
  cfg.resblocks = 1;
  return cfg;
}

EvaluatorConfig small_eval_cfg() {
  EvaluatorConfig cfg;
  cfg.n = 16;
  return cfg;
}

DTensor random_grid(int n, uint64_t seed) {
  Rng rng(seed);
  DTensor g({n, n});
  for (int64_t i = 0; i < g.numel(); ++i) g[i] = rng.normal();
  return g;
}

SamplingMask pair_mask(int n, const std::vector<int>& pairs) {
  SamplingMask m(n);
  for (int p : pairs) {
    m.observe(p);
    m.observe(conjugate_pair(p, n));
  }
  return m;
}

ComplexImage zero_fill_estimate(const DTensor& grid, const SamplingMask& mask) {
  return zero_fill(apply_mask(simulate_kspace(grid), mask));
}

// pushes the zero-initialized residual heads away from zero so the modules
// produce nontrivial residuals and uncertainties
void randomize_heads(Reconstructor& model, uint64_t seed, float scale) {
  Rng rng(seed);
  for (auto& [name, t] : model.params().tensors)
    if (name.find(".head.") != std::string::npos)
      for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<float>(rng.normal()) * scale;
}

}  // namespace

TEST_CASE("untrained reconstructor is the identity with unit uncertainty") {
  auto cfg = small_recon_cfg();
  auto model = Reconstructor::randomly_initialized(cfg, 41);

  DTensor grid = random_grid(cfg.n, 7);
  SamplingMask mask = pair_mask(cfg.n, {0, 1, 2, 5});
  ComplexImage xhat = zero_fill_estimate(grid, mask);

  auto res = model.reconstruct(xhat, mask);
  REQUIRE(static_cast<int>(res.images.size()) == cfg.cascades);
  REQUIRE(static_cast<int>(res.uncertainties.size()) == cfg.cascades);

  for (int k = 0; k < cfg.cascades; ++k) {
    const ComplexImage& r = res.images[static_cast<size_t>(k)];
    for (int i = 0; i < cfg.n; ++i)
      for (int j = 0; j < cfg.n; ++j) {
        CHECK(std::abs(r.re(i, j) - xhat.re(i, j)) < 1e-5);
        CHECK(std::abs(r.im(i, j) - xhat.im(i, j)) < 1e-5);
      }
    for (float v : res.uncertainties[static_cast<size_t>(k)].data)
      CHECK(std::abs(v - 1.f) < 1e-6f);
  }
}

TEST_CASE("observed rows are hard-copied by every cascade") {
  auto cfg = small_recon_cfg();
  cfg.cascades = 3;
  auto model = Reconstructor::randomly_initialized(cfg, 43);
  randomize_heads(model, 91, 0.3f);

  DTensor grid = random_grid(cfg.n, 8);
  SamplingMask mask = pair_mask(cfg.n, {0, 1, 6});
  ComplexImage xhat = zero_fill_estimate(grid, mask);
  ComplexImage ks_x = dft2(xhat);

  auto res = model.reconstruct(xhat, mask);
  REQUIRE(res.images.size() == 3);

  for (const ComplexImage& r : res.images) {
    ComplexImage ks_r = dft2(r);
    double worst_observed = 0.0, max_unobserved = 0.0;
    for (int i = 0; i < cfg.n; ++i)
      for (int j = 0; j < cfg.n; ++j) {
        double d = std::hypot(ks_r.re(i, j) - ks_x.re(i, j), ks_r.im(i, j) - ks_x.im(i, j));
        if (mask.is_observed(i))
          worst_observed = std::max(worst_observed, d);
        else
          max_unobserved = std::max(max_unobserved, d);
      }
    CHECK(worst_observed < 1e-5);
    // nonzero heads must actually write something into the free rows
    CHECK(max_unobserved > 1e-4);
  }
}

TEST_CASE("uncertainty stays inside the clamp range") {
  auto cfg = small_recon_cfg();
  cfg.cascades = 1;
  auto model = Reconstructor::randomly_initialized(cfg, 47);
  // enormous bias on the log-variance channel saturates the clamp
  model.params().get("recon.mod1.head.b")[2] = 1e6f;

  DTensor grid = random_grid(cfg.n, 9);
  SamplingMask mask = pair_mask(cfg.n, {0, 1});
  ComplexImage xhat = zero_fill_estimate(grid, mask);
  auto res = model.reconstruct(xhat, mask);
  for (float v : res.uncertainties[0].data)
    CHECK(v == doctest::Approx(std::exp(10.f)).epsilon(1e-5));

  model.params().get("recon.mod1.head.b")[2] = -1e6f;
  auto res2 = model.reconstruct(xhat, mask);
  for (float v : res2.uncertainties[0].data)
    CHECK(v == doctest::Approx(std::exp(-10.f)).epsilon(1e-5));
}

TEST_CASE("reconstruction is deterministic in inputs and parameters") {
  auto cfg = small_recon_cfg();
  auto model = Reconstructor::randomly_initialized(cfg, 53);
  randomize_heads(model, 99, 0.2f);

  DTensor grid = random_grid(cfg.n, 10);
  SamplingMask mask = pair_mask(cfg.n, {0, 2, 3});
  ComplexImage xhat = zero_fill_estimate(grid, mask);

  auto a = model.reconstruct(xhat, mask);
  auto b = model.reconstruct(xhat, mask);
  const int64_t nn = static_cast<int64_t>(cfg.n) * cfg.n;
  for (size_t k = 0; k < a.images.size(); ++k) {
    CHECK(std::memcmp(a.images[k].re_data(), b.images[k].re_data(), sizeof(double) * nn) == 0);
    CHECK(std::memcmp(a.images[k].im_data(), b.images[k].im_data(), sizeof(double) * nn) == 0);
    CHECK(std::memcmp(a.uncertainties[k].ptr(), b.uncertainties[k].ptr(),
                      sizeof(float) * nn) == 0);
  }
}

TEST_CASE("reconstructor rejects bad inputs") {
  auto cfg = small_recon_cfg();
  auto model = Reconstructor::randomly_initialized(cfg, 59);

  DTensor grid = random_grid(cfg.n, 11);
  SamplingMask mask = pair_mask(cfg.n, {0, 1});
  ComplexImage xhat = zero_fill_estimate(grid, mask);

  SamplingMask lopsided(cfg.n);
  lopsided.observe(3);  // row 13 missing
  CHECK_THROWS(model.reconstruct(xhat, lopsided));

  SamplingMask wrong_size(cfg.n * 2);
  CHECK_THROWS(model.reconstruct(xhat, wrong_size));

  ComplexImage in_kspace = simulate_kspace(grid);
  CHECK_THROWS(model.reconstruct(in_kspace, mask));
}

TEST_CASE("reconstructor config validation") {
  ReconstructorConfig cfg = small_recon_cfg();
  cfg.n = 30;
  CHECK_THROWS(cfg.validate());
  cfg = small_recon_cfg();
  cfg.base_channels = 5;
  CHECK_THROWS(cfg.validate());
  cfg = small_recon_cfg();
  cfg.cascades = 0;
  CHECK_THROWS(cfg.validate());
  cfg = small_recon_cfg();
  cfg.log_var_lo = 2.f;
  cfg.log_var_hi = -2.f;
  CHECK_THROWS(cfg.validate());
  CHECK_NOTHROW(small_recon_cfg().validate());
}

TEST_CASE("evaluator emits one finite score per row") {
  auto cfg = small_eval_cfg();
  auto eval = Evaluator::randomly_initialized(cfg, 61);

  DTensor grid = random_grid(cfg.n, 12);
  SamplingMask mask = pair_mask(cfg.n, {0, 1, 4});
  ComplexImage r = zero_fill_estimate(grid, mask);

  auto scores = eval.score(r, mask);
  CHECK(static_cast<int>(scores.size()) == cfg.n);
  for (float v : scores) CHECK(std::isfinite(v));
}

TEST_CASE("evaluator with zero parameters emits a constant score vector") {
  auto cfg = small_eval_cfg();
  GraphBuilder b;
  append_evaluator(b, cfg, "eval.");
  Graph g = b.take();
  ParamStore zeros;
  Rng rng(1);
  init_params(zeros, g, rng);
  for (auto& [name, t] : zeros.tensors) t.fill(0.f);

  Evaluator eval(cfg, std::move(zeros));
  DTensor grid = random_grid(cfg.n, 13);
  SamplingMask mask = pair_mask(cfg.n, {0, 2});
  auto scores = eval.score(zero_fill_estimate(grid, mask), mask);
  for (float v : scores) CHECK(v == 0.f);
}

TEST_CASE("evaluator consumes the mask") {
  auto cfg = small_eval_cfg();
  auto eval = Evaluator::randomly_initialized(cfg, 67);

  DTensor grid = random_grid(cfg.n, 14);
  SamplingMask m1 = pair_mask(cfg.n, {0, 1, 2});
  SamplingMask m2 = pair_mask(cfg.n, {0, 5, 6});
  ComplexImage r = zero_fill_estimate(grid, m1);

  auto s1 = eval.score(r, m1);
  auto s2 = eval.score(r, m2);
  double diff = 0;
  for (size_t i = 0; i < s1.size(); ++i) diff += std::abs(s1[i] - s2[i]);
  CHECK(diff > 1e-6);
}

TEST_CASE("swapping two free k-space rows swaps their band maps") {
  const int n = 16;
  DTensor grid = random_grid(n, 15);
  ComplexImage ks = simulate_kspace(grid);

  const int a = 3, b = 6;  // nothing special about these rows
  ComplexImage ks2(n, Domain::kKspace);
  for (int i = 0; i < n; ++i) {
    int src = (i == a) ? b : (i == b) ? a : i;
    for (int j = 0; j < n; ++j) ks2.set(i, j, ks.re(src, j), ks.im(src, j));
  }

  SpectralMapStack maps1 = spectral_decompose(zero_fill(ks));
  SpectralMapStack maps2 = spectral_decompose(zero_fill(ks2));
  REQUIRE(maps1.n() == n);

  for (int i = 0; i < n; ++i) {
    int src = (i == a) ? b : (i == b) ? a : i;
    for (int64_t t = 0; t < maps1.maps[static_cast<size_t>(i)].numel(); ++t)
      CHECK(std::abs(maps2.maps[static_cast<size_t>(i)][t] -
                     maps1.maps[static_cast<size_t>(src)][t]) < 1e-9);
  }
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  auto cfg = small_recon_cfg();
  auto model = Reconstructor::randomly_initialized(cfg, 71);
  randomize_heads(model, 101, 0.5f);

  const std::string path = "ckpt_roundtrip.bin";
  save_checkpoint(path, model.params());
  ParamStore loaded = load_checkpoint(path);

  REQUIRE(loaded.tensors.size() == model.params().tensors.size());
  for (const auto& [name, t] : model.params().tensors) {
    REQUIRE(loaded.has(name));
    const Tensor& lt = loaded.get(name);
    REQUIRE(lt.dims == t.dims);
    CHECK(std::memcmp(lt.ptr(), t.ptr(), sizeof(float) * t.numel()) == 0);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects malformed files") {
  auto cfg = small_recon_cfg();
  auto model = Reconstructor::randomly_initialized(cfg, 73);
  const std::string path = "ckpt_malformed.bin";
  save_checkpoint(path, model.params());

  std::ifstream is(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();

  auto rewrite = [&](const std::string& b) {
    std::ofstream os(path, std::ios::binary);
    os.write(b.data(), static_cast<std::streamsize>(b.size()));
  };

  SUBCASE("wrong magic") {
    std::string b = bytes;
    b[0] = 'X';
    rewrite(b);
    CHECK_THROWS(load_checkpoint(path));
  }
  SUBCASE("unsupported version") {
    std::string b = bytes;
    b[4] = 9;
    rewrite(b);
    CHECK_THROWS(load_checkpoint(path));
  }
  SUBCASE("truncated") {
    rewrite(bytes.substr(0, bytes.size() - 7));
    CHECK_THROWS(load_checkpoint(path));
  }
  SUBCASE("trailing bytes") {
    rewrite(bytes + "junk");
    CHECK_THROWS(load_checkpoint(path));
  }
  SUBCASE("missing file") { CHECK_THROWS(load_checkpoint("no_such_ckpt.bin")); }

  std::remove(path.c_str());
}

TEST_CASE("checkpoint refuses to load into a mismatched architecture") {
  auto cfg = small_recon_cfg();
  auto model = Reconstructor::randomly_initialized(cfg, 79);
  const std::string path = "ckpt_mismatch.bin";
  save_checkpoint(path, model.params());
  ParamStore loaded = load_checkpoint(path);

  ReconstructorConfig wider = cfg;
  wider.base_channels = 8;
  CHECK_THROWS(Reconstructor(wider, loaded));

  ReconstructorConfig deeper = cfg;
  deeper.cascades = 3;
  ParamStore loaded2 = load_checkpoint(path);
  CHECK_THROWS(Reconstructor(deeper, loaded2));

  ParamStore loaded3 = load_checkpoint(path);
  CHECK_NOTHROW(Reconstructor(cfg, loaded3));
  std::remove(path.c_str());
}

TEST_CASE("checkpoint refuses non-finite parameters") {
  ParamStore p;
  Tensor t({2});
  t[0] = 1.f;
  t[1] = std::numeric_limits<float>::infinity();
  p.tensors.emplace("w", t);
  CHECK_THROWS(save_checkpoint("ckpt_nonfinite.bin", p));
  std::remove("ckpt_nonfinite.bin");
}

TEST_CASE("packing helpers round-trip complex grids") {
  DTensor grid = random_grid(8, 17);
  ComplexImage img = ComplexImage::from_real(grid, Domain::kImage);
  Tensor packed = pack_complex(img);
  REQUIRE(packed.dims == std::vector<int>{2, 8, 8});
  ComplexImage back = unpack_complex(packed, Domain::kImage);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      CHECK(std::abs(back.re(i, j) - img.re(i, j)) < 1e-6);
      CHECK(back.im(i, j) == 0.0);
    }

  SamplingMask m = pair_mask(8, {1, 3});
  Tensor mv = pack_mask(m);
  for (int i = 0; i < 8; ++i) CHECK(mv[i] == (m.is_observed(i) ? 1.f : 0.f));
}
