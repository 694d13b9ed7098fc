#include <doctest.h>

#include <cmath>
#include <sstream>

#include "akspace/metrics.hpp"
#include "akspace/rng.hpp"

using namespace akspace;

namespace {

DTensor random_grid(Rng& rng, int n) {
  DTensor g({n, n});
  for (auto& v : g.data) v = rng.uniform();
  return g;
}

}  // namespace

TEST_CASE("mse basics") {
  ComplexImage a(4, Domain::kImage), b(4, Domain::kImage);
  CHECK(mse(a, b) == 0.0);
  b.set(0, 0, 3.0, 4.0);
  CHECK(mse(a, b) == doctest::Approx(25.0 / 16.0).epsilon(1e-15));
  ComplexImage c(6, Domain::kImage);
  CHECK_THROWS(mse(a, c));
}

TEST_CASE("ssim identity, symmetry and degradation") {
  Rng rng(3);
  DTensor a = random_grid(rng, 16);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  DTensor b = a;
  for (auto& v : b.data) v += rng.normal(0, 0.05);
  double sab = ssim(a, b);
  double sba = ssim(b, a);
  CHECK(std::abs(sab - sba) < 1e-9);
  CHECK(sab < 1.0);
  CHECK(sab > 0.0);

  DTensor c = a;
  for (auto& v : c.data) v += rng.normal(0, 0.5);
  CHECK(ssim(a, c) < sab);  // heavier noise scores lower

  DTensor tiny({8, 8});
  CHECK_THROWS(ssim(tiny, tiny));

  DTensor flat({16, 16});
  flat.fill(0.7);
  CHECK(ssim(flat, flat) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("nll closed forms") {
  int n = 8;
  ComplexImage r(n, Domain::kImage), x(n, Domain::kImage);
  DTensor u({n, n});
  u.fill(1.0);
  // residual 0, unit variance: mean is log(2*pi)/2
  CHECK(gaussian_nll(r, x, u) == doctest::Approx(0.5 * std::log(2.0 * 3.14159265358979323846))
                                      .epsilon(1e-12));
  // each pixel residual sqrt(2): adds exactly 1
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r.set(i, j, 1.0, 1.0);
  CHECK(gaussian_nll(r, x, u) ==
        doctest::Approx(1.0 + 0.5 * std::log(2.0 * 3.14159265358979323846)).epsilon(1e-12));

  // minimizer in u is the squared residual
  DTensor ustar({n, n});
  ustar.fill(2.0);
  double at_star = gaussian_nll(r, x, ustar);
  for (double d : {0.5, 0.9, 1.1, 2.0}) {
    DTensor u2({n, n});
    u2.fill(2.0 * d);
    if (d != 1.0) CHECK(gaussian_nll(r, x, u2) > at_star);
  }

  DTensor bad({n, n});
  bad.fill(0.0);
  CHECK_THROWS(gaussian_nll(r, x, bad));
}

TEST_CASE("target scores: perfect reconstruction scores 1 everywhere") {
  Rng rng(5);
  DTensor g = random_grid(rng, 8);
  ComplexImage x = ComplexImage::from_real(g, Domain::kImage);
  TargetScores t = target_scores(x, x, 100.0);
  REQUIRE(t.t.size() == 8);
  for (double v : t.t) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("target scores drop with row error and match the k-space route") {
  Rng rng(9);
  DTensor g = random_grid(rng, 8);
  ComplexImage x = ComplexImage::from_real(g, Domain::kImage);
  ComplexImage y = dft2(x);
  // wipe rows 2 and 6 (a conjugate pair)
  ComplexImage ym = y;
  for (int j = 0; j < 8; ++j) {
    ym.set(2, j, 0.0, 0.0);
    ym.set(6, j, 0.0, 0.0);
  }
  ComplexImage r = idft2(ym);
  double gamma = 3.0;
  TargetScores t = target_scores(r, x, gamma);
  for (int i = 0; i < 8; ++i) {
    if (i == 2 || i == 6)
      CHECK(t.t[static_cast<size_t>(i)] < 1.0);
    else
      CHECK(t.t[static_cast<size_t>(i)] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(t.t[static_cast<size_t>(i)] > 0.0);
  }

  TargetScores t2 = target_scores_from_kspace(dft2(r), y, gamma);
  for (int i = 0; i < 8; ++i)
    CHECK(t.t[static_cast<size_t>(i)] ==
          doctest::Approx(t2.t[static_cast<size_t>(i)]).epsilon(1e-12));

  // larger row error scores lower: halve row 2 vs wipe it
  ComplexImage yh = y;
  for (int j = 0; j < 8; ++j) {
    yh.set(2, j, y.re(2, j) * 0.5, y.im(2, j) * 0.5);
    yh.set(6, j, y.re(6, j) * 0.5, y.im(6, j) * 0.5);
  }
  TargetScores th = target_scores(idft2(yh), x, gamma);
  CHECK(th.t[2] > t.t[2]);
}

TEST_CASE("correlation measures") {
  std::vector<double> a = {1, 2, 3, 4, 5};
  std::vector<double> b = {2, 4, 6, 8, 10};
  CHECK(pearson(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> c = {5, 4, 3, 2, 1};
  CHECK(pearson(a, c) == doctest::Approx(-1.0).epsilon(1e-12));
  std::vector<double> mono = {1.0, 10.0, 100.0, 1000.0, 10000.0};
  CHECK(spearman(a, mono) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> flat = {1, 1, 1, 1, 1};
  CHECK_THROWS(pearson(a, flat));
  CHECK_THROWS(pearson(a, std::vector<double>{1, 2}));

  std::vector<double> ties_a = {1, 2, 2, 3};
  std::vector<double> ties_b = {10, 20, 20, 30};
  CHECK(spearman(ties_a, ties_b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("quantiles") {
  std::vector<double> v = {4, 1, 3, 2};
  CHECK(median(v) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("mse distribution shrinks as sampling grows") {
  Rng rng(21);
  std::vector<DTensor> imgs;
  for (int i = 0; i < 4; ++i) imgs.push_back(random_grid(rng, 16));
  std::vector<const DTensor*> ptrs;
  for (auto& g : imgs) ptrs.push_back(&g);

  auto sample_mask = [](double level, uint64_t seed) {
    int n = 16;
    int pairs = static_cast<int>(std::lround(level * (n / 2)));
    SamplingMask m(n);
    m.observe(0);
    Rng r(seed);
    std::vector<int> cand;
    for (int p = 1; p <= n / 2; ++p) cand.push_back(p);
    r.shuffle(cand);
    for (int k = 0; k < pairs && k < static_cast<int>(cand.size()); ++k) {
      m.observe(cand[static_cast<size_t>(k)]);
      m.observe(conjugate_pair(cand[static_cast<size_t>(k)], n));
    }
    return m;
  };
  ReconstructFn zf = [](const ComplexImage& xhat, const SamplingMask&) { return xhat; };

  MseDistribution d = mse_distribution(zf, ptrs, {0.25, 0.75}, sample_mask, 99);
  REQUIRE(d.values.size() == 2);
  REQUIRE(d.values[0].size() == 4);
  double m_low = 0, m_high = 0;
  for (double v : d.values[0]) m_low += v;
  for (double v : d.values[1]) m_high += v;
  CHECK(m_high < m_low);

  std::ostringstream os;
  write_mse_distribution_csv(os, d, {"a", "b", "c", "d"});
  CHECK(os.str().substr(0, 17) == "kma,image_id,mse\n");

  CHECK_THROWS(mse_distribution(zf, ptrs, {0.0}, sample_mask, 1));
  CHECK_THROWS(mse_distribution(zf, {}, {0.5}, sample_mask, 1));
}
