#include <doctest.h>

#include <cmath>
#include <vector>

#include "akspace/kernels.hpp"
#include "akspace/rng.hpp"

using namespace akspace;

namespace {

std::vector<float> rand_vec(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

// reference results in double for accumulation kernels
double ref_dot(int n, const float* x, const float* y, int ystride) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += static_cast<double>(x[i]) * y[static_cast<size_t>(i) * ystride];
  return s;
}

const std::vector<int> kSizes = {1, 2, 3, 7, 8, 9, 15, 16, 17, 31, 33, 64, 100, 255};

}  // namespace

TEST_CASE("kernel variants match the scalar reference") {
  std::vector<kern::Isa> isas = {kern::Isa::kScalar};
  if (kern::isa_supported(kern::Isa::kAvx2)) isas.push_back(kern::Isa::kAvx2);
  if (kern::isa_supported(kern::Isa::kNeon)) isas.push_back(kern::Isa::kNeon);

  for (kern::Isa isa : isas) {
    CAPTURE(kern::isa_name(isa));
    kern::force_isa(isa);
    Rng rng(42);
    for (int n : kSizes) {
      CAPTURE(n);
      auto x = rand_vec(rng, 2 * n + 1);
      auto y0 = rand_vec(rng, 2 * n + 1);
      float a = static_cast<float>(rng.uniform(-2, 2));

      // contiguous axpy
      {
        auto y = y0;
        kern::axpy(n, a, x.data(), y.data());
        for (int i = 0; i < n; ++i) {
          float want = y0[i] + a * x[i];
          CHECK(y[i] == doctest::Approx(want).epsilon(1e-5));
        }
        CHECK(y[n] == y0[n]);  // untouched past end
      }
      // gather stride 2
      {
        auto y = y0;
        kern::axpy_g2(n, a, x.data(), y.data());
        for (int i = 0; i < n; ++i) {
          float want = y0[i] + a * x[2 * i];
          CHECK(y[i] == doctest::Approx(want).epsilon(1e-5));
        }
      }
      // scatter stride 2
      {
        auto y = y0;
        kern::axpy_s2(n, a, x.data(), y.data());
        for (int i = 0; i < n; ++i) {
          float want = y0[2 * i] + a * x[i];
          CHECK(y[2 * i] == doctest::Approx(want).epsilon(1e-5));
        }
        for (int i = 0; i + 1 < 2 * n; i += 2) CHECK(y[i + 1] == y0[i + 1]);  // odd slots kept
      }
      {
        double want = ref_dot(n, x.data(), y0.data(), 1);
        double got = kern::dot(n, x.data(), y0.data());
        CHECK(got == doctest::Approx(want).epsilon(2e-4));
      }
      {
        double want = ref_dot(n, x.data(), y0.data(), 2);
        double got = kern::dot_g2(n, x.data(), y0.data());
        CHECK(got == doctest::Approx(want).epsilon(2e-4));
      }
      {
        std::vector<float> z(static_cast<size_t>(n));
        kern::vadd(n, x.data(), y0.data(), z.data());
        for (int i = 0; i < n; ++i) CHECK(z[i] == x[i] + y0[i]);
        kern::vmul(n, x.data(), y0.data(), z.data());
        for (int i = 0; i < n; ++i) CHECK(z[i] == x[i] * y0[i]);
        kern::vaffine(n, a, 0.25f, x.data(), z.data());
        for (int i = 0; i < n; ++i)
          CHECK(z[i] == doctest::Approx(a * x[i] + 0.25f).epsilon(1e-6));
        kern::vrelu(n, x.data(), z.data());
        for (int i = 0; i < n; ++i) CHECK(z[i] == (x[i] > 0 ? x[i] : 0.f));
        kern::vlrelu(n, 0.2f, x.data(), z.data());
        for (int i = 0; i < n; ++i)
          CHECK(z[i] == doctest::Approx(x[i] > 0 ? x[i] : 0.2f * x[i]).epsilon(1e-6));
      }
      {
        double want = 0, wantsq = 0;
        for (int i = 0; i < n; ++i) {
          want += static_cast<double>(x[i]);
          wantsq += static_cast<double>(x[i]) * x[i];
        }
        CHECK(kern::sum_f64(n, x.data()) == doctest::Approx(want).epsilon(1e-12));
        CHECK(kern::sumsq_f64(n, x.data()) == doctest::Approx(wantsq).epsilon(1e-12));
      }
    }
  }
  kern::force_isa(isas.back());
}

TEST_CASE("simd and scalar reductions agree tightly on benign data") {
  if (!kern::isa_supported(kern::Isa::kAvx2) && !kern::isa_supported(kern::Isa::kNeon)) return;
  kern::Isa simd = kern::isa_supported(kern::Isa::kAvx2) ? kern::Isa::kAvx2 : kern::Isa::kNeon;
  Rng rng(7);
  for (int n : kSizes) {
    auto x = rand_vec(rng, 2 * n + 1, 0.5, 1.5);
    auto y = rand_vec(rng, 2 * n + 1, 0.5, 1.5);
    kern::force_isa(kern::Isa::kScalar);
    double d_s = kern::dot(n, x.data(), y.data());
    double g_s = kern::dot_g2(n, x.data(), y.data());
    kern::force_isa(simd);
    double d_v = kern::dot(n, x.data(), y.data());
    double g_v = kern::dot_g2(n, x.data(), y.data());
    CHECK(d_v == doctest::Approx(d_s).epsilon(1e-5));
    CHECK(g_v == doctest::Approx(g_s).epsilon(1e-5));
  }
}

TEST_CASE("dispatcher reports a supported instruction set") {
  kern::Isa isa = kern::active_isa();
  CHECK(kern::isa_supported(isa));
  CHECK(std::string(kern::isa_name(isa)).size() > 0);
}
