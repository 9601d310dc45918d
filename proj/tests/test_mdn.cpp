#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "memgaze/nn/mdn.hpp"

using namespace memgaze;
using namespace memgaze::nn;
using memgaze::test::central_diff;
using memgaze::test::gmm_density_bruteforce;
using memgaze::test::rel_err;

namespace {

Vec_d random_raw(Rng& rng, double spread = 1.0) {
  Vec_d raw(kMdnRawDim);
  for (int i = 0; i < kMdnRawDim; ++i) raw(i) = spread * rng.uniform(-1, 1);
  return raw;
}

}  // namespace

TEST_CASE("zero raw vector maps to the uniform standard mixture") {
  Vec_d raw = Vec_d::Zero(kMdnRawDim);
  GmmParams<double> p = params_from_raw(raw);
  for (int i = 0; i < kMixtureComponents; ++i) {
    CHECK(p.w(i) == doctest::Approx(0.125));
    CHECK(p.sigma(i, 0) == doctest::Approx(1.0));
    CHECK(p.sigma(i, 1) == doctest::Approx(1.0));
    CHECK(p.rho(i) == 0.0);
    CHECK(p.mu(i, 0) == 0.0);
  }
}

TEST_CASE("transform guarantees the mixture invariants for any raw input") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    Vec_d raw = random_raw(rng, 12.0);
    GmmParams<double> p = params_from_raw(raw);
    CHECK(std::abs(p.w.sum() - 1.0) < 1e-6);
    for (int i = 0; i < kMixtureComponents; ++i) {
      CHECK(p.sigma(i, 0) > 0.0);
      CHECK(p.sigma(i, 1) > 0.0);
      CHECK(std::abs(p.rho(i)) < 1.0);
      double det = p.sigma(i, 0) * p.sigma(i, 0) * p.sigma(i, 1) *
                   p.sigma(i, 1) * (1.0 - p.rho(i) * p.rho(i));
      CHECK(det > 0.0);
    }
  }
}

TEST_CASE("a dominant weight logit saturates the softmax") {
  Vec_d raw = Vec_d::Zero(kMdnRawDim);
  raw(0) = 60.0;
  GmmParams<double> p = params_from_raw(raw);
  CHECK(p.w(0) == doctest::Approx(1.0));
}

TEST_CASE("non-finite raw input is rejected") {
  Vec_d raw = Vec_d::Zero(kMdnRawDim);
  raw(5) = std::numeric_limits<double>::infinity();
  CHECK_THROWS((void)params_from_raw(raw));
}

TEST_CASE("nll at the mean of a lone standard component is log(2 pi)") {
  Vec_d raw = Vec_d::Zero(kMdnRawDim);
  raw(0) = 60.0;  // component 0 takes all weight
  raw(8) = 0.3;   // mu_0
  raw(9) = -0.2;
  GmmParams<double> p = params_from_raw(raw);
  CHECK(nll(p, 0.3, -0.2) == doctest::Approx(std::log(2.0 * M_PI)).epsilon(1e-9));
}

TEST_CASE("nll matches the extended-precision brute-force oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    Vec_d raw = random_raw(rng, 2.0);
    GmmParams<double> p = params_from_raw(raw);
    double tx = rng.uniform(-2, 2), ty = rng.uniform(-2, 2);
    long double oracle =
        -logl(gmm_density_bruteforce(p.w, p.mu, p.sigma, p.rho, tx, ty));
    CHECK(rel_err(nll(p, tx, ty), (double)oracle) < 1e-8);
  }
}

TEST_CASE("nll stays finite far from every mode") {
  Vec_d raw = Vec_d::Zero(kMdnRawDim);
  GmmParams<double> p = params_from_raw(raw);
  double loss = nll(p, 100.0, 100.0);  // 100 sigma away
  CHECK(std::isfinite(loss));
  CHECK(loss > 100.0);
}

TEST_CASE("nll is bounded below by the max-density bound") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Vec_d raw = random_raw(rng, 3.0);
    GmmParams<double> p = params_from_raw(raw);
    double height = 0;
    for (int i = 0; i < kMixtureComponents; ++i) height += mode_height(p, i);
    double tx = rng.uniform(-2, 2), ty = rng.uniform(-2, 2);
    CHECK(nll(p, tx, ty) > -std::log(height) - 1e-9);
  }
}

TEST_CASE("analytic nll gradient matches central differences") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    Vec_d raw = random_raw(rng, 1.5);
    double tx = rng.uniform(-1.5, 1.5), ty = rng.uniform(-1.5, 1.5);
    Vec_d draw;
    nll_backward(raw, tx, ty, draw);
    auto loss = [&] { return nll(params_from_raw(raw), tx, ty); };
    for (int i = 0; i < kMdnRawDim; ++i) {
      double num = central_diff(raw(i), loss, 1e-4);
      CHECK(rel_err(draw(i), num, 1e-3) < 1e-4);
    }
  }
}

TEST_CASE("select_gaze follows weight and sharpness") {
  Vec_d raw = Vec_d::Zero(kMdnRawDim);
  raw(0) = 8.0;
  raw(8) = 0.5;
  raw(9) = 0.5;
  GmmParams<double> p = params_from_raw(raw);
  Vec2<double> g = select_gaze(p);
  CHECK(g(0) == doctest::Approx(0.5));

  // Equal weights, component 2 ten times sharper.
  raw = Vec_d::Zero(kMdnRawDim);
  raw(8 + 4) = -0.7;  // mu_2.x
  raw(24 + 4) = std::log(0.1);
  raw(24 + 5) = std::log(0.1);
  p = params_from_raw(raw);
  g = select_gaze(p);
  CHECK(g(0) == doctest::Approx(-0.7));
}

TEST_CASE("weight rescaling before normalization never changes the selection") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Vec_d raw = random_raw(rng, 2.0);
    GmmParams<double> p = params_from_raw(raw);
    GmmParams<double> q = p;
    double c = rng.uniform(0.1, 9.0);
    q.w = (p.w * c) / (p.w * c).sum();
    CHECK(select_gaze(p) == select_gaze(q));
  }
}

TEST_CASE("selection agrees with a 256x256 grid argmax oracle") {
  Rng rng(6);
  int agreements = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    Vec_d raw = random_raw(rng, 1.5);
    // Means inside the frame domain the grid covers, pairwise separated,
    // scales sharp enough for the grid to resolve the modes.
    for (int i = 0; i < 8; ++i) {
      for (int resample = 0; resample < 50; ++resample) {
        raw(8 + 2 * i) = rng.uniform(-0.95, 0.95);
        raw(9 + 2 * i) = rng.uniform(-0.95, 0.95);
        bool clear = true;
        for (int j = 0; j < i; ++j) {
          double dx = raw(8 + 2 * i) - raw(8 + 2 * j);
          double dy = raw(9 + 2 * i) - raw(9 + 2 * j);
          if (std::hypot(dx, dy) < 0.25) clear = false;
        }
        if (clear) break;
      }
    }
    for (int i = 24; i < 40; ++i) raw(i) = rng.uniform(-4.5, -2.5);
    GmmParams<double> p = params_from_raw(raw);

    double best = -1.0;
    double bx = 0, by = 0;
    for (int gy = 0; gy < 256; ++gy)
      for (int gx = 0; gx < 256; ++gx) {
        double x = -1.0 + 2.0 * gx / 255.0;
        double y = -1.0 + 2.0 * gy / 255.0;
        double d = (double)gmm_density_bruteforce(p.w, p.mu, p.sigma, p.rho, x, y);
        if (d > best) {
          best = d;
          bx = x;
          by = y;
        }
      }
    Vec2<double> sel = select_gaze(p);
    double cell = 2.0 / 255.0;
    if (std::abs(sel(0) - bx) <= 1.5 * cell && std::abs(sel(1) - by) <= 1.5 * cell)
      ++agreements;
  }
  CHECK(agreements >= 99);
}
