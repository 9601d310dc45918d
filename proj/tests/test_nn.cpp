#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "memgaze/nn/lstm.hpp"
#include "memgaze/nn/vision.hpp"

using namespace memgaze;
using namespace memgaze::nn;
using memgaze::test::central_diff;
using memgaze::test::rel_err;

namespace {

Mat_d random_mat(Rng& rng, int r, int c, double scale = 1.0) {
  Mat_d m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.uniform(-1, 1);
  return m;
}

// Weighted sum of outputs makes a scalar loss with a fixed random probe.
double probe_loss(const Mat_d& y, const Mat_d& probe) {
  return (y.array() * probe.array()).sum();
}

}  // namespace

TEST_CASE("linear backward matches finite differences") {
  Rng rng(1);
  Linear<double> lin;
  lin.resize(5, 4);
  lin.w = random_mat(rng, 5, 4);
  lin.b = random_mat(rng, 4, 1);
  Mat_d x = random_mat(rng, 3, 5);
  Mat_d probe = random_mat(rng, 3, 4);

  Linear<double> g;
  g.resize(5, 4);
  Mat_d dx = linear_bwd(lin, x, probe, g);

  auto loss = [&] { return probe_loss(linear_fwd(lin, x), probe); };
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(rel_err(g.w(i, j), central_diff(lin.w(i, j), loss)) < 1e-6);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j)
      CHECK(rel_err(dx(i, j), central_diff(x(i, j), loss)) < 1e-6);
}

TEST_CASE("layernorm backward matches finite differences") {
  Rng rng(2);
  LayerNorm<double> ln;
  ln.resize(6);
  ln.gain = random_mat(rng, 6, 1).array() + 1.5;
  ln.bias = random_mat(rng, 6, 1);
  Mat_d x = random_mat(rng, 4, 6);
  Mat_d probe = random_mat(rng, 4, 6);

  LayerNormCtx<double> ctx;
  layernorm_fwd(ln, x, &ctx);
  LayerNorm<double> g;
  g.resize(6);
  g.gain.setZero();
  Mat_d dx = layernorm_bwd(ln, ctx, probe, g);

  auto loss = [&] { return probe_loss(layernorm_fwd(ln, x, nullptr), probe); };
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(rel_err(dx(i, j), central_diff(x(i, j), loss, 1e-5)) < 1e-5);
  for (int j = 0; j < 6; ++j) {
    CHECK(rel_err(g.gain(j), central_diff(ln.gain(j), loss, 1e-5)) < 1e-5);
    CHECK(rel_err(g.bias(j), central_diff(ln.bias(j), loss, 1e-5)) < 1e-5);
  }
}

TEST_CASE("conv backward matches finite differences on a 5x4 map") {
  Rng rng(3);
  for (int stride : {1, 2}) {
    Conv2d<double> conv;
    conv.resize(2, 3, stride);
    conv.w = random_mat(rng, 18, 3, 0.5);
    conv.b = random_mat(rng, 3, 1, 0.1);
    const int h = 5, w = 4;
    Mat_d x = random_mat(rng, h * w, 2);
    const int oh = conv_out_size(h, stride), ow = conv_out_size(w, stride);
    Mat_d probe = random_mat(rng, oh * ow, 3);

    ConvCtx<double> ctx;
    conv_fwd(conv, x, h, w, &ctx);
    Conv2d<double> g;
    g.resize(2, 3, stride);
    Mat_d dx = conv_bwd(conv, ctx, probe, g);

    auto loss = [&] { return probe_loss(conv_fwd(conv, x, h, w, nullptr), probe); };
    for (int i = 0; i < 18; i += 5)
      for (int j = 0; j < 3; ++j)
        CHECK(rel_err(g.w(i, j), central_diff(conv.w(i, j), loss)) < 1e-6);
    for (int p = 0; p < h * w; p += 3)
      for (int c = 0; c < 2; ++c)
        CHECK(rel_err(dx(p, c), central_diff(x(p, c), loss)) < 1e-6);
  }
}

TEST_CASE("conv rejects shape mismatches") {
  Conv2d<double> conv;
  conv.resize(3, 4, 1);
  Mat_d bad = Mat_d::Zero(10, 2);
  CHECK_THROWS((void)conv_fwd(conv, bad, 5, 2, nullptr));
}

TEST_CASE("spatial softmax: uniform map -> origin, corner spike -> corner") {
  Mat_d uniform = Mat_d::Constant(25, 1, 0.7);
  Vec_d out = spatial_softmax_fwd(uniform, 5, 5);
  CHECK(std::abs(out(0)) < 1e-12);
  CHECK(std::abs(out(1)) < 1e-12);

  Mat_d spike = Mat_d::Zero(25, 1);
  spike(0, 0) = 80.0;  // pixel (0,0)
  out = spatial_softmax_fwd(spike, 5, 5);
  CHECK(out(0) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(out(1) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("spatial softmax equals the explicit double-loop oracle") {
  Rng rng(4);
  Mat_d x = random_mat(rng, 25, 3, 2.0);
  Vec_d out = spatial_softmax_fwd(x, 5, 5);
  for (int c = 0; c < 3; ++c) {
    double denom = 0, sx = 0, sy = 0;
    for (int p = 0; p < 25; ++p) denom += std::exp(x(p, c));
    for (int p = 0; p < 25; ++p) {
      double a = std::exp(x(p, c)) / denom;
      sx += a * (-1.0 + 2.0 * (p % 5) / 4.0);
      sy += a * (-1.0 + 2.0 * (p / 5) / 4.0);
    }
    CHECK(rel_err(out(2 * c), sx) < 1e-10);
    CHECK(rel_err(out(2 * c + 1), sy) < 1e-10);
  }
}

TEST_CASE("spatial softmax outputs stay inside [-1,1]^2 and grads check out") {
  Rng rng(5);
  Mat_d x = random_mat(rng, 12, 2, 3.0);
  SpatialSoftmaxCtx<double> ctx;
  Vec_d out = spatial_softmax_fwd(x, 3, 4, &ctx);
  for (int i = 0; i < out.size(); ++i) {
    CHECK(out(i) >= -1.0);
    CHECK(out(i) <= 1.0);
  }
  Vec_d probe = random_mat(rng, out.size(), 1);
  Mat_d dx = spatial_softmax_bwd(ctx, probe);
  auto loss = [&] {
    Vec_d y = spatial_softmax_fwd(x, 3, 4);
    return (y.array() * probe.array()).sum();
  };
  for (int p = 0; p < 12; ++p)
    for (int c = 0; c < 2; ++c)
      CHECK(rel_err(dx(p, c), central_diff(x(p, c), loss)) < 1e-6);
}

TEST_CASE("global average pooling: means, permutation invariance, gradient") {
  Rng rng(6);
  Mat_d x = random_mat(rng, 16, 2);
  Vec_d y = gap_fwd(x);
  for (int c = 0; c < 2; ++c) {
    double m = 0;
    for (int p = 0; p < 16; ++p) m += x(p, c);
    CHECK(rel_err(y(c), m / 16.0) < 1e-12);
  }

  Mat_d shuffled = x;
  shuffled.row(0).swap(shuffled.row(9));
  shuffled.row(3).swap(shuffled.row(12));
  CHECK(gap_fwd(shuffled) == y);

  Mat_d constant = Mat_d::Constant(16, 1, 0.37);
  CHECK(gap_fwd(constant)(0) == doctest::Approx(0.37));

  Vec_d ones = Vec_d::Ones(2);
  Mat_d dx = gap_bwd(ones, 16);
  CHECK(dx(5, 0) == doctest::Approx(1.0 / 16.0));
}

TEST_CASE("foveated crop windows follow the clamped-origin contract") {
  Mat_d frame(kFrameSize * kFrameSize, 3);
  for (int p = 0; p < frame.rows(); ++p) {
    frame(p, 0) = p % kFrameSize;  // x coordinate
    frame(p, 1) = p / kFrameSize;  // y coordinate
    frame(p, 2) = 0.0;
  }
  Mat_d c = crop_foveated<double>(frame, 128.0, 128.0);
  REQUIRE(c.rows() == 64 * 64);
  CHECK(c(0, 0) == 96.0);
  CHECK(c(0, 1) == 96.0);

  c = crop_foveated<double>(frame, 0.0, 0.0);
  CHECK(c(0, 0) == 0.0);
  CHECK(c(0, 1) == 0.0);

  c = crop_foveated<double>(frame, 300.0, -5.0);
  CHECK(c(0, 0) == 192.0);  // columns clamped to [192, 256)
  CHECK(c(0, 1) == 0.0);    // rows clamped to [0, 64)

  CHECK_THROWS((void)crop_foveated<double>(
      frame, std::numeric_limits<double>::quiet_NaN(), 0.0));
}

TEST_CASE("lstm backward matches finite differences") {
  Rng rng(7);
  Lstm<double> lstm;
  lstm.resize(3, 4);
  lstm.init(rng);
  Mat_d x = random_mat(rng, 5, 3);
  Mat_d probe = random_mat(rng, 5, 4);

  LstmCtx<double> ctx;
  lstm_fwd(lstm, x, &ctx);
  Lstm<double> g;
  g.resize(3, 4);
  Mat_d dx = lstm_bwd(lstm, ctx, probe, g);

  auto loss = [&] { return probe_loss(lstm_fwd(lstm, x, nullptr), probe); };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 16; j += 3)
      CHECK(rel_err(g.wx(i, j), central_diff(lstm.wx(i, j), loss, 1e-5)) < 1e-5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 16; j += 5)
      CHECK(rel_err(g.wh(i, j), central_diff(lstm.wh(i, j), loss, 1e-5)) < 1e-5);
  for (int t = 0; t < 5; ++t)
    for (int c = 0; c < 3; ++c)
      CHECK(rel_err(dx(t, c), central_diff(x(t, c), loss, 1e-5)) < 1e-5);
}

TEST_CASE("lstm hidden state is causal by construction") {
  Rng rng(8);
  Lstm<double> lstm;
  lstm.resize(3, 4);
  lstm.init(rng);
  Mat_d x = random_mat(rng, 6, 3);
  Mat_d h = lstm_fwd(lstm, x, nullptr);
  Mat_d x2 = x;
  x2.row(4).setConstant(9.0);
  Mat_d h2 = lstm_fwd(lstm, x2, nullptr);
  CHECK(h.topRows(4) == h2.topRows(4));
}
