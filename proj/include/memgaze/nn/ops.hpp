// Dense layers with explicit forward/backward. Parameters, activations and
// gradients live in separate structs: forward fills a ctx, backward reads it
// and accumulates into a grad mirror of the parameter struct, so concurrent
// evaluation over shared frozen parameters is safe.
#pragma once

#include <cmath>
#include <type_traits>

#include "memgaze/common.hpp"

namespace memgaze::nn {

template <class S>
struct Linear {
  Mat<S> w;  // in x out
  Vec<S> b;

  void resize(int in, int out) {
    w.setZero(in, out);
    b.setZero(out);
  }
  void init_he(Rng& rng) {
    double lim = std::sqrt(6.0 / double(w.rows()));
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = S(rng.uniform(-lim, lim));
    b.setZero();
  }
};

template <class S>
Mat<S> linear_fwd(const Linear<S>& p, const Mat<S>& x) {
  return (x * p.w).rowwise() + p.b.transpose();
}

// dY -> dX; accumulates parameter gradients into g.
template <class S>
Mat<S> linear_bwd(const Linear<S>& p, const Mat<S>& x, const Mat<S>& dy,
                  Linear<S>& g) {
  g.w.noalias() += x.transpose() * dy;
  g.b.noalias() += dy.colwise().sum().transpose();
  return dy * p.w.transpose();
}

template <class S>
Mat<S> relu(const Mat<S>& x) {
  return x.cwiseMax(S(0));
}

template <class S>
Mat<S> relu_bwd(const Mat<S>& x, const Mat<S>& dy) {
  return (x.array() > S(0)).template cast<S>() * dy.array();
}

// Per-row layer normalization with learned gain/bias.
template <class S>
struct LayerNorm {
  Vec<S> gain;
  Vec<S> bias;
  void resize(int d) {
    gain.setOnes(d);
    bias.setZero(d);
  }
};

template <class S>
struct LayerNormCtx {
  Mat<S> xhat;
  Vec<S> inv_std;
};

template <class S>
Mat<S> layernorm_fwd(const LayerNorm<S>& p, const Mat<S>& x,
                     std::type_identity_t<LayerNormCtx<S>>* ctx = nullptr) {
  const S eps = S(1e-5);
  const int d = (int)x.cols();
  Mat<S> xhat(x.rows(), d);
  Vec<S> inv_std(x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    S mean = x.row(i).mean();
    auto centered = (x.row(i).array() - mean).eval();
    S var = centered.square().sum() / S(d);
    S is = S(1) / std::sqrt(var + eps);
    xhat.row(i) = centered * is;
    inv_std(i) = is;
  }
  Mat<S> y =
      (xhat.array().rowwise() * p.gain.transpose().array()).rowwise() +
      p.bias.transpose().array();
  if (ctx) {
    ctx->xhat = std::move(xhat);
    ctx->inv_std = std::move(inv_std);
  }
  return y;
}

template <class S>
Mat<S> layernorm_bwd(const LayerNorm<S>& p, const LayerNormCtx<S>& ctx,
                     const Mat<S>& dy, LayerNorm<S>& g) {
  const int d = (int)dy.cols();
  g.gain.noalias() +=
      (dy.array() * ctx.xhat.array()).colwise().sum().matrix().transpose();
  g.bias.noalias() += dy.colwise().sum().transpose();
  Mat<S> dx(dy.rows(), d);
  for (int i = 0; i < dy.rows(); ++i) {
    auto dxhat = (dy.row(i).array() * p.gain.transpose().array()).eval();
    S m1 = dxhat.sum() / S(d);
    S m2 = (dxhat * ctx.xhat.row(i).array()).sum() / S(d);
    dx.row(i) = ((dxhat - m1 - ctx.xhat.row(i).array() * m2) * ctx.inv_std(i))
                    .matrix();
  }
  return dx;
}

}  // namespace memgaze::nn
