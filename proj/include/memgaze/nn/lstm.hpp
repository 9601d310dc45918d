// Single-layer LSTM over an L x d_in sequence, zero initial state. The
// recurrent baseline drops in for the Transformer encoder, so the interface
// mirrors encode(): sequence in, sequence of hidden states out.
#pragma once

#include <vector>

#include "memgaze/nn/ops.hpp"

namespace memgaze::nn {

template <class S>
struct Lstm {
  int d_in = 0, d_h = 0;
  Mat<S> wx;  // d_in x 4H, gate order (i, f, g, o)
  Mat<S> wh;  // H x 4H
  Vec<S> b;   // 4H

  void resize(int in, int hidden) {
    d_in = in;
    d_h = hidden;
    wx.setZero(in, 4 * hidden);
    wh.setZero(hidden, 4 * hidden);
    b.setZero(4 * hidden);
  }
  void init(Rng& rng) {
    double lim = std::sqrt(6.0 / double(d_in + d_h));
    for (int i = 0; i < wx.rows(); ++i)
      for (int j = 0; j < wx.cols(); ++j) wx(i, j) = S(rng.uniform(-lim, lim));
    for (int i = 0; i < wh.rows(); ++i)
      for (int j = 0; j < wh.cols(); ++j) wh(i, j) = S(rng.uniform(-lim, lim));
    b.setZero();
    b.segment(d_h, d_h).setConstant(S(1));  // forget-gate bias
  }
};

template <class S>
struct LstmCtx {
  Mat<S> x;                    // L x d_in
  Mat<S> i, f, g, o, c, tanh_c;  // L x H each
  Mat<S> h_prev;               // L x H, h_{t-1} rows
  Mat<S> c_prev;
};

template <class S>
inline S sigmoid(S v) {
  return S(1) / (S(1) + std::exp(-v));
}

template <class S>
Mat<S> lstm_fwd(const Lstm<S>& p, const Mat<S>& x,
                std::type_identity_t<LstmCtx<S>>* ctx = nullptr) {
  const int len = (int)x.rows();
  const int hd = p.d_h;
  Mat<S> h(len, hd), i(len, hd), f(len, hd), g(len, hd), o(len, hd),
      c(len, hd), tc(len, hd), hp(len, hd), cp(len, hd);
  Vec<S> h_prev = Vec<S>::Zero(hd), c_prev = Vec<S>::Zero(hd);
  for (int t = 0; t < len; ++t) {
    hp.row(t) = h_prev.transpose();
    cp.row(t) = c_prev.transpose();
    Vec<S> z = (x.row(t) * p.wx).transpose() + (h_prev.transpose() * p.wh).transpose() + p.b;
    for (int k = 0; k < hd; ++k) {
      i(t, k) = sigmoid(z(k));
      f(t, k) = sigmoid(z(hd + k));
      g(t, k) = std::tanh(z(2 * hd + k));
      o(t, k) = sigmoid(z(3 * hd + k));
      c(t, k) = f(t, k) * c_prev(k) + i(t, k) * g(t, k);
      tc(t, k) = std::tanh(c(t, k));
      h(t, k) = o(t, k) * tc(t, k);
    }
    h_prev = h.row(t).transpose();
    c_prev = c.row(t).transpose();
  }
  if (ctx) {
    ctx->x = x;
    ctx->i = std::move(i);
    ctx->f = std::move(f);
    ctx->g = std::move(g);
    ctx->o = std::move(o);
    ctx->c = std::move(c);
    ctx->tanh_c = std::move(tc);
    ctx->h_prev = std::move(hp);
    ctx->c_prev = std::move(cp);
  }
  return h;
}

template <class S>
Mat<S> lstm_bwd(const Lstm<S>& p, const LstmCtx<S>& ctx, const Mat<S>& dh_out,
                Lstm<S>& grad) {
  const int len = (int)ctx.x.rows();
  const int hd = p.d_h;
  Mat<S> dx = Mat<S>::Zero(len, p.d_in);
  Vec<S> dh_next = Vec<S>::Zero(hd), dc_next = Vec<S>::Zero(hd);
  for (int t = len - 1; t >= 0; --t) {
    Vec<S> dh = dh_out.row(t).transpose() + dh_next;
    Vec<S> dz(4 * hd);
    Vec<S> dc(hd);
    for (int k = 0; k < hd; ++k) {
      S tck = ctx.tanh_c(t, k);
      dc(k) = dh(k) * ctx.o(t, k) * (S(1) - tck * tck) + dc_next(k);
      S di = dc(k) * ctx.g(t, k);
      S df = dc(k) * ctx.c_prev(t, k);
      S dg = dc(k) * ctx.i(t, k);
      S do_ = dh(k) * tck;
      dz(k) = di * ctx.i(t, k) * (S(1) - ctx.i(t, k));
      dz(hd + k) = df * ctx.f(t, k) * (S(1) - ctx.f(t, k));
      dz(2 * hd + k) = dg * (S(1) - ctx.g(t, k) * ctx.g(t, k));
      dz(3 * hd + k) = do_ * ctx.o(t, k) * (S(1) - ctx.o(t, k));
    }
    grad.wx.noalias() += ctx.x.row(t).transpose() * dz.transpose();
    grad.wh.noalias() += ctx.h_prev.row(t).transpose() * dz.transpose();
    grad.b += dz;
    dx.row(t) = (p.wx * dz).transpose();
    dh_next = p.wh * dz;
    for (int k = 0; k < hd; ++k) dc_next(k) = dc(k) * ctx.f(t, k);
  }
  return dx;
}

}  // namespace memgaze::nn
