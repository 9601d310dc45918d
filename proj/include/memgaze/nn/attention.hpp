// Causal multi-head self-attention and the post-norm Transformer encoder
// stack. Masked entries are never touched, so step t outputs are bit-exact
// functions of steps 0..t.
#pragma once

#include <vector>

#include "memgaze/nn/ops.hpp"
#include "memgaze/nn/positional.hpp"

namespace memgaze::nn {

struct EncoderConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_layers = 2;
  int d_ff = 128;
  double w_low = 2000.0;
  double w_high = 20000.0;
  double w_eval = 10000.0;

  void validate() const {
    if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_ff <= 0)
      throw ConfigError("encoder config: dimensions must be positive");
    if (d_model % n_heads != 0)
      throw ConfigError("encoder config: d_model must divide by n_heads");
    if (!(w_low < w_high) || w_low <= 0)
      throw ConfigError("encoder config: need 0 < W_low < W_high");
    if (w_eval <= 0) throw ConfigError("encoder config: W_eval must be > 0");
  }
};

// Per layer, per head: an L x L row-stochastic matrix, zero above the
// diagonal.
template <class S>
using AttentionTensor = std::vector<std::vector<Mat<S>>>;

inline Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> causal_mask(int len) {
  if (len < 1) throw std::invalid_argument("causal_mask: L must be >= 1");
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> m(len, len);
  for (int i = 0; i < len; ++i)
    for (int j = 0; j < len; ++j) m(i, j) = j <= i;
  return m;
}

template <class S>
struct MultiHeadAttention {
  int d_model = 0, n_heads = 0;
  Linear<S> wq, wk, wv, wo;

  void resize(int d, int heads) {
    d_model = d;
    n_heads = heads;
    wq.resize(d, d);
    wk.resize(d, d);
    wv.resize(d, d);
    wo.resize(d, d);
  }
  void init(Rng& rng) {
    wq.init_he(rng);
    wk.init_he(rng);
    wv.init_he(rng);
    wo.init_he(rng);
  }
};

template <class S>
struct MhaCtx {
  Mat<S> x, q, k, v, z;
  std::vector<Mat<S>> attn;  // per head, L x L
};

template <class S>
Mat<S> mha_fwd(const MultiHeadAttention<S>& p, const Mat<S>& x,
               std::type_identity_t<MhaCtx<S>>* ctx,
               std::vector<Mat<S>>* attn_export = nullptr) {
  const int len = (int)x.rows();
  const int dh = p.d_model / p.n_heads;
  const S scale = S(1) / std::sqrt(S(dh));

  Mat<S> q = linear_fwd(p.wq, x);
  Mat<S> k = linear_fwd(p.wk, x);
  Mat<S> v = linear_fwd(p.wv, x);
  Mat<S> z(len, p.d_model);
  std::vector<Mat<S>> attn(p.n_heads);

  for (int h = 0; h < p.n_heads; ++h) {
    auto qh = q.middleCols(h * dh, dh);
    auto kh = k.middleCols(h * dh, dh);
    auto vh = v.middleCols(h * dh, dh);
    Mat<S>& a = attn[h];
    a = Mat<S>::Zero(len, len);
    for (int i = 0; i < len; ++i) {
      // Causal row softmax over j <= i; columns j > i are never read.
      Vec<S> sc(i + 1);
      for (int j = 0; j <= i; ++j) sc(j) = qh.row(i).dot(kh.row(j)) * scale;
      S m = sc.maxCoeff();
      Vec<S> e = (sc.array() - m).exp();
      a.row(i).head(i + 1) = e.transpose() / e.sum();
    }
    z.middleCols(h * dh, dh).noalias() = a * vh;
  }

  if (attn_export) *attn_export = attn;
  Mat<S> out = linear_fwd(p.wo, z);
  if (ctx) {
    ctx->x = x;
    ctx->q = std::move(q);
    ctx->k = std::move(k);
    ctx->v = std::move(v);
    ctx->z = std::move(z);
    ctx->attn = std::move(attn);
  }
  return out;
}

template <class S>
Mat<S> mha_bwd(const MultiHeadAttention<S>& p, const MhaCtx<S>& ctx,
               const Mat<S>& dy, MultiHeadAttention<S>& g) {
  const int len = (int)ctx.x.rows();
  const int dh = p.d_model / p.n_heads;
  const S scale = S(1) / std::sqrt(S(dh));

  Mat<S> dz = linear_bwd(p.wo, ctx.z, dy, g.wo);
  Mat<S> dq = Mat<S>::Zero(len, p.d_model);
  Mat<S> dk = Mat<S>::Zero(len, p.d_model);
  Mat<S> dv = Mat<S>::Zero(len, p.d_model);

  for (int h = 0; h < p.n_heads; ++h) {
    auto qh = ctx.q.middleCols(h * dh, dh);
    auto kh = ctx.k.middleCols(h * dh, dh);
    auto vh = ctx.v.middleCols(h * dh, dh);
    const Mat<S>& a = ctx.attn[h];
    auto dzh = dz.middleCols(h * dh, dh);

    dv.middleCols(h * dh, dh).noalias() += a.transpose() * dzh;
    for (int i = 0; i < len; ++i) {
      // d(scores) through the row softmax.
      Vec<S> da(i + 1);
      for (int j = 0; j <= i; ++j) da(j) = dzh.row(i).dot(vh.row(j));
      S dot = 0;
      for (int j = 0; j <= i; ++j) dot += da(j) * a(i, j);
      for (int j = 0; j <= i; ++j) {
        S ds = a(i, j) * (da(j) - dot) * scale;
        dq.row(i).segment(h * dh, dh) += ds * kh.row(j);
        dk.row(j).segment(h * dh, dh) += ds * qh.row(i);
      }
    }
  }

  Mat<S> dx = linear_bwd(p.wq, ctx.x, dq, g.wq);
  dx += linear_bwd(p.wk, ctx.x, dk, g.wk);
  dx += linear_bwd(p.wv, ctx.x, dv, g.wv);
  return dx;
}

template <class S>
struct EncoderLayer {
  MultiHeadAttention<S> mha;
  LayerNorm<S> ln1, ln2;
  Linear<S> ff1, ff2;

  void resize(const EncoderConfig& c) {
    mha.resize(c.d_model, c.n_heads);
    ln1.resize(c.d_model);
    ln2.resize(c.d_model);
    ff1.resize(c.d_model, c.d_ff);
    ff2.resize(c.d_ff, c.d_model);
  }
  void init(Rng& rng) {
    mha.init(rng);
    ff1.init_he(rng);
    ff2.init_he(rng);
  }
};

template <class S>
struct EncoderLayerCtx {
  MhaCtx<S> mha;
  LayerNormCtx<S> ln1, ln2;
  Mat<S> sum1, h1, ff_in, ff_hid, sum2;
};

template <class S>
Mat<S> encoder_layer_fwd(const EncoderLayer<S>& p, const Mat<S>& x,
                         std::type_identity_t<EncoderLayerCtx<S>>* ctx,
                         std::vector<Mat<S>>* attn_export = nullptr) {
  Mat<S> att = mha_fwd(p.mha, x, ctx ? &ctx->mha : nullptr, attn_export);
  Mat<S> sum1 = x + att;
  Mat<S> h1 = layernorm_fwd(p.ln1, sum1, ctx ? &ctx->ln1 : nullptr);
  Mat<S> pre = linear_fwd(p.ff1, h1);
  Mat<S> hid = relu(pre);
  Mat<S> ff = linear_fwd(p.ff2, hid);
  Mat<S> sum2 = h1 + ff;
  Mat<S> out = layernorm_fwd(p.ln2, sum2, ctx ? &ctx->ln2 : nullptr);
  if (ctx) {
    ctx->sum1 = std::move(sum1);
    ctx->h1 = std::move(h1);
    ctx->ff_in = std::move(pre);
    ctx->ff_hid = std::move(hid);
    ctx->sum2 = std::move(sum2);
  }
  return out;
}

template <class S>
Mat<S> encoder_layer_bwd(const EncoderLayer<S>& p, const EncoderLayerCtx<S>& c,
                         const Mat<S>& dy, EncoderLayer<S>& g) {
  Mat<S> dsum2 = layernorm_bwd(p.ln2, c.ln2, dy, g.ln2);
  Mat<S> dhid = linear_bwd(p.ff2, c.ff_hid, dsum2, g.ff2);
  Mat<S> dff_in = linear_bwd(p.ff1, c.h1, relu_bwd(c.ff_in, dhid), g.ff1);
  Mat<S> dh1 = dsum2 + dff_in;
  Mat<S> dsum1 = layernorm_bwd(p.ln1, c.ln1, dh1, g.ln1);
  Mat<S> dx = mha_bwd(p.mha, c.mha, dsum1, g.mha);
  return dx + dsum1;
}

template <class S>
struct Encoder {
  EncoderConfig cfg;
  std::vector<EncoderLayer<S>> layers;

  void resize(const EncoderConfig& c) {
    c.validate();
    cfg = c;
    layers.assign(c.n_layers, {});
    for (auto& l : layers) l.resize(c);
  }
  void init(Rng& rng) {
    for (auto& l : layers) l.init(rng);
  }
};

template <class S>
struct EncoderCtx {
  std::vector<EncoderLayerCtx<S>> layers;
  std::vector<Mat<S>> inputs;
};

// Adds PE(L, d_model, W) to the embeddings and applies the layer stack.
// attn, when given, receives every layer's per-head attention matrices.
template <class S>
Mat<S> encode(const Encoder<S>& p, const Mat<S>& embeddings, double w,
              std::type_identity_t<EncoderCtx<S>>* ctx = nullptr,
              std::type_identity_t<AttentionTensor<S>>* attn = nullptr) {
  if (!embeddings.allFinite())
    throw std::invalid_argument("encode: non-finite embeddings");
  const int len = (int)embeddings.rows();
  Mat<S> x = embeddings + sinusoidal_pe<S>(len, p.cfg.d_model, w);
  if (ctx) ctx->layers.resize(p.layers.size());
  if (attn) attn->resize(p.layers.size());
  for (size_t i = 0; i < p.layers.size(); ++i) {
    if (ctx) ctx->inputs.push_back(x);
    x = encoder_layer_fwd(p.layers[i], x, ctx ? &ctx->layers[i] : nullptr,
                          attn ? &(*attn)[i] : nullptr);
  }
  return x;
}

template <class S>
Mat<S> encode_bwd(const Encoder<S>& p, const EncoderCtx<S>& ctx,
                  const Mat<S>& dy, Encoder<S>& g) {
  Mat<S> d = dy;
  for (int i = (int)p.layers.size() - 1; i >= 0; --i)
    d = encoder_layer_bwd(p.layers[i], ctx.layers[i], d, g.layers[i]);
  return d;  // gradient w.r.t. embeddings (PE is constant)
}

// Head-averaged attention of one layer, the tensor handed to the
// sequential-attention analysis.
template <class S>
Mat<S> head_average(const std::vector<Mat<S>>& heads) {
  Mat<S> m = heads.at(0);
  for (size_t h = 1; h < heads.size(); ++h) m += heads[h];
  return m / S(heads.size());
}

}  // namespace memgaze::nn
