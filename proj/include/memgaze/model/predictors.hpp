// The gaze predictor, the policy predictor with its transition head, and the
// two baseline sequence modules, composed from the nn building blocks.
//
// Sequence tensors are L x D row-per-step matrices. Image sequences arrive
// flattened pixel-major, one row per step, and are reshaped per step for the
// conv stacks. Every forward has a matching backward that accumulates into a
// grad mirror of the parameter struct.
#pragma once

#include <array>
#include <string>

#include "memgaze/nn/attention.hpp"
#include "memgaze/nn/lstm.hpp"
#include "memgaze/nn/mdn.hpp"
#include "memgaze/nn/vision.hpp"

namespace memgaze::model {

enum class Variant { kTransformer, kNonseq, kRecurrent };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kTransformer: return "transformer";
    case Variant::kNonseq: return "nonseq";
    case Variant::kRecurrent: return "recurrent";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "transformer") return Variant::kTransformer;
  if (s == "nonseq") return Variant::kNonseq;
  if (s == "recurrent") return Variant::kRecurrent;
  throw ConfigError("unknown model variant: " + s);
}

constexpr int kSpatialChannels = 16;                  // spatial-softmax points
constexpr int kSpatialFeatDim = 2 * kSpatialChannels; // 32
constexpr int kFovFeatDim = 64;                       // GAP output
constexpr int kMdnHidden = 200;
constexpr int kActionHidden = 200;
constexpr int kTransitionHidden = 64;

// ---------------------------------------------------------------------------
// Conv(global): five 3x3 layers, widths (8,16,16,16,16), stride 2 on the
// first two, ReLU between layers; the raw final map feeds spatial softmax.
template <class S>
struct GlobalConv {
  std::array<nn::Conv2d<S>, 5> layers;

  void resize(int in_channels) {
    const int widths[5] = {8, 16, 16, 16, 16};
    const int strides[5] = {2, 2, 1, 1, 1};
    int c = in_channels;
    for (int i = 0; i < 5; ++i) {
      layers[i].resize(c, widths[i], strides[i]);
      c = widths[i];
    }
  }
  void init(Rng& rng) {
    for (auto& l : layers) l.init_he(rng);
  }
};

template <class S>
struct GlobalConvCtx {
  std::array<nn::ConvCtx<S>, 5> conv;
  std::array<Mat<S>, 4> pre;  // pre-ReLU maps of layers 0..3
};

template <class S>
Mat<S> global_conv_fwd(const GlobalConv<S>& p, const Mat<S>& img, int h, int w,
                       std::type_identity_t<GlobalConvCtx<S>>* ctx,
                       int* out_h = nullptr, int* out_w = nullptr) {
  Mat<S> x = img;
  for (int i = 0; i < 5; ++i) {
    Mat<S> pre =
        nn::conv_fwd(p.layers[i], x, h, w, ctx ? &ctx->conv[i] : nullptr);
    h = nn::conv_out_size(h, p.layers[i].stride);
    w = nn::conv_out_size(w, p.layers[i].stride);
    if (i < 4) {
      x = nn::relu(pre);
      if (ctx) ctx->pre[i] = std::move(pre);
    } else {
      x = std::move(pre);
    }
  }
  if (out_h) *out_h = h;
  if (out_w) *out_w = w;
  return x;
}

template <class S>
Mat<S> global_conv_bwd(const GlobalConv<S>& p, const GlobalConvCtx<S>& ctx,
                       const Mat<S>& dy, GlobalConv<S>& g) {
  Mat<S> d = dy;
  for (int i = 4; i >= 0; --i) {
    if (i < 4) d = nn::relu_bwd(ctx.pre[i], d);
    d = nn::conv_bwd(p.layers[i], ctx.conv[i], d, g.layers[i]);
  }
  return d;
}

// Conv(foveated): four 3x3 layers, widths (16,32,64,64), stride 2 each,
// ReLU between layers, then global average pooling.
template <class S>
struct FovConv {
  std::array<nn::Conv2d<S>, 4> layers;

  void resize(int in_channels = 3) {
    const int widths[4] = {16, 32, 64, 64};
    int c = in_channels;
    for (int i = 0; i < 4; ++i) {
      layers[i].resize(c, widths[i], 2);
      c = widths[i];
    }
  }
  void init(Rng& rng) {
    for (auto& l : layers) l.init_he(rng);
  }
};

template <class S>
struct FovConvCtx {
  std::array<nn::ConvCtx<S>, 4> conv;
  std::array<Mat<S>, 3> pre;
  int final_hw = 0;
};

template <class S>
Vec<S> fov_conv_fwd(const FovConv<S>& p, const Mat<S>& img, int h, int w,
                    std::type_identity_t<FovConvCtx<S>>* ctx) {
  Mat<S> x = img;
  for (int i = 0; i < 4; ++i) {
    Mat<S> pre =
        nn::conv_fwd(p.layers[i], x, h, w, ctx ? &ctx->conv[i] : nullptr);
    h = nn::conv_out_size(h, 2);
    w = nn::conv_out_size(w, 2);
    if (i < 3) {
      x = nn::relu(pre);
      if (ctx) ctx->pre[i] = std::move(pre);
    } else {
      x = std::move(pre);
    }
  }
  if (ctx) ctx->final_hw = h * w;
  return nn::gap_fwd(x);
}

template <class S>
Mat<S> fov_conv_bwd(const FovConv<S>& p, const FovConvCtx<S>& ctx,
                    const Vec<S>& dfeat, FovConv<S>& g) {
  Mat<S> d = nn::gap_bwd(dfeat, ctx.final_hw);
  for (int i = 3; i >= 0; --i) {
    if (i < 3) d = nn::relu_bwd(ctx.pre[i], d);
    d = nn::conv_bwd(p.layers[i], ctx.conv[i], d, g.layers[i]);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Gaze predictor.
template <class S>
struct GazePredictor {
  Variant variant = Variant::kTransformer;
  nn::EncoderConfig cfg;
  int in_channels = 3;
  int img_h = kGlobalSize, img_w = kGlobalSize;

  GlobalConv<S> conv;
  nn::Linear<S> embed;  // 32 -> d_model
  nn::Encoder<S> encoder;
  nn::Linear<S> fc;   // nonseq: one fully connected layer
  nn::Lstm<S> lstm;   // recurrent baseline
  nn::Linear<S> mdn1, mdn2, mdn3;

  void resize(Variant v, const nn::EncoderConfig& c, int channels = 3,
              int h = kGlobalSize, int w = kGlobalSize) {
    variant = v;
    cfg = c;
    cfg.validate();
    in_channels = channels;
    img_h = h;
    img_w = w;
    conv.resize(channels);
    embed.resize(kSpatialFeatDim, cfg.d_model);
    if (v == Variant::kTransformer) encoder.resize(cfg);
    if (v == Variant::kNonseq) fc.resize(cfg.d_model, cfg.d_model);
    if (v == Variant::kRecurrent) lstm.resize(cfg.d_model, cfg.d_model);
    mdn1.resize(cfg.d_model, kMdnHidden);
    mdn2.resize(kMdnHidden, kMdnHidden);
    mdn3.resize(kMdnHidden, nn::kMdnRawDim);
  }

  void init(Rng& rng) {
    conv.init(rng);
    embed.init_he(rng);
    if (variant == Variant::kTransformer) encoder.init(rng);
    if (variant == Variant::kNonseq) fc.init_he(rng);
    if (variant == Variant::kRecurrent) lstm.init(rng);
    mdn1.init_he(rng);
    mdn2.init_he(rng);
    mdn3.init_he(rng);
    mdn3.w *= S(0.1);
    // Scatter the mixture means and start with moderate scales so early
    // mode selection is not degenerate.
    const double mx[8] = {-0.6, 0.0, 0.6, -0.6, 0.6, -0.6, 0.0, 0.6};
    const double my[8] = {-0.6, -0.6, -0.6, 0.0, 0.0, 0.6, 0.6, 0.6};
    for (int i = 0; i < 8; ++i) {
      mdn3.b(8 + 2 * i) = S(mx[i]);
      mdn3.b(9 + 2 * i) = S(my[i]);
      mdn3.b(24 + 2 * i) = S(-1.2);
      mdn3.b(25 + 2 * i) = S(-1.2);
    }
  }

  template <class F>
  void for_each_param(F&& f) {
    for (int i = 0; i < 5; ++i) {
      std::string n = "gaze.conv" + std::to_string(i);
      f(n + ".w", conv.layers[i].w);
      f(n + ".b", conv.layers[i].b);
    }
    f("gaze.embed.w", embed.w);
    f("gaze.embed.b", embed.b);
    if (variant == Variant::kTransformer) {
      for (int l = 0; l < (int)encoder.layers.size(); ++l) {
        std::string n = "gaze.enc" + std::to_string(l);
        auto& lay = encoder.layers[l];
        f(n + ".wq.w", lay.mha.wq.w);
        f(n + ".wq.b", lay.mha.wq.b);
        f(n + ".wk.w", lay.mha.wk.w);
        f(n + ".wk.b", lay.mha.wk.b);
        f(n + ".wv.w", lay.mha.wv.w);
        f(n + ".wv.b", lay.mha.wv.b);
        f(n + ".wo.w", lay.mha.wo.w);
        f(n + ".wo.b", lay.mha.wo.b);
        f(n + ".ln1.g", lay.ln1.gain);
        f(n + ".ln1.b", lay.ln1.bias);
        f(n + ".ln2.g", lay.ln2.gain);
        f(n + ".ln2.b", lay.ln2.bias);
        f(n + ".ff1.w", lay.ff1.w);
        f(n + ".ff1.b", lay.ff1.b);
        f(n + ".ff2.w", lay.ff2.w);
        f(n + ".ff2.b", lay.ff2.b);
      }
    }
    if (variant == Variant::kNonseq) {
      f("gaze.fc.w", fc.w);
      f("gaze.fc.b", fc.b);
    }
    if (variant == Variant::kRecurrent) {
      f("gaze.lstm.wx", lstm.wx);
      f("gaze.lstm.wh", lstm.wh);
      f("gaze.lstm.b", lstm.b);
    }
    f("gaze.mdn1.w", mdn1.w);
    f("gaze.mdn1.b", mdn1.b);
    f("gaze.mdn2.w", mdn2.w);
    f("gaze.mdn2.b", mdn2.b);
    f("gaze.mdn3.w", mdn3.w);
    f("gaze.mdn3.b", mdn3.b);
  }
};

template <class S>
struct GazeFwdCtx {
  std::vector<GlobalConvCtx<S>> conv;
  std::vector<nn::SpatialSoftmaxCtx<S>> ss;
  Mat<S> feats;  // L x 32
  Mat<S> emb;
  nn::EncoderCtx<S> enc;
  nn::LstmCtx<S> lstm;
  Mat<S> fc_pre;
  Mat<S> enc_out;
  Mat<S> mdn_pre1, mdn_hid1, mdn_pre2, mdn_hid2;
  int final_h = 0, final_w = 0;
};

// Conv + spatial softmax for one frame: the per-step gaze features.
template <class S>
Vec<S> gaze_head_features(const GazePredictor<S>& m, const Mat<S>& img,
                          std::type_identity_t<GlobalConvCtx<S>>* cctx = nullptr,
                          std::type_identity_t<nn::SpatialSoftmaxCtx<S>>* sctx = nullptr) {
  int h = 0, w = 0;
  Mat<S> map = global_conv_fwd(m.conv, img, m.img_h, m.img_w, cctx, &h, &w);
  return nn::spatial_softmax_fwd(map, h, w, sctx);
}

// Embedding -> sequence module -> MDN MLP. feats is L x 32.
template <class S>
Mat<S> gaze_tail_forward(const GazePredictor<S>& m, const Mat<S>& feats,
                         double w_pe,
                         std::type_identity_t<GazeFwdCtx<S>>* ctx = nullptr,
                         std::type_identity_t<nn::AttentionTensor<S>>* attn = nullptr) {
  Mat<S> emb = linear_fwd(m.embed, feats);
  Mat<S> out;
  switch (m.variant) {
    case Variant::kTransformer:
      out = nn::encode(m.encoder, emb, w_pe, ctx ? &ctx->enc : nullptr, attn);
      break;
    case Variant::kNonseq: {
      Mat<S> pre = linear_fwd(m.fc, emb);
      out = nn::relu(pre);
      if (ctx) ctx->fc_pre = std::move(pre);
      break;
    }
    case Variant::kRecurrent:
      out = nn::lstm_fwd(m.lstm, emb, ctx ? &ctx->lstm : nullptr);
      break;
  }
  Mat<S> pre1 = linear_fwd(m.mdn1, out);
  Mat<S> hid1 = nn::relu(pre1);
  Mat<S> pre2 = linear_fwd(m.mdn2, hid1);
  Mat<S> hid2 = nn::relu(pre2);
  Mat<S> raw = linear_fwd(m.mdn3, hid2);
  if (ctx) {
    ctx->feats = feats;
    ctx->emb = std::move(emb);
    ctx->enc_out = out;
    ctx->mdn_pre1 = std::move(pre1);
    ctx->mdn_hid1 = std::move(hid1);
    ctx->mdn_pre2 = std::move(pre2);
    ctx->mdn_hid2 = std::move(hid2);
  }
  return raw;
}

// Full sequence forward: globals is L x (h*w*c) flattened pixel-major.
template <class S>
Mat<S> gaze_forward_raw(const GazePredictor<S>& m, const RowMat<S>& globals,
                        double w_pe,
                        std::type_identity_t<GazeFwdCtx<S>>* ctx = nullptr,
                        std::type_identity_t<nn::AttentionTensor<S>>* attn = nullptr) {
  const int len = (int)globals.rows();
  Mat<S> feats(len, kSpatialFeatDim);
  if (ctx) {
    ctx->conv.resize(len);
    ctx->ss.resize(len);
  }
  for (int t = 0; t < len; ++t) {
    Eigen::Map<const Mat<S>> img(globals.row(t).data(), m.img_h * m.img_w,
                                 m.in_channels);
    feats.row(t) = gaze_head_features(m, Mat<S>(img),
                                      ctx ? &ctx->conv[t] : nullptr,
                                      ctx ? &ctx->ss[t] : nullptr)
                       .transpose();
  }
  return gaze_tail_forward(m, feats, w_pe, ctx, attn);
}

// Backward from d(raw MDN outputs); returns nothing upstream of the images.
template <class S>
void gaze_backward(const GazePredictor<S>& m, const GazeFwdCtx<S>& ctx,
                   const Mat<S>& draw, GazePredictor<S>& g) {
  Mat<S> dhid2 = linear_bwd(m.mdn3, ctx.mdn_hid2, draw, g.mdn3);
  Mat<S> dpre2 = nn::relu_bwd(ctx.mdn_pre2, dhid2);
  Mat<S> dhid1 = linear_bwd(m.mdn2, ctx.mdn_hid1, dpre2, g.mdn2);
  Mat<S> dpre1 = nn::relu_bwd(ctx.mdn_pre1, dhid1);
  Mat<S> dout = linear_bwd(m.mdn1, ctx.enc_out, dpre1, g.mdn1);

  Mat<S> demb;
  switch (m.variant) {
    case Variant::kTransformer:
      demb = nn::encode_bwd(m.encoder, ctx.enc, dout, g.encoder);
      break;
    case Variant::kNonseq:
      demb = linear_bwd(m.fc, ctx.emb, nn::relu_bwd(ctx.fc_pre, dout), g.fc);
      break;
    case Variant::kRecurrent:
      demb = nn::lstm_bwd(m.lstm, ctx.lstm, dout, g.lstm);
      break;
  }
  Mat<S> dfeats = linear_bwd(m.embed, ctx.feats, demb, g.embed);
  for (int t = 0; t < dfeats.rows(); ++t) {
    Mat<S> dmap = nn::spatial_softmax_bwd(ctx.ss[t], Vec<S>(dfeats.row(t)));
    global_conv_bwd(m.conv, ctx.conv[t], dmap, g.conv);
  }
}

// ---------------------------------------------------------------------------
// Policy predictor with transition head.
template <class S>
struct PolicyPredictor {
  Variant variant = Variant::kTransformer;
  nn::EncoderConfig cfg;
  int img_h = kFoveaSize, img_w = kFoveaSize;

  FovConv<S> conv;
  nn::Linear<S> embed;  // (64 + 2 + 10) -> d_model
  nn::Encoder<S> encoder;
  nn::Linear<S> fc;
  nn::Lstm<S> lstm;
  nn::Linear<S> act1, act2;  // d -> 200 -> 10
  nn::Linear<S> tr1, tr2;    // e_t -> 64 -> 1

  void resize(Variant v, const nn::EncoderConfig& c, int h = kFoveaSize,
              int w = kFoveaSize) {
    variant = v;
    cfg = c;
    cfg.validate();
    img_h = h;
    img_w = w;
    conv.resize(3);
    embed.resize(kFovFeatDim + 2 + kStateDim, cfg.d_model);
    if (v == Variant::kTransformer) encoder.resize(cfg);
    if (v == Variant::kNonseq) fc.resize(cfg.d_model, cfg.d_model);
    if (v == Variant::kRecurrent) lstm.resize(cfg.d_model, cfg.d_model);
    act1.resize(cfg.d_model, kActionHidden);
    act2.resize(kActionHidden, kActionDim);
    tr1.resize(cfg.d_model, kTransitionHidden);
    tr2.resize(kTransitionHidden, 1);
  }

  void init(Rng& rng) {
    conv.init(rng);
    embed.init_he(rng);
    if (variant == Variant::kTransformer) encoder.init(rng);
    if (variant == Variant::kNonseq) fc.init_he(rng);
    if (variant == Variant::kRecurrent) lstm.init(rng);
    act1.init_he(rng);
    act2.init_he(rng);
    act2.w *= S(0.1);
    tr1.init_he(rng);
    tr2.init_he(rng);
    tr2.w *= S(0.1);
  }

  template <class F>
  void for_each_param(F&& f) {
    for (int i = 0; i < 4; ++i) {
      std::string n = "policy.conv" + std::to_string(i);
      f(n + ".w", conv.layers[i].w);
      f(n + ".b", conv.layers[i].b);
    }
    f("policy.embed.w", embed.w);
    f("policy.embed.b", embed.b);
    if (variant == Variant::kTransformer) {
      for (int l = 0; l < (int)encoder.layers.size(); ++l) {
        std::string n = "policy.enc" + std::to_string(l);
        auto& lay = encoder.layers[l];
        f(n + ".wq.w", lay.mha.wq.w);
        f(n + ".wq.b", lay.mha.wq.b);
        f(n + ".wk.w", lay.mha.wk.w);
        f(n + ".wk.b", lay.mha.wk.b);
        f(n + ".wv.w", lay.mha.wv.w);
        f(n + ".wv.b", lay.mha.wv.b);
        f(n + ".wo.w", lay.mha.wo.w);
        f(n + ".wo.b", lay.mha.wo.b);
        f(n + ".ln1.g", lay.ln1.gain);
        f(n + ".ln1.b", lay.ln1.bias);
        f(n + ".ln2.g", lay.ln2.gain);
        f(n + ".ln2.b", lay.ln2.bias);
        f(n + ".ff1.w", lay.ff1.w);
        f(n + ".ff1.b", lay.ff1.b);
        f(n + ".ff2.w", lay.ff2.w);
        f(n + ".ff2.b", lay.ff2.b);
      }
    }
    if (variant == Variant::kNonseq) {
      f("policy.fc.w", fc.w);
      f("policy.fc.b", fc.b);
    }
    if (variant == Variant::kRecurrent) {
      f("policy.lstm.wx", lstm.wx);
      f("policy.lstm.wh", lstm.wh);
      f("policy.lstm.b", lstm.b);
    }
    f("policy.act1.w", act1.w);
    f("policy.act1.b", act1.b);
    f("policy.act2.w", act2.w);
    f("policy.act2.b", act2.b);
    f("policy.tr1.w", tr1.w);
    f("policy.tr1.b", tr1.b);
    f("policy.tr2.w", tr2.w);
    f("policy.tr2.b", tr2.b);
  }
};

template <class S>
struct PolicyOut {
  Mat<S> actions;  // L x 10, normalized units
  Mat<S> d;        // L x d_model representations
  Vec<S> p;        // L transition predictions, p_t from e_t
  Vec<S> r;        // L measured transitions; r(0) = 0, r(t) = mean(d_t - d_{t-1})
};

template <class S>
struct PolicyFwdCtx {
  std::vector<FovConvCtx<S>> conv;
  Mat<S> feats;      // L x 64
  Mat<S> emb_input;  // L x 76
  Mat<S> emb;        // e_t
  nn::EncoderCtx<S> enc;
  nn::LstmCtx<S> lstm;
  Mat<S> fc_pre;
  Mat<S> d;
  Mat<S> act_pre, act_hid;
  Mat<S> tr_pre, tr_hid;
};

template <class S>
Vec<S> policy_head_features(const PolicyPredictor<S>& m, const Mat<S>& img,
                            std::type_identity_t<FovConvCtx<S>>* cctx = nullptr) {
  return fov_conv_fwd(m.conv, img, m.img_h, m.img_w, cctx);
}

// feats L x 64, gazes L x 2 (normalized), states L x 10 (normalized).
template <class S>
PolicyOut<S> policy_tail_forward(const PolicyPredictor<S>& m, const Mat<S>& feats,
                                 const Mat<S>& gazes, const Mat<S>& states,
                                 double w_pe,
                                 std::type_identity_t<PolicyFwdCtx<S>>* ctx = nullptr,
                                 std::type_identity_t<nn::AttentionTensor<S>>* attn = nullptr) {
  const int len = (int)feats.rows();
  if (gazes.rows() != len || states.rows() != len)
    throw std::invalid_argument("policy_forward: sequence length mismatch");
  Mat<S> emb_input(len, kFovFeatDim + 2 + kStateDim);
  emb_input << feats, gazes, states;
  Mat<S> emb = linear_fwd(m.embed, emb_input);

  Mat<S> tr_pre = linear_fwd(m.tr1, emb);
  Mat<S> tr_hid = nn::relu(tr_pre);
  Mat<S> p_col = linear_fwd(m.tr2, tr_hid);

  Mat<S> d;
  switch (m.variant) {
    case Variant::kTransformer:
      d = nn::encode(m.encoder, emb, w_pe, ctx ? &ctx->enc : nullptr, attn);
      break;
    case Variant::kNonseq: {
      Mat<S> pre = linear_fwd(m.fc, emb);
      d = nn::relu(pre);
      if (ctx) ctx->fc_pre = std::move(pre);
      break;
    }
    case Variant::kRecurrent:
      d = nn::lstm_fwd(m.lstm, emb, ctx ? &ctx->lstm : nullptr);
      break;
  }

  Mat<S> act_pre = linear_fwd(m.act1, d);
  Mat<S> act_hid = nn::relu(act_pre);
  PolicyOut<S> out;
  out.actions = linear_fwd(m.act2, act_hid);
  out.d = d;
  out.p = p_col.col(0);
  out.r = Vec<S>::Zero(len);
  for (int t = 1; t < len; ++t)
    out.r(t) = (out.d.row(t) - out.d.row(t - 1)).mean();

  if (ctx) {
    ctx->feats = feats;
    ctx->emb_input = std::move(emb_input);
    ctx->emb = std::move(emb);
    ctx->d = d;
    ctx->act_pre = std::move(act_pre);
    ctx->act_hid = std::move(act_hid);
    ctx->tr_pre = std::move(tr_pre);
    ctx->tr_hid = std::move(tr_hid);
  }
  return out;
}

template <class S>
PolicyOut<S> policy_forward(const PolicyPredictor<S>& m, const RowMat<S>& fovs,
                            const Mat<S>& gazes, const Mat<S>& states,
                            double w_pe,
                            std::type_identity_t<PolicyFwdCtx<S>>* ctx = nullptr,
                            std::type_identity_t<nn::AttentionTensor<S>>* attn = nullptr) {
  const int len = (int)fovs.rows();
  Mat<S> feats(len, kFovFeatDim);
  if (ctx) ctx->conv.resize(len);
  for (int t = 0; t < len; ++t) {
    Eigen::Map<const Mat<S>> img(fovs.row(t).data(), m.img_h * m.img_w, 3);
    feats.row(t) =
        policy_head_features(m, Mat<S>(img), ctx ? &ctx->conv[t] : nullptr)
            .transpose();
  }
  return policy_tail_forward(m, feats, gazes, states, w_pe, ctx, attn);
}

// Backward from action and transition-prediction gradients. The measured
// transition r is a training target, not a differentiated path, so no
// gradient flows through d from the p-loss.
template <class S>
void policy_backward(const PolicyPredictor<S>& m, const PolicyFwdCtx<S>& ctx,
                     const Mat<S>& dactions, const Vec<S>& dp,
                     PolicyPredictor<S>& g) {
  Mat<S> dact_hid = linear_bwd(m.act2, ctx.act_hid, dactions, g.act2);
  Mat<S> dd =
      linear_bwd(m.act1, ctx.d, nn::relu_bwd(ctx.act_pre, dact_hid), g.act1);
  Mat<S> demb;
  switch (m.variant) {
    case Variant::kTransformer:
      demb = nn::encode_bwd(m.encoder, ctx.enc, dd, g.encoder);
      break;
    case Variant::kNonseq:
      demb = linear_bwd(m.fc, ctx.emb, nn::relu_bwd(ctx.fc_pre, dd), g.fc);
      break;
    case Variant::kRecurrent:
      demb = nn::lstm_bwd(m.lstm, ctx.lstm, dd, g.lstm);
      break;
  }
  Mat<S> dtr_hid = linear_bwd(m.tr2, ctx.tr_hid, Mat<S>(dp), g.tr2);
  demb += linear_bwd(m.tr1, ctx.emb, nn::relu_bwd(ctx.tr_pre, dtr_hid), g.tr1);

  Mat<S> demb_input = linear_bwd(m.embed, ctx.emb_input, demb, g.embed);
  for (int t = 0; t < demb_input.rows(); ++t) {
    Vec<S> dfeat = demb_input.row(t).head(kFovFeatDim).transpose();
    fov_conv_bwd(m.conv, ctx.conv[t], dfeat, g.conv);
  }
}

}  // namespace memgaze::model
