// Loss composition, Adam, and the teacher-forced training loop with
// per-epoch validation metrics.
#pragma once

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "memgaze/data/normalize.hpp"
#include "memgaze/data/store.hpp"
#include "memgaze/model/checkpoint.hpp"

namespace memgaze::train {

struct TrainConfig {
  double lambda_action = 1.0;
  double lambda_gaze = 1.0;
  double lambda_transition = 1.0;
  double learning_rate = 1e-3;
  int batch_size = 8;
  int epochs = 30;
  std::uint64_t seed = 0;
  bool w_augmentation = true;
  model::Variant variant = model::Variant::kTransformer;

  void validate() const {
    if (lambda_action < 0 || lambda_gaze < 0 || lambda_transition < 0)
      throw ConfigError("loss weights must be >= 0");
    if (lambda_action + lambda_gaze + lambda_transition <= 0)
      throw ConfigError("at least one loss weight must be positive");
    if (learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
  }
};

constexpr int kEarlyStopPatience = 10;  // epochs without val action-l2 gain

TrainConfig parse_train_config(const std::string& path);
std::string config_json(const TrainConfig& c);

// ---------------------------------------------------------------------------
// Per-episode loss terms. Sums with counts; the caller fixes the batch-level
// normalization through the inv_* factors baked into the gradient scale.
template <class S>
struct LossSums {
  double action = 0, gaze = 0, transition = 0;
  long action_n = 0, gaze_n = 0, transition_n = 0;

  void operator+=(const LossSums& o) {
    action += o.action;
    gaze += o.gaze;
    transition += o.transition;
    action_n += o.action_n;
    gaze_n += o.gaze_n;
    transition_n += o.transition_n;
  }
};

// One unpadded episode in model scalar type.
template <class S>
struct EpisodeData {
  RowMat<S> global, fov;
  Mat<S> gazes_norm, states, actions;
  Mat<S> gazes_px;
  int s_rp = 0;
};

template <class S>
EpisodeData<S> to_episode_data(const data::TrainEpisode& te) {
  EpisodeData<S> d;
  d.global = te.global.template cast<S>();
  d.fov = te.fov.template cast<S>();
  d.gazes_norm = te.gazes_norm.template cast<S>();
  d.states = te.states_norm.template cast<S>();
  d.actions = te.actions_norm.template cast<S>();
  d.gazes_px = te.gazes_px.template cast<S>();
  d.s_rp = te.s_rp;
  return d;
}

// Forward both predictors, accumulate the three loss sums, and (when grads
// is non-null) backpropagate with the given per-term gradient scales.
template <class S>
LossSums<S> episode_loss_grad(const model::ModelPair<S>& m,
                              const EpisodeData<S>& ep, double w_pe,
                              double action_scale, double gaze_scale,
                              double transition_scale,
                              model::ModelPair<S>* grads) {
  using model::GazeFwdCtx;
  using model::PolicyFwdCtx;
  const int len = (int)ep.states.rows();
  LossSums<S> sums;

  GazeFwdCtx<S> gctx;
  Mat<S> raw =
      model::gaze_forward_raw(m.gaze, ep.global, w_pe, grads ? &gctx : nullptr);
  Mat<S> draw = Mat<S>::Zero(len, nn::kMdnRawDim);
  for (int t = 0; t < len; ++t) {
    Vec<S> raw_t = raw.row(t).transpose();
    if (grads) {
      Vec<S> drow;
      sums.gaze += (double)nn::nll_backward(raw_t, ep.gazes_norm(t, 0),
                                            ep.gazes_norm(t, 1), drow);
      draw.row(t) = drow.transpose() * S(gaze_scale);
    } else {
      sums.gaze += (double)nn::nll(nn::params_from_raw(raw_t),
                                   ep.gazes_norm(t, 0), ep.gazes_norm(t, 1));
    }
  }
  sums.gaze_n = len;

  PolicyFwdCtx<S> pctx;
  model::PolicyOut<S> pol = model::policy_forward(
      m.policy, ep.fov, ep.gazes_norm, ep.states, w_pe, grads ? &pctx : nullptr);

  Mat<S> res = pol.actions - ep.actions;
  sums.action = (double)res.squaredNorm();
  sums.action_n = len;

  Vec<S> dp = Vec<S>::Zero(len);
  for (int t = 0; t + 1 < len; ++t) {
    S e = pol.p(t) - pol.r(t + 1);  // r is a target, not a gradient path
    sums.transition += (double)(e * e);
    dp(t) = S(2) * e * S(transition_scale);
  }
  sums.transition_n = len > 1 ? len - 1 : 0;

  if (grads) {
    model::gaze_backward(m.gaze, gctx, draw, grads->gaze);
    Mat<S> dact = res * S(2 * action_scale);
    model::policy_backward(m.policy, pctx, dact, dp, grads->policy);
  }
  return sums;
}

// ---------------------------------------------------------------------------
template <class S>
class Adam {
 public:
  Adam(double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}

  void attach(model::ModelPair<S>& params, model::ModelPair<S>& grads) {
    p_.clear();
    g_.clear();
    n_.clear();
    params.for_each_param([&](const std::string&, auto& t) {
      p_.push_back(t.data());
      n_.push_back((long)t.size());
    });
    grads.for_each_param(
        [&](const std::string&, auto& t) { g_.push_back(t.data()); });
    m_.assign(p_.size(), {});
    v_.assign(p_.size(), {});
    for (size_t i = 0; i < p_.size(); ++i) {
      m_[i].assign((size_t)n_[i], S(0));
      v_[i].assign((size_t)n_[i], S(0));
    }
  }

  void step() {
    ++t_;
    const S bc1 = S(1) - S(std::pow(b1_, (double)t_));
    const S bc2 = S(1) - S(std::pow(b2_, (double)t_));
    for (size_t k = 0; k < p_.size(); ++k) {
      S* p = p_[k];
      const S* g = g_[k];
      for (long i = 0; i < n_[k]; ++i) {
        m_[k][i] = S(b1_) * m_[k][i] + (S(1) - S(b1_)) * g[i];
        v_[k][i] = S(b2_) * v_[k][i] + (S(1) - S(b2_)) * g[i] * g[i];
        S mh = m_[k][i] / bc1;
        S vh = v_[k][i] / bc2;
        p[i] -= S(lr_) * mh / (std::sqrt(vh) + S(eps_));
      }
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<S*> p_;
  std::vector<const S*> g_;
  std::vector<long> n_;
  std::vector<std::vector<S>> m_, v_;
};

// ---------------------------------------------------------------------------
struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;
  double val_action_l2 = 0;
  double val_gaze_px = 0;
  double val_nll = 0;
};

struct TrainResult {
  model::ModelPair<float> model;  // best by weighted validation loss
  std::vector<EpochMetrics> log;
  int best_epoch = -1;
};

struct ValMetrics {
  double action_l2 = 0, gaze_px = 0, nll = 0;
  long steps = 0;
};

// Eval-mode metrics of one episode (W = W_eval).
template <class S>
ValMetrics validate_episode(const model::ModelPair<S>& m,
                            const EpisodeData<S>& ep) {
  ValMetrics v;
  const int len = (int)ep.states.rows();
  Mat<S> raw = model::gaze_forward_raw(m.gaze, ep.global, m.gaze.cfg.w_eval);
  model::PolicyOut<S> pol = model::policy_forward(
      m.policy, ep.fov, ep.gazes_norm, ep.states, m.gaze.cfg.w_eval);
  for (int t = 0; t < len; ++t) {
    Vec<S> raw_t = raw.row(t).transpose();
    auto params = nn::params_from_raw(raw_t);
    v.nll += (double)nn::nll(params, ep.gazes_norm(t, 0), ep.gazes_norm(t, 1));
    Vec2<S> g = nn::select_gaze(params);
    double px = norm_to_px((double)g(0));
    double py = norm_to_px((double)g(1));
    double dx = px - (double)ep.gazes_px(t, 0);
    double dy = py - (double)ep.gazes_px(t, 1);
    v.gaze_px += std::sqrt(dx * dx + dy * dy);
  }
  v.action_l2 = (double)(pol.actions - ep.actions).squaredNorm();
  v.steps = len;
  return v;
}

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

TrainResult train(const TrainConfig& cfg,
                  const std::vector<data::TrainEpisode>& train_eps,
                  const std::vector<data::TrainEpisode>& val_eps,
                  std::ostream* metrics_jsonl = nullptr,
                  std::ostream* info = nullptr);

}  // namespace memgaze::train
