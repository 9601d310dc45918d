// Closed-loop execution: per-step gaze prediction, foveated crop, policy
// action, and the stationary-point exclusion rule, plus task/gaze success
// evaluation against the simulator.
#pragma once

#include <array>
#include <functional>
#include <optional>

#include "memgaze/data/normalize.hpp"
#include "memgaze/model/checkpoint.hpp"
#include "memgaze/sim/replace.hpp"

namespace memgaze::exec {

constexpr double kSubtaskTol = 12.0;       // px, "on plate" / "at gripper"
constexpr double kGazeMemoryTol = 24.0;    // px around the origin plate center
constexpr double kDefaultThreshold = 0.9;  // Algorithm 1's C
constexpr int kDefaultMaxSteps = 320;

// Subtask success predicates over the simulator state.
inline bool green_pick_success(const sim::SimState& s) {
  return (s.green_pos - s.gripper_xy()).norm() <= kSubtaskTol &&
         s.grip_angle >= 0.5;
}
inline bool green_place_success(const sim::SimState& s) {
  return !s.green_attached &&
         (s.green_pos - s.target_plate_center).norm() <= kSubtaskTol;
}
inline bool red_pick_success(const sim::SimState& s) {
  return (s.red_pos - s.gripper_xy()).norm() <= kSubtaskTol &&
         s.grip_angle >= 0.5;
}
inline bool red_place_success(const sim::SimState& s) {
  return !s.red_attached &&
         (s.red_pos - s.plate_centers[s.green_origin_idx]).norm() <= kSubtaskTol;
}

// Gaze-at-origin-plate test at the red-pick completion step.
inline bool gaze_memory_success(const Eigen::Vector2d& gaze_px,
                                const Eigen::Vector2d& origin_plate_center) {
  return (gaze_px - origin_plate_center).norm() <= kGazeMemoryTol;
}

struct EpisodeReport {
  std::uint64_t seed = 0;
  bool green_pick = false, green_place = false, red_pick = false,
       red_place = false;
  int gaze_memory = -1;  // 1 success, 0 failure, -1 red pick never completed
  int steps = 0;         // real environment steps consumed
  int accepted = 0;      // logical (non-excluded) steps
  int excluded = 0;
  bool done = false;
  double mean_gaze_px_error = 0;
};

struct EvalReport {
  std::vector<EpisodeReport> episodes;
  double c_threshold = kDefaultThreshold;
  double green_pick_rate = 0, green_place_rate = 0, red_pick_rate = 0,
         red_place_rate = 0;
  double gaze_memory_rate = 0;
  int gaze_memory_n = 0;
  double mean_gaze_px_error = 0;
};

void finalize_report(EvalReport& r);
std::string report_json(const EvalReport& r);

// Append-only rollout buffers; exclusion pops the newest step from all
// three. Entries are per-step features of the frozen models, a pure function
// of the image they stand in for.
template <class S>
struct RolloutBuffers {
  std::vector<Vec<S>> gaze_feats;   // L_g
  std::vector<Vec<S>> fov_feats;    // L_f
  std::vector<Vec<S>> state_gaze;   // L_s rows: state (10) then gaze (2)

  std::array<size_t, 3> sizes() const {
    return {gaze_feats.size(), fov_feats.size(), state_gaze.size()};
  }
  void pop() {
    gaze_feats.pop_back();
    fov_feats.pop_back();
    state_gaze.pop_back();
  }
};

template <class S>
struct PolicyStepOut {
  Vec_d action_norm;
  double r_t = 0;      // measured transition at the newest step
  double p_t = 0;      // transition prediction at the newest step
  double p_prev = 0;   // prediction at the previous logical step
};

// Wraps a frozen model pair for step-at-a-time rollout.
template <class S>
struct ModelDriver {
  const model::ModelPair<S>* m;
  RolloutBuffers<S> buf;

  explicit ModelDriver(const model::ModelPair<S>& models) : m(&models) {}

  // Appends g_t to L_g, then predicts gaze from the whole buffer.
  Eigen::Vector2d gaze_step(const Mat<S>& global_img) {
    buf.gaze_feats.push_back(model::gaze_head_features(m->gaze, global_img));
    const int len = (int)buf.gaze_feats.size();
    Mat<S> feats(len, model::kSpatialFeatDim);
    for (int t = 0; t < len; ++t) feats.row(t) = buf.gaze_feats[t].transpose();
    Mat<S> raw = model::gaze_tail_forward(m->gaze, feats, m->gaze.cfg.w_eval);
    Vec<S> raw_last = raw.row(len - 1).transpose();
    Vec2<S> g = nn::select_gaze(nn::params_from_raw(raw_last));
    return {norm_to_px((double)g(0)), norm_to_px((double)g(1))};
  }

  PolicyStepOut<S> policy_step(const Mat<S>& fov_img, const Vec<S>& state_norm,
                               const Vec2<S>& gaze_norm) {
    buf.fov_feats.push_back(model::policy_head_features(m->policy, fov_img));
    Vec<S> sg(kStateDim + 2);
    sg << state_norm, gaze_norm;
    buf.state_gaze.push_back(sg);

    const int len = (int)buf.fov_feats.size();
    Mat<S> feats(len, model::kFovFeatDim), gazes(len, 2), states(len, kStateDim);
    for (int t = 0; t < len; ++t) {
      feats.row(t) = buf.fov_feats[t].transpose();
      states.row(t) = buf.state_gaze[t].head(kStateDim).transpose();
      gazes.row(t) = buf.state_gaze[t].tail(2).transpose();
    }
    model::PolicyOut<S> out = model::policy_tail_forward(
        m->policy, feats, gazes, states, m->policy.cfg.w_eval);
    PolicyStepOut<S> ps;
    ps.action_norm = out.actions.row(len - 1).transpose().template cast<double>();
    ps.r_t = (double)out.r(len - 1);
    ps.p_t = (double)out.p(len - 1);
    ps.p_prev = len >= 2 ? (double)out.p(len - 2) : 0.0;
    return ps;
  }

  void pop_step() { buf.pop(); }
  std::array<size_t, 3> sizes() const { return buf.sizes(); }
};

// Per-step observer for overlays and traces.
using StepHook = std::function<void(int real_step, const sim::SimState& state,
                                    const Mat_f& frame,
                                    const Eigen::Vector2d& gaze_px)>;

// One closed-loop rollout per Algorithm 1. The driver supplies gaze and
// policy outputs; exclusion removes the newest step from every buffer and
// leaves logical time in place while the environment advances one real step
// on the freshly computed action.
template <class Driver>
EpisodeReport run_episode(Driver& drv, std::uint64_t env_seed,
                          double c_threshold = kDefaultThreshold,
                          int max_steps = kDefaultMaxSteps,
                          const StepHook& hook = nullptr) {
  using sim::SimState;
  SimState s = sim::reset(env_seed);
  const Eigen::Vector2d origin_plate = s.plate_centers[s.green_origin_idx];
  const Vec_f scales_f = data::action_scales();
  const Vec_d scales = scales_f.cast<double>();

  EpisodeReport rep;
  rep.seed = env_seed;
  double gaze_err_sum = 0;
  int gaze_err_n = 0;

  for (int real = 0; real < max_steps && s.phase != sim::Phase::kDone; ++real) {
    Mat_f frame = sim::render(s);
    Mat_f global = sim::resize_global(frame);

    Eigen::Vector2d gaze_px = drv.gaze_step(global);
    Eigen::Vector2d truth = sim::expert_gaze_target(s);
    gaze_err_sum += (gaze_px - truth).norm();
    ++gaze_err_n;

    Mat_f fov = nn::crop_foveated<float>(frame, (float)gaze_px.x(),
                                         (float)gaze_px.y());
    Vec_d kin = sim::kin_state(s);
    Vec<float> state_norm =
        data::normalize_state<float>(Vec<float>(kin.cast<float>()));
    Vec2<float> gaze_norm = data::normalize_gaze_px<float>(
        (float)gaze_px.x(), (float)gaze_px.y());

    auto ps = drv.policy_step(fov, state_norm, gaze_norm);

    auto sz = drv.sizes();
    if (sz[0] != sz[1] || sz[1] != sz[2])
      throw std::logic_error("rollout buffers diverged in length");

    bool excluded = false;
    if (sz[0] >= 2 && c_threshold > 0 && ps.p_prev > 0 &&
        ps.r_t < c_threshold * ps.p_prev) {
      drv.pop_step();
      excluded = true;
      ++rep.excluded;
    }

    if (hook) hook(real, s, frame, gaze_px);

    Vec_d action = ps.action_norm.cwiseProduct(scales);
    s = sim::step(s, action);
    ++rep.steps;
    if (!excluded) ++rep.accepted;

    bool was_red_pick = rep.red_pick;
    rep.green_pick = rep.green_pick || green_pick_success(s);
    rep.green_place = rep.green_place || (rep.green_pick && green_place_success(s));
    rep.red_pick = rep.red_pick || (rep.green_place && red_pick_success(s));
    rep.red_place = rep.red_place || (rep.red_pick && red_place_success(s));
    if (!was_red_pick && rep.red_pick)
      rep.gaze_memory = gaze_memory_success(gaze_px, origin_plate) ? 1 : 0;
  }
  rep.done = s.phase == sim::Phase::kDone;
  rep.mean_gaze_px_error = gaze_err_n ? gaze_err_sum / gaze_err_n : 0.0;
  return rep;
}

// N closed-loop trials of a frozen model pair on fresh environments.
EvalReport evaluate(const model::ModelPair<float>& models, int n_episodes,
                    std::uint64_t seed0, double c_threshold = kDefaultThreshold,
                    int max_steps = kDefaultMaxSteps,
                    const std::function<StepHook(std::uint64_t)>& hook_factory = nullptr);

// Open-loop gaze-memory check on a scripted episode: run the gaze predictor
// over the recorded globals and test the selected gaze at the red-pick
// completion step s_rp against the origin plate.
bool open_loop_gaze_memory(const model::GazePredictor<float>& gaze,
                           const data::TrainEpisode& ep);

}  // namespace memgaze::exec
