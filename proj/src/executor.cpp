#include "memgaze/exec/executor.hpp"

#include <thread>

#include <json.hpp>

namespace memgaze::exec {

void finalize_report(EvalReport& r) {
  const double n = std::max<size_t>(1, r.episodes.size());
  double gp = 0, gpl = 0, rp = 0, rpl = 0, err = 0;
  int mem_ok = 0, mem_n = 0;
  for (const auto& e : r.episodes) {
    gp += e.green_pick;
    gpl += e.green_place;
    rp += e.red_pick;
    rpl += e.red_place;
    err += e.mean_gaze_px_error;
    if (e.gaze_memory >= 0) {
      ++mem_n;
      mem_ok += e.gaze_memory;
    }
  }
  r.green_pick_rate = gp / n;
  r.green_place_rate = gpl / n;
  r.red_pick_rate = rp / n;
  r.red_place_rate = rpl / n;
  r.mean_gaze_px_error = err / n;
  r.gaze_memory_n = mem_n;
  r.gaze_memory_rate = mem_n ? (double)mem_ok / mem_n : 0.0;
}

std::string report_json(const EvalReport& r) {
  nlohmann::json j;
  j["episodes"] = nlohmann::json::array();
  for (const auto& e : r.episodes) {
    nlohmann::json je = {
        {"seed", e.seed},
        {"green_pick", e.green_pick},
        {"green_place", e.green_place},
        {"red_pick", e.red_pick},
        {"red_place", e.red_place},
        {"steps", e.steps},
        {"accepted", e.accepted},
        {"excluded", e.excluded},
        {"done", e.done},
        {"mean_gaze_px_error", e.mean_gaze_px_error},
    };
    if (e.gaze_memory >= 0)
      je["gaze_memory"] = e.gaze_memory == 1;
    else
      je["gaze_memory"] = nullptr;
    j["episodes"].push_back(je);
  }
  j["aggregate"] = {
      {"trials", r.episodes.size()},
      {"C", r.c_threshold},
      {"green_pick_rate", r.green_pick_rate},
      {"green_place_rate", r.green_place_rate},
      {"red_pick_rate", r.red_pick_rate},
      {"red_place_rate", r.red_place_rate},
      {"gaze_memory_rate", r.gaze_memory_rate},
      {"gaze_memory_n", r.gaze_memory_n},
      {"mean_gaze_px_error", r.mean_gaze_px_error},
  };
  return j.dump(2);
}

EvalReport evaluate(const model::ModelPair<float>& models, int n_episodes,
                    std::uint64_t seed0, double c_threshold, int max_steps,
                    const std::function<StepHook(std::uint64_t)>& hook_factory) {
  EvalReport report;
  report.c_threshold = c_threshold;
  report.episodes.resize((size_t)n_episodes);

  const int n_threads =
      std::max(1, std::min(4, (int)std::thread::hardware_concurrency()));
  auto worker = [&](int tid) {
    for (int i = tid; i < n_episodes; i += n_threads) {
      std::uint64_t seed = seed0 + (std::uint64_t)i;
      ModelDriver<float> drv(models);
      StepHook hook = hook_factory ? hook_factory(seed) : StepHook();
      report.episodes[(size_t)i] =
          run_episode(drv, seed, c_threshold, max_steps, hook);
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& th : pool) th.join();

  finalize_report(report);
  return report;
}

bool open_loop_gaze_memory(const model::GazePredictor<float>& gaze,
                           const data::TrainEpisode& ep) {
  Mat_f raw = model::gaze_forward_raw(gaze, ep.global, gaze.cfg.w_eval);
  Vec_f raw_t = raw.row(ep.s_rp).transpose();
  Vec2<float> g = nn::select_gaze(nn::params_from_raw(raw_t));
  Eigen::Vector2d gaze_px(norm_to_px((double)g(0)), norm_to_px((double)g(1)));
  sim::SimState s0 = sim::reset(ep.seed);
  return gaze_memory_success(gaze_px, s0.plate_centers[s0.green_origin_idx]);
}

}  // namespace memgaze::exec
