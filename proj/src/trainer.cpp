#include "memgaze/train/trainer.hpp"

#include <algorithm>
#include <cctype>

namespace memgaze::train {

namespace {

const char* kConfigKeys[] = {"lambda_action",  "lambda_gaze", "lambda_transition",
                             "learning_rate",  "batch_size",  "epochs",
                             "seed",           "w_augmentation", "variant"};

TrainConfig from_json(const nlohmann::json& j) {
  for (const char* k : kConfigKeys)
    if (!j.contains(k)) throw ConfigError(std::string("config: missing key ") + k);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : kConfigKeys) known |= it.key() == k;
    if (!known) throw ConfigError("config: unknown key " + it.key());
  }
  TrainConfig c;
  c.lambda_action = j.at("lambda_action").get<double>();
  c.lambda_gaze = j.at("lambda_gaze").get<double>();
  c.lambda_transition = j.at("lambda_transition").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.at("w_augmentation").is_boolean())
    c.w_augmentation = j.at("w_augmentation").get<bool>();
  else
    c.w_augmentation = j.at("w_augmentation").get<int>() != 0;
  c.variant = model::variant_from_string(j.at("variant").get<std::string>());
  c.validate();
  return c;
}

}  // namespace

TrainConfig parse_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw ConfigError("config is empty: " + path);

  nlohmann::json j;
  if (text[first] == '{') {
    try {
      j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
      throw ConfigError("config parse error: " + std::string(e.what()));
    }
  } else {
    // key=value lines; '#' starts a comment.
    std::stringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      size_t eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key.empty()) continue;
      if (key == "variant")
        j[key] = val;
      else if (key == "w_augmentation")
        j[key] = (val == "true" || val == "1" || val == "on");
      else if (key == "batch_size" || key == "epochs")
        j[key] = std::stoi(val);
      else if (key == "seed")
        j[key] = (std::uint64_t)std::stoull(val);
      else
        j[key] = std::stod(val);
    }
  }
  return from_json(j);
}

std::string config_json(const TrainConfig& c) {
  nlohmann::json j;
  j["lambda_action"] = c.lambda_action;
  j["lambda_gaze"] = c.lambda_gaze;
  j["lambda_transition"] = c.lambda_transition;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["w_augmentation"] = c.w_augmentation;
  j["variant"] = model::to_string(c.variant);
  return j.dump();
}

TrainResult train(const TrainConfig& cfg,
                  const std::vector<data::TrainEpisode>& train_eps,
                  const std::vector<data::TrainEpisode>& val_eps,
                  std::ostream* metrics_jsonl, std::ostream* info) {
  cfg.validate();
  if (train_eps.empty() || val_eps.empty())
    throw ConfigError("train: need nonempty train and validation sets");

  const int n_threads =
      std::max(1, std::min(4, (int)std::thread::hardware_concurrency()));
  const int channels = train_eps[0].global_c;

  nn::EncoderConfig ecfg;  // spec defaults
  Rng rng(cfg.seed);
  model::ModelPair<float> models;
  models.resize(cfg.variant, ecfg, channels);
  models.init(rng);

  std::vector<model::ModelPair<float>> grads((size_t)n_threads);
  for (auto& g : grads) {
    g.resize(cfg.variant, ecfg, channels);
    g.set_zero();
  }
  Adam<float> adam(cfg.learning_rate);
  adam.attach(models, grads[0]);

  std::vector<EpisodeData<float>> train_data, val_data;
  train_data.reserve(train_eps.size());
  for (const auto& te : train_eps) train_data.push_back(to_episode_data<float>(te));
  for (const auto& te : val_eps) val_data.push_back(to_episode_data<float>(te));

  std::vector<int> order((int)train_data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = (int)i;

  TrainResult result;
  double best_score = std::numeric_limits<double>::infinity();
  int since_best_action = 0;
  double best_action = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = (int)order.size() - 1; i > 0; --i)
      std::swap(order[i], order[(int)rng.uniform_int((std::uint64_t)i + 1)]);

    double epoch_loss = 0;
    long epoch_batches = 0;
    for (size_t start = 0; start < order.size(); start += (size_t)cfg.batch_size) {
      size_t end = std::min(order.size(), start + (size_t)cfg.batch_size);
      const int nb = (int)(end - start);

      double w_pe = ecfg.w_eval;
      if (cfg.variant == model::Variant::kTransformer && cfg.w_augmentation)
        w_pe = nn::sample_w(rng, ecfg.w_low, ecfg.w_high);

      long na = 0, ng = 0, nt = 0;
      for (size_t i = start; i < end; ++i) {
        int len = (int)train_data[order[i]].states.rows();
        na += len;
        ng += len;
        nt += std::max(0, len - 1);
      }
      const double as = cfg.lambda_action / std::max(1l, na);
      const double gs = cfg.lambda_gaze / std::max(1l, ng);
      const double ts = cfg.lambda_transition / std::max(1l, nt);

      std::vector<LossSums<float>> sums((size_t)n_threads);
      for (auto& g : grads) g.set_zero();
      auto worker = [&](int tid) {
        for (size_t i = start + (size_t)tid; i < end; i += (size_t)n_threads)
          sums[tid] += episode_loss_grad(models, train_data[order[i]], w_pe, as,
                                         gs, ts, &grads[(size_t)tid]);
      };
      std::vector<std::thread> pool;
      for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker, t);
      worker(0);
      for (auto& th : pool) th.join();

      LossSums<float> total;
      for (auto& s : sums) total += s;
      // Thread buffers reduce in fixed order so results are run-to-run stable.
      std::vector<float*> dst;
      grads[0].for_each_param(
          [&](const std::string&, auto& m) { dst.push_back(m.data()); });
      for (int t = 1; t < n_threads; ++t) {
        size_t k = 0;
        grads[(size_t)t].for_each_param([&](const std::string&, auto& m) {
          Eigen::Map<Eigen::VectorXf>(dst[k], m.size()) +=
              Eigen::Map<const Eigen::VectorXf>(m.data(), m.size());
          ++k;
        });
      }

      double batch_loss = cfg.lambda_action * total.action / std::max(1l, na) +
                          cfg.lambda_gaze * total.gaze / std::max(1l, ng) +
                          cfg.lambda_transition * total.transition / std::max(1l, nt);
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(start / cfg.batch_size));
      epoch_loss += batch_loss;
      ++epoch_batches;
      (void)nb;
      adam.step();
    }

    ValMetrics vm;
    std::vector<ValMetrics> vms((size_t)n_threads);
    auto vworker = [&](int tid) {
      for (size_t i = (size_t)tid; i < val_data.size(); i += (size_t)n_threads) {
        ValMetrics one = validate_episode(models, val_data[i]);
        vms[(size_t)tid].action_l2 += one.action_l2;
        vms[(size_t)tid].gaze_px += one.gaze_px;
        vms[(size_t)tid].nll += one.nll;
        vms[(size_t)tid].steps += one.steps;
      }
    };
    {
      std::vector<std::thread> pool;
      for (int t = 1; t < n_threads; ++t) pool.emplace_back(vworker, t);
      vworker(0);
      for (auto& th : pool) th.join();
    }
    for (auto& v : vms) {
      vm.action_l2 += v.action_l2;
      vm.gaze_px += v.gaze_px;
      vm.nll += v.nll;
      vm.steps += v.steps;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.train_loss = epoch_loss / std::max(1l, epoch_batches);
    em.val_action_l2 = vm.action_l2 / (double)vm.steps;
    em.val_gaze_px = vm.gaze_px / (double)vm.steps;
    em.val_nll = vm.nll / (double)vm.steps;
    result.log.push_back(em);
    if (metrics_jsonl) {
      nlohmann::json j = {{"epoch", em.epoch},
                          {"train_loss", em.train_loss},
                          {"val_action_l2", em.val_action_l2},
                          {"val_gaze_px", em.val_gaze_px},
                          {"val_nll", em.val_nll}};
      (*metrics_jsonl) << j.dump() << "\n" << std::flush;
    }
    if (info)
      (*info) << "epoch " << em.epoch << " loss " << em.train_loss
              << " val_action " << em.val_action_l2 << " val_gaze_px "
              << em.val_gaze_px << "\n";

    double score = cfg.lambda_action * em.val_action_l2 +
                   cfg.lambda_gaze * em.val_nll +
                   cfg.lambda_transition * 0.0;
    if (score < best_score) {
      best_score = score;
      result.model = models;
      result.best_epoch = epoch;
    }
    if (em.val_action_l2 < best_action - 1e-12) {
      best_action = em.val_action_l2;
      since_best_action = 0;
    } else if (++since_best_action >= kEarlyStopPatience) {
      break;
    }
  }
  if (result.best_epoch < 0) {
    result.model = models;
    result.best_epoch = (int)result.log.size() - 1;
  }
  return result;
}

}  // namespace memgaze::train
