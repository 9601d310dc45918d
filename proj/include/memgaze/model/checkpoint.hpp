// Checkpoint container: format version, variant, encoder config, then every
// parameter array of both predictors as named little-endian float32 blobs.
//
// Layout: magic "MGZC" | u16 version | u8 variant | u8 stereo |
//         i32 d_model, n_heads, n_layers, d_ff | f64 w_low, w_high, w_eval |
//         u32 tensor count | per tensor: u16 name length, name bytes,
//         u32 rows, u32 cols, row-major float32 data.
#pragma once

#include <cstring>
#include <fstream>

#include "memgaze/model/predictors.hpp"

namespace memgaze::model {

constexpr std::uint16_t kCheckpointVersion = 1;

template <class S>
struct ModelPair {
  GazePredictor<S> gaze;
  PolicyPredictor<S> policy;

  void resize(Variant v, const nn::EncoderConfig& cfg, int global_channels = 3) {
    gaze.resize(v, cfg, global_channels);
    policy.resize(v, cfg);
  }
  void init(Rng& rng) {
    gaze.init(rng);
    policy.init(rng);
  }
  void set_zero() {
    for_each_param([](const std::string&, auto& t) { t.setZero(); });
  }
  template <class F>
  void for_each_param(F&& f) {
    gaze.for_each_param(f);
    policy.for_each_param(f);
  }
};

template <class S>
void save_checkpoint(ModelPair<S>& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write checkpoint: " + path);
  auto pod = [&](auto v) { f.write((const char*)&v, sizeof(v)); };
  f.write("MGZC", 4);
  pod(kCheckpointVersion);
  pod((std::uint8_t)m.gaze.variant);
  pod((std::uint8_t)(m.gaze.in_channels == 6 ? 1 : 0));
  pod((std::int32_t)m.gaze.cfg.d_model);
  pod((std::int32_t)m.gaze.cfg.n_heads);
  pod((std::int32_t)m.gaze.cfg.n_layers);
  pod((std::int32_t)m.gaze.cfg.d_ff);
  pod(m.gaze.cfg.w_low);
  pod(m.gaze.cfg.w_high);
  pod(m.gaze.cfg.w_eval);

  std::uint32_t count = 0;
  m.for_each_param([&](const std::string&, auto&) { ++count; });
  pod(count);
  m.for_each_param([&](const std::string& name, auto& t) {
    pod((std::uint16_t)name.size());
    f.write(name.data(), (std::streamsize)name.size());
    pod((std::uint32_t)t.rows());
    pod((std::uint32_t)t.cols());
    for (int i = 0; i < t.rows(); ++i)
      for (int j = 0; j < t.cols(); ++j) {
        float v = (float)t(i, j);
        f.write((const char*)&v, sizeof(float));
      }
  });
  if (!f) throw FormatError("checkpoint write failed: " + path);
}

template <class S>
ModelPair<S> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint: " + path);
  auto pod = [&](auto& v) {
    f.read((char*)&v, sizeof(v));
    if (!f) throw FormatError("checkpoint truncated: " + path);
  };
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "MGZC", 4) != 0)
    throw FormatError("not a checkpoint file: " + path);
  std::uint16_t version;
  pod(version);
  if (version != kCheckpointVersion)
    throw FormatError("checkpoint version mismatch in " + path);
  std::uint8_t variant_u8, stereo_u8;
  pod(variant_u8);
  pod(stereo_u8);
  if (variant_u8 > 2) throw FormatError("checkpoint: bad variant byte");
  nn::EncoderConfig cfg;
  std::int32_t iv;
  pod(iv), cfg.d_model = iv;
  pod(iv), cfg.n_heads = iv;
  pod(iv), cfg.n_layers = iv;
  pod(iv), cfg.d_ff = iv;
  pod(cfg.w_low);
  pod(cfg.w_high);
  pod(cfg.w_eval);

  ModelPair<S> m;
  m.resize((Variant)variant_u8, cfg, stereo_u8 ? 6 : 3);
  std::uint32_t count;
  pod(count);
  std::uint32_t seen = 0;
  m.for_each_param([&](const std::string& name, auto& t) {
    std::uint16_t nlen;
    pod(nlen);
    std::string got(nlen, '\0');
    f.read(got.data(), nlen);
    if (!f || got != name)
      throw FormatError("checkpoint: expected tensor " + name + ", found " + got);
    std::uint32_t rows, cols;
    pod(rows);
    pod(cols);
    if ((int)rows != t.rows() || (int)cols != t.cols())
      throw FormatError("checkpoint: shape mismatch for " + name);
    for (int i = 0; i < t.rows(); ++i)
      for (int j = 0; j < t.cols(); ++j) {
        float v;
        pod(v);
        t(i, j) = (S)v;
      }
    ++seen;
  });
  if (seen != count) throw FormatError("checkpoint: tensor count mismatch");
  return m;
}

}  // namespace memgaze::model
