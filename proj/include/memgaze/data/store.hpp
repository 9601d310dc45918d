// On-disk episode format, dataset manifest, train/val splitting, and padded
// minibatch assembly.
//
// RPLC file layout, all little-endian:
//   magic "RPLC" | u16 version | u16 stereo | u32 L
//   u32 frame_h, frame_w, frame_c | u32 global_h, global_w, global_c
//   u32 state_dim, action_dim | u32 s_gp, s_gr, s_rp | u64 seed
//   then row-major float32 arrays: frames, global images, states, gazes,
//   actions.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memgaze/data/episode.hpp"

namespace memgaze::data {

constexpr std::uint16_t kRplcVersion = 1;

struct ManifestItem {
  std::string file;
  int length = 0;
  std::uint64_t seed = 0;
  int s_gp = 0, s_gr = 0, s_rp = 0;
};

struct DatasetManifest {
  int version = 1;
  int episode_count = 0;
  int frame_h = kFrameSize, frame_w = kFrameSize, frame_c = 3;
  int global_h = kGlobalSize, global_w = kGlobalSize, global_c = 3;
  int state_dim = kStateDim;
  bool stereo = false;
  std::vector<ManifestItem> items;
};

void write_episode(const Episode& ep, const std::string& path);
Episode read_episode(const std::string& path);

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);
// Checks listed files exist and header lengths match; throws FormatError.
void validate_manifest(const DatasetManifest& m, const std::string& dir);

// Seeded by-episode split: disjoint, exhaustive, train gets round(f * N)
// clamped so both sides are nonempty.
std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& m,
                                                  double fraction,
                                                  std::uint64_t seed);

// Compact training view of one episode: teacher-forcing foveated crops are
// precomputed from the ground-truth gaze and the raw frames are dropped.
// Image rows are flattened pixel-major (pixel * channels + channel).
struct TrainEpisode {
  RowMat<float> global;        // L x (64*64*Cg)
  RowMat<float> fov;           // L x (64*64*3)
  Mat_f states_norm;           // L x 10
  Mat_f gazes_norm;            // L x 2
  Mat_f gazes_px;              // L x 2
  Mat_f actions_norm;          // L x 10
  int s_gp = 0, s_gr = 0, s_rp = 0;
  std::uint64_t seed = 0;
  int global_c = 3;

  int length() const { return (int)states_norm.rows(); }
};

TrainEpisode make_train_episode(const Episode& ep);

// Padded whole-episode minibatch. mask(b, t) is true exactly for t < L_b;
// padded positions are zero-filled.
struct Batch {
  RowMat<float> global;   // (B*L_max) x (64*64*Cg)
  RowMat<float> fov;      // (B*L_max) x (64*64*3)
  Mat_f states;           // (B*L_max) x 10
  Mat_f gazes_norm;       // (B*L_max) x 2
  Mat_f gazes_px;         // (B*L_max) x 2
  Mat_f actions;          // (B*L_max) x 10
  std::vector<int> lengths;
  int l_max = 0;
  int global_c = 3;

  int size() const { return (int)lengths.size(); }
  bool mask(int b, int t) const { return t < lengths[b]; }
  int row(int b, int t) const { return b * l_max + t; }
};

std::vector<Batch> batchify(const std::vector<const TrainEpisode*>& eps,
                            int batch_size);

}  // namespace memgaze::data
