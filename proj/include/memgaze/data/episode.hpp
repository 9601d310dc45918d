#pragma once

#include <cstdint>
#include <vector>

#include "memgaze/common.hpp"

namespace memgaze {

// One demonstration. Per-step arrays all share length L.
//
// frames[t]  : (256*256) x C pixel-major image, C = 3 (mono) or 6 (stereo,
//              left channels first). Values in [0,1].
// global_[t] : (64*64) x C downsampled frame.
// states     : L x 10 kinematic states (position, cos/sin posture, grip).
// gazes      : L x 2 gaze points in 256-frame pixel coordinates.
// actions    : L x 10 raw state deltas; actions.row(t) = states.row(t+1) -
//              states.row(t) for t < L-1.
struct Episode {
  std::vector<Mat_f> frames;
  std::vector<Mat_f> global_images;
  Mat_f states;
  Mat_f gazes;
  Mat_f actions;
  int s_gp = 0;  // green pick completed; block [0, s_gp)
  int s_gr = 0;  // green place completed; block [s_gp, s_gr)
  int s_rp = 0;  // red pick completed; block [s_gr, s_rp); red place [s_rp, L)
  std::uint64_t seed = 0;
  bool stereo = false;

  int length() const { return static_cast<int>(frames.size()); }
  int frame_channels() const { return stereo ? 6 : 3; }
};

}  // namespace memgaze
