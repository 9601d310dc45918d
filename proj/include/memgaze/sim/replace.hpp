// Deterministic 2-D simulator of the Replace task with a scripted expert and
// synthetic gaze labels. The workspace x/y plane coincides with the 256x256
// image plane; z is carried through the kinematic interface but held flat.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <utility>

#include "memgaze/common.hpp"
#include "memgaze/data/episode.hpp"

namespace memgaze::sim {

using Eigen::Vector2d;
using Eigen::Vector3d;

enum class Phase {
  kApproachGreen,
  kPickGreen,
  kMoveGreen,
  kPlaceGreen,
  kApproachRed,
  kPickRed,
  kMoveRed,
  kPlaceRed,
  kDone,
};

// Geometry and dynamics constants.
constexpr double kPlateRadius = 20.0;
constexpr double kAppleRadius = 9.0;
constexpr double kAttachRadius = 10.0;
constexpr double kDeltaMax = 6.0;          // per-step position clamp
constexpr double kGripRate = 0.2;          // expert grip speed per step
constexpr double kYawRate = 0.12;          // expert yaw tracking per step
constexpr double kGazeNoiseSigma = 3.0;    // px
constexpr double kPlaceTol = 12.0;         // "on plate" radius
constexpr double kArriveTol = 2.0;
constexpr int kAnticipationSteps = 3;      // gaze leads pick/place completion
constexpr int kNominalHorizon = 80;
constexpr int kMaxHorizonFactor = 4;

inline std::array<Vector2d, 3> plate_layout() {
  return {Vector2d(56.0, 96.0), Vector2d(128.0, 96.0), Vector2d(200.0, 96.0)};
}
// Green is set down on the target plate beside the red apple.
inline Vector2d green_place_offset() { return Vector2d(-10.0, 0.0); }

struct SimState {
  std::array<Vector2d, 3> plate_centers;
  Vector2d target_plate_center;
  int target_idx = 0;
  int green_origin_idx = 0;
  Vector2d green_pos;
  Vector2d red_pos;
  bool green_attached = false;
  bool red_attached = false;
  Vector3d gripper_pos;
  double gripper_yaw = 0.0;
  double grip_angle = 0.0;  // 0 = open, 1 = closed
  Phase phase = Phase::kApproachGreen;
  int step_index = 0;

  Vector2d gripper_xy() const { return gripper_pos.head<2>(); }
};

// 10-D kinematic state: position, cos/sin of three Euler angles (only the
// last varies), grip angle.
Vec_d kin_state(const SimState& s);

struct ExpertStep {
  Vec_d action;   // 10-D command delta
  Vector2d gaze;  // noisy pixel gaze label
};

SimState reset(std::uint64_t seed);
SimState reset_with(Rng& rng);

// Applies a 10-D delta with the per-step clamps, runs attachment dynamics
// and the phase machine. Throws InvalidActionError on non-finite input.
SimState step(const SimState& s, const Vec_d& action);

// Renders the left-eye 256x256 frame, (256*256) x 3 pixel-major in [0,1].
Mat_f render(const SimState& s);
// Stereo pair as a (256*256) x 6 matrix, right eye shifted 4 px.
Mat_f render_stereo(const SimState& s);

// Noise-free gaze target of the current phase (anticipation included).
Vector2d expert_gaze_target(const SimState& s);

// Waypoint-following action plus noisy gaze label. Throws on kDone.
ExpertStep scripted_expert(const SimState& s, Rng& rng);

// 4x4 box-average of a pixel-major frame down to 64x64, any channel count.
Mat_f resize_global(const Mat_f& frame);

struct GenerationError : std::runtime_error {
  std::uint64_t seed;
  GenerationError(const std::string& msg, std::uint64_t sd)
      : std::runtime_error(msg), seed(sd) {}
};

Episode generate_episode(std::uint64_t seed, bool stereo = false);

}  // namespace memgaze::sim
