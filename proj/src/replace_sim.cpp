#include "memgaze/sim/replace.hpp"

#include <algorithm>
#include <cmath>

namespace memgaze::sim {

namespace {

double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

void fill_rect(Mat_f& img, double x0, double x1, double y0, double y1,
               float r, float g, float b) {
  int xa = std::max(0, (int)std::lround(x0));
  int xb = std::min(kFrameSize - 1, (int)std::lround(x1));
  int ya = std::max(0, (int)std::lround(y0));
  int yb = std::min(kFrameSize - 1, (int)std::lround(y1));
  for (int y = ya; y <= yb; ++y)
    for (int x = xa; x <= xb; ++x) {
      int p = y * kFrameSize + x;
      img(p, 0) = r;
      img(p, 1) = g;
      img(p, 2) = b;
    }
}

void fill_disk(Mat_f& img, const Vector2d& c, double rad, float r, float g,
               float b) {
  int xa = std::max(0, (int)std::floor(c.x() - rad));
  int xb = std::min(kFrameSize - 1, (int)std::ceil(c.x() + rad));
  int ya = std::max(0, (int)std::floor(c.y() - rad));
  int yb = std::min(kFrameSize - 1, (int)std::ceil(c.y() + rad));
  double r2 = rad * rad;
  for (int y = ya; y <= yb; ++y)
    for (int x = xa; x <= xb; ++x) {
      double dx = x - c.x(), dy = y - c.y();
      if (dx * dx + dy * dy <= r2) {
        int p = y * kFrameSize + x;
        img(p, 0) = r;
        img(p, 1) = g;
        img(p, 2) = b;
      }
    }
}

// Steps left until a closing grip reaches the 0.9 pick-completion mark.
int steps_to_close(double grip) {
  return (int)std::ceil((0.9 - grip) / kGripRate - 1e-12);
}
int steps_to_open(double grip) {
  return (int)std::ceil((grip - 0.1) / kGripRate - 1e-12);
}

Vector2d green_place_point(const SimState& s) {
  return s.target_plate_center + green_place_offset();
}

void advance_phase(SimState& s) {
  for (int guard = 0; guard < 8; ++guard) {
    Phase before = s.phase;
    switch (s.phase) {
      case Phase::kApproachGreen:
        if (s.green_attached ||
            (s.gripper_xy() - s.green_pos).norm() <= kArriveTol)
          s.phase = Phase::kPickGreen;
        break;
      case Phase::kPickGreen:
        if (s.green_attached && s.grip_angle >= 0.9)
          s.phase = Phase::kMoveGreen;
        break;
      case Phase::kMoveGreen:
        if (s.green_attached &&
            (s.gripper_xy() - green_place_point(s)).norm() <= kArriveTol)
          s.phase = Phase::kPlaceGreen;
        break;
      case Phase::kPlaceGreen:
        if (!s.green_attached && s.grip_angle <= 0.1 &&
            (s.green_pos - s.target_plate_center).norm() <= kPlaceTol)
          s.phase = Phase::kApproachRed;
        break;
      case Phase::kApproachRed:
        if (s.red_attached || (s.gripper_xy() - s.red_pos).norm() <= kArriveTol)
          s.phase = Phase::kPickRed;
        break;
      case Phase::kPickRed:
        if (s.red_attached && s.grip_angle >= 0.9) s.phase = Phase::kMoveRed;
        break;
      case Phase::kMoveRed:
        if (s.red_attached &&
            (s.gripper_xy() - s.plate_centers[s.green_origin_idx]).norm() <=
                kArriveTol)
          s.phase = Phase::kPlaceRed;
        break;
      case Phase::kPlaceRed:
        if (!s.red_attached && s.grip_angle <= 0.1 &&
            (s.red_pos - s.plate_centers[s.green_origin_idx]).norm() <=
                kPlaceTol)
          s.phase = Phase::kDone;
        break;
      case Phase::kDone:
        break;
    }
    if (s.phase == before) break;
  }
}

}  // namespace

Vec_d kin_state(const SimState& s) {
  Vec_d k(kStateDim);
  k << s.gripper_pos.x(), s.gripper_pos.y(), s.gripper_pos.z(), 1.0, 0.0, 1.0,
      0.0, std::cos(s.gripper_yaw), std::sin(s.gripper_yaw), s.grip_angle;
  return k;
}

SimState reset_with(Rng& rng) {
  SimState s;
  s.plate_centers = plate_layout();
  s.green_origin_idx = (int)rng.uniform_int(3);
  int others[2], n = 0;
  for (int i = 0; i < 3; ++i)
    if (i != s.green_origin_idx) others[n++] = i;
  s.target_idx = others[rng.uniform_int(2)];
  s.target_plate_center = s.plate_centers[s.target_idx];
  s.green_pos = s.plate_centers[s.green_origin_idx] +
                Vector2d(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
  s.red_pos = s.target_plate_center +
              Vector2d(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0));
  s.green_attached = false;
  s.red_attached = false;
  s.gripper_pos = Vector3d(128.0, 226.0, 40.0);
  s.gripper_yaw = 0.0;
  s.grip_angle = 0.0;
  s.phase = Phase::kApproachGreen;
  s.step_index = 0;
  return s;
}

SimState reset(std::uint64_t seed) {
  Rng rng(seed);
  return reset_with(rng);
}

SimState step(const SimState& s, const Vec_d& action) {
  if (action.size() != kActionDim || !action.allFinite())
    throw InvalidActionError("step: action must be a finite 10-vector");

  SimState n = s;

  Vector2d dxy(action[0], action[1]);
  if (dxy.norm() > kDeltaMax) dxy *= kDeltaMax / dxy.norm();
  n.gripper_pos.x() = clamp(s.gripper_pos.x() + dxy.x(), 0.0, 255.0);
  n.gripper_pos.y() = clamp(s.gripper_pos.y() + dxy.y(), 0.0, 255.0);
  n.gripper_pos.z() = clamp(s.gripper_pos.z() + action[2], 0.0, 100.0);

  // Posture deltas act on the cos/sin channels; only the renormalized yaw
  // pair feeds back into the state.
  if (action[7] != 0.0 || action[8] != 0.0) {
    double c = std::cos(s.gripper_yaw) + action[7];
    double sn = std::sin(s.gripper_yaw) + action[8];
    if (std::hypot(c, sn) > 1e-9) n.gripper_yaw = std::atan2(sn, c);
  }

  double old_grip = s.grip_angle;
  n.grip_angle = clamp(s.grip_angle + action[9], 0.0, 1.0);

  if (n.green_attached) n.green_pos = n.gripper_xy();
  if (n.red_attached) n.red_pos = n.gripper_xy();

  bool closed_now = old_grip < 0.5 && n.grip_angle >= 0.5;
  bool opened_now = old_grip >= 0.5 && n.grip_angle < 0.5;
  if (closed_now && !n.green_attached && !n.red_attached) {
    double dg = (n.green_pos - n.gripper_xy()).norm();
    double dr = (n.red_pos - n.gripper_xy()).norm();
    if (dg <= kAttachRadius && (dg <= dr || dr > kAttachRadius)) {
      n.green_attached = true;
      n.green_pos = n.gripper_xy();
    } else if (dr <= kAttachRadius) {
      n.red_attached = true;
      n.red_pos = n.gripper_xy();
    }
  } else if (opened_now) {
    n.green_attached = false;
    n.red_attached = false;
  }

  advance_phase(n);
  n.step_index = s.step_index + 1;
  return n;
}

Mat_f render(const SimState& s) {
  Mat_f img(kFrameSize * kFrameSize, 3);
  img.col(0).setConstant(0.82f);
  img.col(1).setConstant(0.82f);
  img.col(2).setConstant(0.82f);

  for (const auto& pc : s.plate_centers)
    fill_disk(img, pc, kPlateRadius, 0.5f, 0.5f, 0.5f);

  fill_disk(img, s.green_pos, kAppleRadius, 0.10f, 0.78f, 0.10f);
  fill_disk(img, s.red_pos, kAppleRadius, 0.85f, 0.12f, 0.12f);

  // Gripper: two fingers whose separation tracks the grip angle, plus a
  // crossbar. Drawn last so it occludes a held apple edge-on.
  double gx = s.gripper_pos.x(), gy = s.gripper_pos.y();
  double half_sep = 3.0 + std::round(6.0 * (1.0 - s.grip_angle));
  fill_rect(img, gx - half_sep - 1, gx - half_sep + 1, gy - 8, gy + 8, 0.15f,
            0.15f, 0.38f);
  fill_rect(img, gx + half_sep - 1, gx + half_sep + 1, gy - 8, gy + 8, 0.15f,
            0.15f, 0.38f);
  fill_rect(img, gx - half_sep, gx + half_sep, gy - 11, gy - 9, 0.15f, 0.15f,
            0.38f);
  return img.cwiseMax(0.0f).cwiseMin(1.0f);
}

Mat_f render_stereo(const SimState& s) {
  Mat_f left = render(s);
  Mat_f both(kFrameSize * kFrameSize, 6);
  both.leftCols<3>() = left;
  for (int y = 0; y < kFrameSize; ++y)
    for (int x = 0; x < kFrameSize; ++x) {
      int p = y * kFrameSize + x;
      if (x >= 4) {
        both.row(p).tail<3>() = left.row(p - 4).head<3>();
      } else {
        both(p, 3) = both(p, 4) = both(p, 5) = 0.82f;
      }
    }
  return both;
}

Vector2d expert_gaze_target(const SimState& s) {
  const Vector2d origin_plate = s.plate_centers[s.green_origin_idx];
  switch (s.phase) {
    case Phase::kApproachGreen:
      return s.green_pos;
    case Phase::kPickGreen:
      return steps_to_close(s.grip_angle) <= kAnticipationSteps
                 ? s.target_plate_center
                 : s.green_pos;
    case Phase::kMoveGreen:
      return s.target_plate_center;
    case Phase::kPlaceGreen:
      return steps_to_open(s.grip_angle) <= kAnticipationSteps
                 ? s.red_pos
                 : s.target_plate_center;
    case Phase::kApproachRed:
      return s.red_pos;
    case Phase::kPickRed:
      return steps_to_close(s.grip_angle) <= kAnticipationSteps ? origin_plate
                                                                : s.red_pos;
    case Phase::kMoveRed:
    case Phase::kPlaceRed:
      return origin_plate;
    case Phase::kDone:
      break;
  }
  return origin_plate;
}

ExpertStep scripted_expert(const SimState& s, Rng& rng) {
  if (s.phase == Phase::kDone)
    throw std::logic_error("scripted_expert: episode already done");

  Vector2d wp;
  double grip_cmd = 0.0;
  switch (s.phase) {
    case Phase::kApproachGreen:
      wp = s.green_pos;
      break;
    case Phase::kPickGreen:
      wp = s.gripper_xy();
      grip_cmd = std::min(kGripRate, 1.0 - s.grip_angle);
      break;
    case Phase::kMoveGreen:
      wp = green_place_point(s);
      break;
    case Phase::kPlaceGreen:
      wp = s.gripper_xy();
      grip_cmd = -std::min(kGripRate, s.grip_angle);
      break;
    case Phase::kApproachRed:
      wp = s.red_pos;
      break;
    case Phase::kPickRed:
      wp = s.gripper_xy();
      grip_cmd = std::min(kGripRate, 1.0 - s.grip_angle);
      break;
    case Phase::kMoveRed:
      wp = s.plate_centers[s.green_origin_idx];
      break;
    case Phase::kPlaceRed:
      wp = s.gripper_xy();
      grip_cmd = -std::min(kGripRate, s.grip_angle);
      break;
    case Phase::kDone:
      break;
  }

  Vector2d dxy = wp - s.gripper_xy();
  if (dxy.norm() > kDeltaMax) dxy *= kDeltaMax / dxy.norm();

  double yaw = s.gripper_yaw;
  if (dxy.norm() > 1e-6) {
    double want = std::atan2(dxy.y(), dxy.x());
    double diff = wrap_angle(want - yaw);
    yaw += clamp(diff, -kYawRate, kYawRate);
  }

  Vec_d a = Vec_d::Zero(kActionDim);
  a[0] = dxy.x();
  a[1] = dxy.y();
  a[7] = std::cos(yaw) - std::cos(s.gripper_yaw);
  a[8] = std::sin(yaw) - std::sin(s.gripper_yaw);
  a[9] = grip_cmd;

  Vector2d g = expert_gaze_target(s);
  g.x() = clamp(g.x() + kGazeNoiseSigma * rng.gaussian(), 0.0, 255.0);
  g.y() = clamp(g.y() + kGazeNoiseSigma * rng.gaussian(), 0.0, 255.0);
  return {a, g};
}

Mat_f resize_global(const Mat_f& frame) {
  const int c = (int)frame.cols();
  const int f = kFrameSize / kGlobalSize;  // 4
  Mat_f out(kGlobalSize * kGlobalSize, c);
  for (int gy = 0; gy < kGlobalSize; ++gy)
    for (int gx = 0; gx < kGlobalSize; ++gx) {
      Eigen::RowVectorXf acc = Eigen::RowVectorXf::Zero(c);
      for (int dy = 0; dy < f; ++dy)
        for (int dx = 0; dx < f; ++dx)
          acc += frame.row((gy * f + dy) * kFrameSize + (gx * f + dx));
      out.row(gy * kGlobalSize + gx) = acc / float(f * f);
    }
  return out;
}

Episode generate_episode(std::uint64_t seed, bool stereo) {
  Rng rng(seed);
  SimState s = reset_with(rng);

  Episode ep;
  ep.seed = seed;
  ep.stereo = stereo;
  const int max_steps = kNominalHorizon * kMaxHorizonFactor;

  std::vector<Vec_d> kins;
  std::vector<Vector2d> gazes;
  int s_gp = -1, s_gr = -1, s_rp = -1;

  for (int t = 0;; ++t) {
    if (t >= max_steps)
      throw GenerationError("expert failed to reach DONE", seed);
    Mat_f frame = stereo ? render_stereo(s) : render(s);
    ep.global_images.push_back(resize_global(frame));
    ep.frames.push_back(std::move(frame));
    kins.push_back(kin_state(s));
    ExpertStep ex = scripted_expert(s, rng);
    gazes.push_back(ex.gaze);

    SimState next = step(s, ex.action);
    if (s.phase == Phase::kPickGreen && next.phase == Phase::kMoveGreen)
      s_gp = t + 1;
    if (s.phase == Phase::kPlaceGreen && next.phase == Phase::kApproachRed)
      s_gr = t + 1;
    if (s.phase == Phase::kPickRed && next.phase == Phase::kMoveRed)
      s_rp = t + 1;
    s = next;
    if (s.phase == Phase::kDone) {
      kins.push_back(kin_state(s));  // final state, closes the last action
      break;
    }
  }

  const int L = (int)ep.frames.size();
  if (!(0 < s_gp && s_gp < s_gr && s_gr < s_rp && s_rp < L))
    throw GenerationError("subtask boundaries out of order", seed);
  ep.s_gp = s_gp;
  ep.s_gr = s_gr;
  ep.s_rp = s_rp;

  ep.states.resize(L, kStateDim);
  ep.gazes.resize(L, 2);
  ep.actions.resize(L, kActionDim);
  for (int t = 0; t < L; ++t) {
    ep.states.row(t) = kins[t].cast<float>().transpose();
    ep.gazes(t, 0) = (float)gazes[t].x();
    ep.gazes(t, 1) = (float)gazes[t].y();
  }
  // Realized deltas in float so the stored arrays satisfy
  // actions[t] == states[t+1] - states[t] exactly.
  Eigen::RowVectorXf last = kins[L].cast<float>().transpose();
  for (int t = 0; t + 1 < L; ++t)
    ep.actions.row(t) = ep.states.row(t + 1) - ep.states.row(t);
  ep.actions.row(L - 1) = last - ep.states.row(L - 1);
  return ep;
}

}  // namespace memgaze::sim
