// Fixed normalization between raw simulator units and the [-1,1]-ish ranges
// the networks train on. Constants are part of the checkpoint contract: a
// policy trained with them must be executed with them.
#pragma once

#include "memgaze/common.hpp"

namespace memgaze::data {

// Per-channel action scales: position deltas are bounded by the simulator's
// 6-unit step clamp, cos/sin deltas by the yaw rate, grip by its step size.
inline Vec_f action_scales() {
  Vec_f s(kActionDim);
  s << 6.f, 6.f, 6.f, 0.3f, 0.3f, 0.3f, 0.3f, 0.3f, 0.3f, 0.25f;
  return s;
}

template <class S>
Vec<S> normalize_state(const Vec<S>& raw) {
  Vec<S> n = raw;
  n(0) = px_to_norm<S>(raw(0));
  n(1) = px_to_norm<S>(raw(1));
  n(2) = raw(2) / S(50) - S(1);
  n(9) = raw(9) * S(2) - S(1);
  return n;
}

template <class S>
Vec2<S> normalize_gaze_px(S gx, S gy) {
  return Vec2<S>(px_to_norm<S>(gx), px_to_norm<S>(gy));
}

}  // namespace memgaze::data
