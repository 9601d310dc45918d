#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "memgaze/sim/replace.hpp"

using namespace memgaze;
using namespace memgaze::sim;

namespace {

bool states_equal(const SimState& a, const SimState& b) {
  return a.green_origin_idx == b.green_origin_idx &&
         a.target_idx == b.target_idx && a.green_pos == b.green_pos &&
         a.red_pos == b.red_pos && a.green_attached == b.green_attached &&
         a.red_attached == b.red_attached && a.gripper_pos == b.gripper_pos &&
         a.gripper_yaw == b.gripper_yaw && a.grip_angle == b.grip_angle &&
         a.phase == b.phase;
}

SimState roll_expert(SimState s, Rng& rng, int steps) {
  for (int i = 0; i < steps && s.phase != Phase::kDone; ++i)
    s = step(s, scripted_expert(s, rng).action);
  return s;
}

SimState roll_until(SimState s, Rng& rng, Phase target) {
  for (int i = 0; i < 400; ++i) {
    if (s.phase == target) return s;
    s = step(s, scripted_expert(s, rng).action);
  }
  FAIL("phase never reached");
  return s;
}

}  // namespace

TEST_CASE("reset is deterministic and leaves both apples detached") {
  SimState a = reset(0), b = reset(0);
  CHECK(states_equal(a, b));
  CHECK((a.green_origin_idx >= 0 && a.green_origin_idx <= 2));
  CHECK_FALSE(a.green_attached);
  CHECK_FALSE(a.red_attached);
  CHECK(a.phase == Phase::kApproachGreen);
  CHECK(a.target_idx != a.green_origin_idx);
}

TEST_CASE("reset origin index is uniform over 3000 seeds") {
  int count[3] = {0, 0, 0};
  for (int s = 0; s < 3000; ++s) ++count[reset((std::uint64_t)s).green_origin_idx];
  for (int i = 0; i < 3; ++i) {
    double f = count[i] / 3000.0;
    CHECK(f >= 0.30);
    CHECK(f <= 0.37);
  }
}

TEST_CASE("kinematic state has dimension 10 and unit cos/sin pairs") {
  Rng rng(7);
  SimState s = reset(7);
  s = roll_expert(s, rng, 25);
  Vec_d k = kin_state(s);
  REQUIRE(k.size() == 10);
  for (int p = 0; p < 3; ++p) {
    double c = k(3 + 2 * p), sn = k(4 + 2 * p);
    CHECK(std::abs(c * c + sn * sn - 1.0) < 1e-6);
  }
}

TEST_CASE("zero action changes nothing but the step index") {
  SimState s = reset(3);
  SimState n = step(s, Vec_d::Zero(10));
  CHECK(states_equal(s, n));
  CHECK(n.step_index == s.step_index + 1);
}

TEST_CASE("non-finite action is rejected") {
  SimState s = reset(1);
  Vec_d a = Vec_d::Zero(10);
  a(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((void)step(s, a), InvalidActionError);
}

TEST_CASE("closing the grip far from both apples attaches nothing") {
  SimState s = reset(2);
  // Home pose is > 10 px from any apple.
  CHECK((s.gripper_xy() - s.green_pos).norm() > kAttachRadius);
  Vec_d a = Vec_d::Zero(10);
  a(9) = 1.0;
  SimState n = step(s, a);
  CHECK_FALSE(n.green_attached);
  CHECK_FALSE(n.red_attached);
}

TEST_CASE("attachment requires the 10 px radius and a 0.5 upward crossing") {
  Rng rng(11);
  SimState s = roll_until(reset(11), rng, Phase::kPickGreen);
  CHECK((s.gripper_xy() - s.green_pos).norm() <= kAttachRadius);
  Vec_d close = Vec_d::Zero(10);
  close(9) = 0.3;
  SimState a = step(s, close);  // 0.3, below the crossing
  CHECK_FALSE(a.green_attached);
  SimState b = step(a, close);  // crosses 0.5
  CHECK(b.green_attached);
  CHECK(b.green_pos == b.gripper_xy());
}

TEST_CASE("scripted expert completes the task on every probed seed") {
  for (std::uint64_t seed : {0ull, 1ull, 2ull, 17ull, 99ull, 12345ull}) {
    Rng rng(seed);
    SimState s = reset(seed);
    int n = 0;
    while (s.phase != Phase::kDone && n < 400) {
      s = step(s, scripted_expert(s, rng).action);
      ++n;
    }
    REQUIRE(s.phase == Phase::kDone);
    CHECK((s.red_pos - s.plate_centers[s.green_origin_idx]).norm() <= 12.0);
    CHECK_FALSE(s.red_attached);
  }
}

TEST_CASE("expert gaze targets the green apple at start and the origin plate at the end") {
  Rng rng(5);
  SimState s = reset(5);
  CHECK(expert_gaze_target(s) == s.green_pos);
  SimState pr = roll_until(s, rng, Phase::kPlaceRed);
  CHECK(expert_gaze_target(pr) == pr.plate_centers[pr.green_origin_idx]);
}

TEST_CASE("scripted_expert refuses a finished episode") {
  Rng rng(4);
  SimState s = roll_until(reset(4), rng, Phase::kDone);
  CHECK_THROWS((void)scripted_expert(s, rng));
}

TEST_CASE("render puts the green disk on its plate and stays in [0,1]") {
  SimState s = reset(42);
  Mat_f img = render(s);
  REQUIRE(img.rows() == kFrameSize * kFrameSize);
  REQUIRE(img.cols() == 3);
  CHECK(img.minCoeff() >= 0.0f);
  CHECK(img.maxCoeff() <= 1.0f);
  int px = (int)std::lround(s.green_pos.x());
  int py = (int)std::lround(s.green_pos.y());
  CHECK(img(py * kFrameSize + px, 1) == doctest::Approx(0.78f));
  // Plate centers without an apple render plate gray.
  int free_idx = 3 - s.green_origin_idx - s.target_idx;
  Eigen::Vector2d fp = s.plate_centers[free_idx];
  CHECK(img((int)fp.y() * kFrameSize + (int)fp.x(), 0) == doctest::Approx(0.5f));
}

TEST_CASE("memory opacity: origin index is invisible once the green apple moved") {
  for (std::uint64_t seed : {1ull, 8ull, 21ull}) {
    Rng rng(seed);
    SimState s = roll_until(reset(seed), rng, Phase::kMoveGreen);
    SimState other = s;
    other.green_origin_idx = (s.green_origin_idx + 1) % 3;
    if (other.green_origin_idx == other.target_idx)
      other.green_origin_idx = (other.green_origin_idx + 1) % 3;
    Mat_f a = render(s), b = render(other);
    CHECK(a == b);
  }
}

TEST_CASE("stereo render duplicates the left frame with 4 px disparity") {
  SimState s = reset(9);
  Mat_f both = render_stereo(s);
  REQUIRE(both.cols() == 6);
  int y = 100, x = 130;
  CHECK(both(y * kFrameSize + x, 3) == both(y * kFrameSize + x - 4, 0));
}

TEST_CASE("generated episodes are deterministic with ordered boundaries") {
  Episode a = generate_episode(123);
  Episode b = generate_episode(123);
  REQUIRE(a.length() == b.length());
  CHECK(a.states == b.states);
  CHECK(a.gazes == b.gazes);
  CHECK(a.actions == b.actions);
  for (int t = 0; t < a.length(); ++t) CHECK(a.frames[t] == b.frames[t]);
  CHECK(a.s_gp == b.s_gp);

  CHECK(0 < a.s_gp);
  CHECK(a.s_gp < a.s_gr);
  CHECK(a.s_gr < a.s_rp);
  CHECK(a.s_rp < a.length());
}

TEST_CASE("recorded actions are exact state deltas") {
  Episode ep = generate_episode(77);
  for (int t = 0; t + 1 < ep.length(); ++t)
    CHECK(ep.actions.row(t) == ep.states.row(t + 1) - ep.states.row(t));
}

TEST_CASE("expert gaze label sits on the origin plate at red-pick completion") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Episode ep = generate_episode(seed);
    SimState s0 = reset(seed);
    Eigen::Vector2d origin = s0.plate_centers[s0.green_origin_idx];
    Eigen::Vector2d label(ep.gazes(ep.s_rp, 0), ep.gazes(ep.s_rp, 1));
    CHECK((label - origin).norm() <= 24.0);
  }
}

TEST_CASE("mean episode length stays in the nominal band") {
  double total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    total += generate_episode(seed).length();
  double mean = total / 100.0;
  CHECK(mean >= 70.0);
  CHECK(mean <= 100.0);
}
