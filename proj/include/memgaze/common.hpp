// Shared scalar-templated dense types, deterministic RNG, and coordinate
// conventions used across the library.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace memgaze {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Vec2 = Eigen::Matrix<S, 2, 1>;

using Mat_f = Mat<float>;
using Mat_d = Mat<double>;
using Vec_f = Vec<float>;
using Vec_d = Vec<double>;

// Images are stored pixel-major: rows = H*W with row index y*W + x,
// cols = channels. This keeps im2col/GEMM layouts trivial.
constexpr int kFrameSize = 256;
constexpr int kGlobalSize = 64;
constexpr int kFoveaSize = 64;
constexpr int kStateDim = 10;
constexpr int kActionDim = 10;

// Pixel <-> normalized [-1,1] coordinates over an N-pixel axis.
template <class S>
inline S px_to_norm(S px, int n = kFrameSize) {
  return S(2) * px / S(n - 1) - S(1);
}
template <class S>
inline S norm_to_px(S u, int n = kFrameSize) {
  return (u + S(1)) * S(n - 1) / S(2);
}

class InvalidActionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Seeded generator with explicit bit-to-double mapping so sequences do not
// depend on libstdc++ distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller, pair cached.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t s_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

template <class S>
inline S clamp(S v, S lo, S hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace memgaze
