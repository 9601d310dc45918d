#pragma once

#include <cmath>

#include "memgaze/common.hpp"

namespace memgaze::nn {

// Sinusoidal positional encoding:
//   PE(t, 2i)   = sin(t / W^(2i/ch))
//   PE(t, 2i+1) = cos(t / W^(2i/ch))
// Computed in double and cast, so the matrix is identical for every scalar
// instantiation.
template <class S>
Mat<S> sinusoidal_pe(int len, int ch, double w) {
  if (ch % 2 != 0) throw std::invalid_argument("sinusoidal_pe: ch must be even");
  if (!(w > 0.0)) throw std::invalid_argument("sinusoidal_pe: W must be > 0");
  Mat<S> pe(len, ch);
  for (int i = 0; 2 * i < ch; ++i) {
    double denom = std::pow(w, double(2 * i) / double(ch));
    for (int t = 0; t < len; ++t) {
      pe(t, 2 * i) = S(std::sin(double(t) / denom));
      pe(t, 2 * i + 1) = S(std::cos(double(t) / denom));
    }
  }
  return pe;
}

// One uniform draw of the positional-encoding scale per training minibatch.
inline double sample_w(Rng& rng, double lo = 2000.0, double hi = 20000.0) {
  return rng.uniform(lo, hi);
}

}  // namespace memgaze::nn
