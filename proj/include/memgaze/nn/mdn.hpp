// 8-component bivariate Gaussian mixture head: raw-vector transform, the
// stabilized negative log-likelihood with its analytic gradient, and
// maximum-probability gaze selection.
#pragma once

#include <cmath>

#include "memgaze/common.hpp"

namespace memgaze::nn {

constexpr int kMixtureComponents = 8;
// Raw layout: 8 weight logits, 16 means, 16 log-scales, 8 correlation
// pre-activations.
constexpr int kMdnRawDim = 48;

constexpr double kLogScaleMin = -6.0;
constexpr double kLogScaleMax = 3.0;
constexpr double kRhoBound = 0.999;

template <class S>
struct GmmParams {
  Vec<S> w;      // 8, simplex
  Mat<S> mu;     // 8 x 2, normalized coordinates
  Mat<S> sigma;  // 8 x 2, (sigma_x, sigma_y) > 0
  Vec<S> rho;    // 8, in (-kRhoBound, kRhoBound)
};

template <class S>
GmmParams<S> params_from_raw(const Vec<S>& raw) {
  if (raw.size() != kMdnRawDim || !raw.allFinite())
    throw std::invalid_argument("params_from_raw: need a finite 48-vector");
  GmmParams<S> p;
  const int n = kMixtureComponents;
  Vec<S> logits = raw.head(n);
  S m = logits.maxCoeff();
  Vec<S> e = (logits.array() - m).exp();
  p.w = e / e.sum();
  p.mu.resize(n, 2);
  p.sigma.resize(n, 2);
  p.rho.resize(n);
  for (int i = 0; i < n; ++i) {
    p.mu(i, 0) = raw(n + 2 * i);
    p.mu(i, 1) = raw(n + 2 * i + 1);
    p.sigma(i, 0) =
        std::exp(clamp<S>(raw(3 * n + 2 * i), S(kLogScaleMin), S(kLogScaleMax)));
    p.sigma(i, 1) = std::exp(
        clamp<S>(raw(3 * n + 2 * i + 1), S(kLogScaleMin), S(kLogScaleMax)));
    p.rho(i) = S(kRhoBound) * std::tanh(raw(5 * n + i));
  }
  return p;
}

// Log-density of one bivariate normal component at (tx, ty).
template <class S>
S component_log_density(const GmmParams<S>& p, int i, S tx, S ty) {
  S sx = p.sigma(i, 0), sy = p.sigma(i, 1), rho = p.rho(i);
  S one_m = S(1) - rho * rho;
  S u = (tx - p.mu(i, 0)) / sx;
  S v = (ty - p.mu(i, 1)) / sy;
  S quad = u * u - S(2) * rho * u * v + v * v;
  return -std::log(S(2) * S(M_PI)) - std::log(sx) - std::log(sy) -
         S(0.5) * std::log(one_m) - quad / (S(2) * one_m);
}

// -log sum_i w_i N(target; mu_i, Sigma_i), log-sum-exp stabilized.
template <class S>
S nll(const GmmParams<S>& p, S tx, S ty) {
  const int n = kMixtureComponents;
  Vec<S> l(n);
  for (int i = 0; i < n; ++i)
    l(i) = std::log(p.w(i)) + component_log_density(p, i, tx, ty);
  S m = l.maxCoeff();
  return -(m + std::log((l.array() - m).exp().sum()));
}

// Loss and gradient w.r.t. the raw 48-vector, in one pass.
template <class S>
S nll_backward(const Vec<S>& raw, S tx, S ty, Vec<S>& draw) {
  const int n = kMixtureComponents;
  GmmParams<S> p = params_from_raw(raw);
  Vec<S> l(n);
  for (int i = 0; i < n; ++i)
    l(i) = std::log(p.w(i)) + component_log_density(p, i, tx, ty);
  S m = l.maxCoeff();
  Vec<S> gamma = (l.array() - m).exp();
  S z = gamma.sum();
  gamma /= z;
  S loss = -(m + std::log(z));

  draw.setZero(kMdnRawDim);
  for (int i = 0; i < n; ++i) draw(i) = p.w(i) - gamma(i);  // weight logits
  for (int i = 0; i < n; ++i) {
    S sx = p.sigma(i, 0), sy = p.sigma(i, 1), rho = p.rho(i);
    S one_m = S(1) - rho * rho;
    S u = (tx - p.mu(i, 0)) / sx;
    S v = (ty - p.mu(i, 1)) / sy;
    S quad = u * u - S(2) * rho * u * v + v * v;
    S gi = -gamma(i);  // dLoss/d(logN_i)

    draw(n + 2 * i) = gi * (u - rho * v) / (one_m * sx);
    draw(n + 2 * i + 1) = gi * (v - rho * u) / (one_m * sy);

    // d logN / d log(sigma); clamp kills the gradient outside its range.
    S dlsx = S(-1) + u * (u - rho * v) / one_m;
    S dlsy = S(-1) + v * (v - rho * u) / one_m;
    S rawx = raw(3 * n + 2 * i), rawy = raw(3 * n + 2 * i + 1);
    draw(3 * n + 2 * i) =
        (rawx > S(kLogScaleMin) && rawx < S(kLogScaleMax)) ? gi * dlsx : S(0);
    draw(3 * n + 2 * i + 1) =
        (rawy > S(kLogScaleMin) && rawy < S(kLogScaleMax)) ? gi * dlsy : S(0);

    S drho = rho / one_m + (u * v * one_m - rho * quad) / (one_m * one_m);
    S t = std::tanh(raw(5 * n + i));
    draw(5 * n + i) = gi * drho * S(kRhoBound) * (S(1) - t * t);
  }
  return loss;
}

// Density height of component i at its own mean: w_i / (2 pi sx sy sqrt(1-rho^2)).
template <class S>
S mode_height(const GmmParams<S>& p, int i) {
  return p.w(i) / (S(2) * S(M_PI) * p.sigma(i, 0) * p.sigma(i, 1) *
                   std::sqrt(S(1) - p.rho(i) * p.rho(i)));
}

// The mean of the component with the highest mode; ties keep the lowest index.
template <class S>
Vec2<S> select_gaze(const GmmParams<S>& p) {
  int best = 0;
  S best_h = mode_height(p, 0);
  for (int i = 1; i < kMixtureComponents; ++i) {
    S h = mode_height(p, i);
    if (h > best_h) {
      best = i;
      best_h = h;
    }
  }
  return Vec2<S>(p.mu(best, 0), p.mu(best, 1));
}

}  // namespace memgaze::nn
