// Test-only oracles and finite-difference utilities. These stay independent
// of the library code paths they check.
#pragma once

#include <cmath>
#include <functional>

#include "memgaze/common.hpp"

namespace memgaze::test {

// Relative error with a magnitude floor: coordinates far below the floor are
// compared absolutely, which keeps finite-difference noise out of the metric.
inline double rel_err(double a, double b, double floor_ = 1e-12) {
  double denom = std::max({floor_, std::abs(a), std::abs(b)});
  return std::abs(a - b) / denom;
}

// Central difference of a scalar functional w.r.t. one coordinate.
template <class F>
double central_diff(double& x, F&& loss, double h = 1e-4) {
  double x0 = x;
  x = x0 + h;
  double lp = loss();
  x = x0 - h;
  double lm = loss();
  x = x0;
  return (lp - lm) / (2.0 * h);
}

// Brute-force mixture density at a point, extended precision. Independent of
// the library's log-sum-exp path.
inline long double gmm_density_bruteforce(const Vec_d& w, const Mat_d& mu,
                                          const Mat_d& sigma, const Vec_d& rho,
                                          double tx, double ty) {
  long double total = 0.0L;
  for (int i = 0; i < w.size(); ++i) {
    long double sx = sigma(i, 0), sy = sigma(i, 1), r = rho(i);
    long double dx = (long double)tx - mu(i, 0);
    long double dy = (long double)ty - mu(i, 1);
    long double om = 1.0L - r * r;
    long double q = dx * dx / (sx * sx) - 2.0L * r * dx * dy / (sx * sy) +
                    dy * dy / (sy * sy);
    long double dens = expl(-q / (2.0L * om)) /
                       (2.0L * (long double)M_PI * sx * sy * sqrtl(om));
    total += (long double)w(i) * dens;
  }
  return total;
}

}  // namespace memgaze::test
