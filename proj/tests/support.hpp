#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "smoothwkb/matching_radius.hpp"
#include "smoothwkb/potential.hpp"
#include "smoothwkb/wkb_reference.hpp"

namespace testing_support {

using namespace smoothwkb;

inline PotentialSpec benchmark_spec() { return {Family::PowCorePowTail, 6.0, 4.0, 1.0, 1.0, 1.0}; }

inline double solved_radius(const PotentialSpec& s, const Channel& ch) {
  return solve_matching_radius({s, ch.k, ch.lambda_sq}).R;
}

inline WkbContext benchmark_context(int l = 0) {
  const Channel ch = Channel::make(1.0, l);
  return {benchmark_spec(), ch, solved_radius(benchmark_spec(), ch)};
}

// Composite Simpson with n (even) intervals; deliberately unrelated to the
// Gauss rules in the library.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Plain bisection on a sign change.
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double tol) {
  double flo = f(lo);
  while (hi - lo > tol * std::max(1.0, std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// V(t) of u'' = V u for the scaled radial equation, straight from U(r).
inline double radial_potential(const PotentialSpec& s, const Channel& ch, double R, double t) {
  const double u = s.form_factor(R * t).u;
  return -ch.k * ch.k * R * R + s.coupling() * u * R * R + ch.l * (ch.l + 1.0) / (t * t);
}

}  // namespace testing_support
