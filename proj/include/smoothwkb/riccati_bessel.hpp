#pragma once

#include <cmath>
#include <numbers>

#include "smoothwkb/errors.hpp"

namespace smoothwkb {

/// Riccati-Bessel pair ĵ_l(x) = x j_l(x), n̂_l(x) = x y_l(x) and derivatives.
/// Note n̂_0(x) = -cos x.
struct RiccatiBessel {
  double j;
  double dj;
  double n;
  double dn;
};

inline RiccatiBessel riccati_bessel(int l, double x) {
  if (l < 0 || !(x > 0.0)) throw Error(ErrorCode::DomainError, "riccati_bessel needs l >= 0 and x > 0");
  if (l == 0) return {std::sin(x), std::cos(x), -std::cos(x), std::sin(x)};
  const unsigned ul = static_cast<unsigned>(l);
  const double jl = std::sph_bessel(ul, x), jm = std::sph_bessel(ul - 1, x);
  const double yl = std::sph_neumann(ul, x), ym = std::sph_neumann(ul - 1, x);
  return {x * jl, x * jm - l * jl, x * yl, x * ym - l * yl};
}

/// Phase shift from the radial log-derivative gamma = (du/dr)/u at r,
/// reduced into (-pi/2, pi/2].
inline double phase_from_log_derivative(int l, double k, double r, double gamma) {
  const RiccatiBessel rb = riccati_bessel(l, k * r);
  double d = std::atan2(gamma * rb.j - k * rb.dj, gamma * rb.n - k * rb.dn);
  d = std::remainder(d, std::numbers::pi);
  if (d <= -std::numbers::pi / 2) d += std::numbers::pi;
  return d;
}

}  // namespace smoothwkb
