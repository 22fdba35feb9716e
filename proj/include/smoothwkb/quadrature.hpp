#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "smoothwkb/errors.hpp"

namespace smoothwkb::quad {

namespace detail {

// 8-point Gauss-Legendre rule on [-1, 1].
inline constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

template <class F>
double gauss_panels(F& f, double a, double b, std::size_t panels) {
  const double h = (b - a) / static_cast<double>(panels);
  double sum = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double mid = a + (static_cast<double>(p) + 0.5) * h;
    double s = 0.0;
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) s += kGlWeights[i] * f(mid + 0.5 * h * kGlNodes[i]);
    sum += 0.5 * h * s;
  }
  return sum;
}

}  // namespace detail

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  std::size_t max_panels = std::size_t{1} << 15;
};

/// Composite 8-point Gauss-Legendre with panel doubling until two successive
/// estimates agree. Signed: integrate(f, b, a) == -integrate(f, a, b).
template <class F>
double integrate(F&& f, double a, double b, const Options& opt = {}) {
  if (a == b) return 0.0;
  if (b < a) return -integrate(f, b, a, opt);
  double prev = detail::gauss_panels(f, a, b, 1);
  for (std::size_t panels = 2; panels <= opt.max_panels; panels *= 2) {
    const double cur = detail::gauss_panels(f, a, b, panels);
    if (!std::isfinite(cur)) throw Error(ErrorCode::QuadratureFailure, "non-finite integrand");
    if (std::abs(cur - prev) <= opt.rel_tol * std::abs(cur) + opt.abs_tol) return cur;
    prev = cur;
  }
  throw Error(ErrorCode::QuadratureFailure, "panel doubling did not converge");
}

/// Integral over [a, b] split into geometrically shrinking pieces that
/// accumulate at `focus` (which must be a or b). Resolves integrands with
/// structure on arbitrarily small scales next to that endpoint.
template <class F>
double integrate_graded(F&& f, double a, double b, double focus, const Options& opt = {}) {
  if (a == b) return 0.0;
  if (b < a) return -integrate_graded(f, b, a, focus, opt);
  const double span = b - a;
  const double floor_width = 1e-15 * std::max(1.0, std::abs(focus));
  const bool at_left = focus == a;
  double total = 0.0;
  double outer = span;
  while (outer > floor_width) {
    const double inner = 0.5 * outer;
    const double lo = at_left ? a + inner : b - outer;
    const double hi = at_left ? a + outer : b - inner;
    total += integrate(f, lo, hi, opt);
    outer = inner;
  }
  return total;
}

/// Cumulative 4th-order quadrature on a fixed, possibly non-uniform grid.
/// Panel [t_j, t_{j+1}] integrates the cubic through four neighbouring nodes.
class CumulativeRule {
 public:
  struct Panel {
    std::size_t first = 0;  // index of the first stencil node
    std::array<double, 4> w{};
  };

  CumulativeRule() = default;

  explicit CumulativeRule(std::span<const double> t) {
    if (t.size() < 4) throw Error(ErrorCode::InvalidConfig, "cumulative rule needs at least 4 nodes");
    panels_.resize(t.size() - 1);
    for (std::size_t j = 0; j + 1 < t.size(); ++j) {
      Panel& p = panels_[j];
      p.first = stencil_start(j, t.size());
      p.w = lagrange_weights(t.subspan(p.first, 4), t[j], t[j + 1]);
    }
  }

  static std::size_t stencil_start(std::size_t j, std::size_t n) {
    if (j == 0) return 0;
    if (j + 2 >= n) return n - 4;
    return j - 1;
  }

  /// Integrals of the four Lagrange basis cubics through x over [a, b].
  static std::array<double, 4> lagrange_weights(std::span<const double> x, double a, double b) {
    // 3-point Gauss-Legendre is exact for cubics.
    constexpr std::array<double, 3> gx = {-0.7745966692414834, 0.0, 0.7745966692414834};
    constexpr std::array<double, 3> gw = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    std::array<double, 4> w{};
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t g = 0; g < 3; ++g) {
      const double s = mid + half * gx[g];
      for (std::size_t m = 0; m < 4; ++m) {
        double l = 1.0;
        for (std::size_t i = 0; i < 4; ++i)
          if (i != m) l *= (s - x[i]) / (x[m] - x[i]);
        w[m] += gw[g] * half * l;
      }
    }
    return w;
  }

  std::size_t size() const noexcept { return panels_.size() + 1; }
  const Panel& panel(std::size_t j) const { return panels_[j]; }

  double panel_integral(std::size_t j, std::span<const double> f) const {
    const Panel& p = panels_[j];
    double s = 0.0;
    for (std::size_t m = 0; m < 4; ++m) s += p.w[m] * f[p.first + m];
    return s;
  }

  std::vector<double> cumulative(std::span<const double> f) const {
    std::vector<double> out(size(), 0.0);
    for (std::size_t j = 0; j < panels_.size(); ++j) out[j + 1] = out[j] + panel_integral(j, f);
    return out;
  }

 private:
  std::vector<Panel> panels_;
};

}  // namespace smoothwkb::quad
