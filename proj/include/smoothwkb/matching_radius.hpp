#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "smoothwkb/errors.hpp"
#include "smoothwkb/potential.hpp"

namespace smoothwkb {

struct MatchingProblem {
  PotentialSpec spec;
  double k;
  double lambda_sq;
};

/// f(R) = k^2 R^2 - G^2 R^2 U(R) - lambda^2.
inline double master_residual(const MatchingProblem& p, double R) {
  if (!(R > 0.0)) throw Error(ErrorCode::DomainError, "matching radius must be positive");
  const double log_pot = p.spec.log_coupled(R) + 2.0 * std::log(R);
  const double pot = log_pot > 700.0 ? std::numeric_limits<double>::infinity() : std::exp(log_pot);
  return p.k * p.k * R * R - pot - p.lambda_sq;
}

struct MatchingRoot {
  double R = 0.0;
  double residual = 0.0;
  double relative_residual = 0.0;  // |f| / (k^2 R^2)
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int sign_changes = 0;
  int scan_points = 0;
};

inline MatchingRoot solve_matching_radius(const MatchingProblem& p) {
  if (!(p.k > 0.0)) throw Error(ErrorCode::DomainError, "k must be positive");
  if (!(p.lambda_sq >= 0.0)) throw Error(ErrorCode::DomainError, "lambda^2 must be nonnegative");
  const double lo = 1e-8 * p.spec.core_scale(), hi = 1e8 * p.spec.tail_scale();

  MatchingRoot out;
  double prev_r = lo, prev_f = master_residual(p, lo);
  for (double r = 2.0 * lo;; r *= 2.0) {
    const double x = std::min(r, hi);
    const double f = master_residual(p, x);
    ++out.scan_points;
    if ((prev_f < 0.0) != (f < 0.0)) {
      if (++out.sign_changes == 1) {
        out.bracket_lo = prev_r;
        out.bracket_hi = x;
      }
    }
    prev_r = x;
    prev_f = f;
    if (x >= hi) break;
  }
  if (out.sign_changes == 0) throw Error(ErrorCode::NoRoot, "master equation has no sign change on the scan");
  if (out.sign_changes > 1)
    throw Error(ErrorCode::AmbiguousRoot, "master equation changes sign " + std::to_string(out.sign_changes) + " times");

  double a = out.bracket_lo, b = out.bracket_hi;
  const bool neg_at_a = master_residual(p, a) < 0.0;
  while (true) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    if ((master_residual(p, m) < 0.0) == neg_at_a)
      a = m;
    else
      b = m;
  }
  const double fa = master_residual(p, a), fb = master_residual(p, b);
  out.R = std::abs(fa) <= std::abs(fb) ? a : b;
  out.residual = master_residual(p, out.R);
  out.relative_residual = std::abs(out.residual) / (p.k * p.k * out.R * out.R);
  return out;
}

/// Large-A matching radius. Exponential tails have the closed form
/// sqrt(c A s / B); power tails solve R = s exp(c A / (B R)) on log R.
/// Neither depends on k or the coupling.
inline double asymptotic_radius(const PotentialSpec& spec) {
  const double cA = spec.core_scale() * spec.core_param();
  const double B = spec.tail_param(), s = spec.tail_scale();
  if (has_exp_tail(spec.family())) return std::sqrt(cA * s / B);

  // h(x) = x - log s - cA/(B e^x) is strictly increasing in x = log R.
  auto h = [&](double x) { return x - std::log(s) - cA / (B * std::exp(x)); };
  double lo = std::log(s), hi = lo + 1.0;
  for (int i = 0; h(hi) <= 0.0; ++i) {
    if (i > 200) throw Error(ErrorCode::NoRoot, "implicit radius relation not bracketed");
    hi = lo + 2.0 * (hi - lo);
  }
  while (true) {
    const double m = 0.5 * (lo + hi);
    if (m <= lo || m >= hi) break;
    (h(m) < 0.0 ? lo : hi) = m;
  }
  return std::exp(0.5 * (lo + hi));
}

enum class RadiusKind { Solved, Asymptotic };

struct SublinearityTrend {
  std::vector<double> A;
  std::vector<double> ratio;       // R(A) / A
  std::optional<bool> decreasing;  // empty for a single grid point
};

inline SublinearityTrend sublinearity_trend(const PotentialSpec& base, double k, double lambda_sq,
                                            std::span<const double> A_grid, RadiusKind kind = RadiusKind::Solved) {
  SublinearityTrend out;
  for (std::size_t i = 0; i < A_grid.size(); ++i) {
    if (i > 0 && !(A_grid[i] > A_grid[i - 1])) throw Error(ErrorCode::InvalidConfig, "A-grid must be increasing");
    const PotentialSpec s = base.with_core_param(A_grid[i]);
    const double R = kind == RadiusKind::Solved ? solve_matching_radius({s, k, lambda_sq}).R : asymptotic_radius(s);
    out.A.push_back(A_grid[i]);
    out.ratio.push_back(R / A_grid[i]);
  }
  if (out.ratio.size() >= 2) {
    bool dec = true;
    for (std::size_t i = 1; i < out.ratio.size(); ++i) dec = dec && out.ratio[i] < out.ratio[i - 1];
    out.decreasing = dec;
  }
  return out;
}

}  // namespace smoothwkb
