#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include "smoothwkb/errors.hpp"
#include "smoothwkb/matching_radius.hpp"
#include "smoothwkb/oracle.hpp"
#include "smoothwkb/potential.hpp"
#include "smoothwkb/quadrature.hpp"
#include "smoothwkb/volterra.hpp"
#include "smoothwkb/wkb_reference.hpp"

namespace smoothwkb {

enum class RegimeVerdict { ConvergesBothRegions, TauDiverges };

constexpr std::string_view to_string(RegimeVerdict v) noexcept {
  return v == RegimeVerdict::ConvergesBothRegions ? "ConvergesBothRegions" : "TauDiverges";
}

/// Large-A convergence regime: only the S-wave over an exponential tail
/// loses the trigonometric-region bound.
constexpr RegimeVerdict regime_verdict(Family f, int l) noexcept {
  return has_exp_tail(f) && l == 0 ? RegimeVerdict::TauDiverges : RegimeVerdict::ConvergesBothRegions;
}

/// The same tail with the other kind of core, at equal core strength
/// (r1 a = rho1 alpha).
inline PotentialSpec core_equivalent(const PotentialSpec& s) {
  Family f = s.family();
  switch (f) {
    case Family::ExpCoreExpTail: f = Family::PowCoreExpTail; break;
    case Family::PowCoreExpTail: f = Family::ExpCoreExpTail; break;
    case Family::ExpCorePowTail: f = Family::PowCorePowTail; break;
    case Family::PowCorePowTail: f = Family::ExpCorePowTail; break;
  }
  return {f, s.core_param(), s.tail_param(), s.core_scale(), s.tail_scale(), s.coupling()};
}

struct AsymptoticProfile {
  PotentialSpec spec;
  Channel channel;
  double R_asym;

  static AsymptoticProfile make(const PotentialSpec& spec, const Channel& ch) {
    return {spec, ch, asymptotic_radius(spec)};
  }

  double kR() const { return channel.k * R_asym; }

  /// Limiting residual potentials.
  double residual(Region g, double t) const {
    check(g, t);
    const double B = spec.tail_param(), s = spec.tail_scale();
    const double tt = 1.0 / (t * t) + 1.0;
    if (g == Region::Tau && channel.l > 0)
      return 3.0 * channel.lambda_tau_sq / (2.0 * channel.k * channel.k * R_asym * R_asym * t * t * t * t);
    const double pre = g == Region::Epsilon ? -1.0 / 16.0 : -9.0 / 16.0;
    if (has_exp_tail(spec.family())) {
      const double x = B * R_asym / s;
      return pre * x * x * tt * tt;
    }
    const double lg = std::log(R_asym / s);
    return pre * lg * lg * B * B / (t * t * t * t);
  }

  /// Limiting weights p = Δ/(RK) in their closed forms.
  double weight(Region g, double t) const {
    check(g, t);
    const double k = channel.k, B = spec.tail_param(), s = spec.tail_scale(), G = std::sqrt(spec.coupling());
    const double R = R_asym;
    const double tt = 1.0 / (t * t) + 1.0;
    if (g == Region::Epsilon) {
      if (has_exp_tail(spec.family()))
        return -B * B * R / (16.0 * G * s * s) * tt * tt * std::exp(-B * R / s * (1.0 / t - t));
      const double lg = std::log(R / s);
      const double base = spec.coupling() / (k * k) * std::pow(s / R, B);
      return -lg * lg * B * B / (16.0 * k * R) * std::pow(t, 0.5 * B - 2.0) * std::pow(base, 1.0 / t - 1.0);
    }
    return residual(g, t) / (k * R);
  }

  /// Leading weights re-derived from Δ/(RK) with the limiting potential.
  /// Unlike the closed forms above, the exponent carries the square root of
  /// K; in region τ the centrifugal term gives Δ = -(3/2) λ_τ²/(k²R²t⁴).
  /// The S-wave in region τ has no uniform leading form.
  double leading_weight(Region g, double t) const {
    check(g, t);
    const double k = channel.k, B = spec.tail_param(), s = spec.tail_scale(), G = std::sqrt(spec.coupling());
    const double R = R_asym;
    if (g == Region::Tau) {
      if (channel.l == 0) throw Error(ErrorCode::UnsupportedRegime, "no uniform leading weight for the S-wave in region tau");
      return -1.5 * channel.lambda_tau_sq / (k * k * R * R * t * t * t * t) / (k * R);
    }
    const double tt = 1.0 / (t * t) + 1.0;
    if (has_exp_tail(spec.family()))
      return -B * B * R / (16.0 * G * s * s) * tt * tt * std::exp(-0.5 * B * R / s * (1.0 / t - t));
    const double lg = std::log(R / s);
    const double base = spec.coupling() / (k * k) * std::pow(s / R, B);
    return -lg * lg * B * B / (16.0 * k * R) * std::pow(t, 0.5 * B - 4.0) * std::pow(base, 0.5 * (1.0 / t - 1.0));
  }

  /// ∫|weight| over [t1, t2] within one region; t1 = 0 is allowed for eps.
  double weight_integral(Region g, double t1, double t2) const {
    if (t1 == t2) return 0.0;
    quad::Options o;
    o.rel_tol = 1e-12;
    o.abs_tol = 1e-300;
    auto f = [&](double t) { return std::abs(weight(g, t)); };
    if (g == Region::Epsilon && t1 <= 0.0) {
      double total = quad::integrate(f, 0.5 * t2, t2, o);
      for (double hi = 0.5 * t2; hi > 1e-300; hi *= 0.5) {
        const double piece = quad::integrate(f, 0.5 * hi, hi, o);
        total += piece;
        if (piece <= 1e-14 * total) break;
      }
      return total;
    }
    return quad::integrate(f, t1, t2, o);
  }

 private:
  void check(Region g, double t) const {
    if (!(t > 0.0)) throw Error(ErrorCode::DomainError, "t must be positive");
    if (g == Region::Epsilon && t > 1.0) throw Error(ErrorCode::DomainError, "exponential region requires t <= 1");
    if (g == Region::Tau && t < 1.0) throw Error(ErrorCode::DomainError, "trigonometric region requires t >= 1");
  }
};

/// T_m = (P/2)^m / m!.
inline double t_factor(double P, int m) {
  if (P < 0.0 || m < 0) throw Error(ErrorCode::DomainError, "t_factor needs P >= 0 and m >= 0");
  double T = 1.0;
  for (int i = 1; i <= m; ++i) T *= 0.5 * P / i;
  return T;
}

/// Closed four-cycle for the higher trigonometric coefficients.
inline std::pair<double, double> coefficient_cycle(double C0, double S0, double P, int m) {
  const double T = t_factor(P, m);
  switch (m % 4) {
    case 0: return {T * C0, T * S0};
    case 1: return {T * S0, -T * C0};
    case 2: return {-T * C0, -T * S0};
    default: return {-T * S0, T * C0};
  }
}

/// Iterates C_m = 1/2 ∫ p S_{m-1}, S_m = -1/2 ∫ p C_{m-1} on [1, t] by
/// quadrature. Returns (C_m(t), S_m(t)) for m = 0..m_max.
inline std::vector<std::pair<double, double>> coefficient_recursion(double C0, double S0,
                                                                    const std::function<double(double)>& p, double t,
                                                                    int m_max, std::size_t nodes = 4001) {
  if (!(t >= 1.0)) throw Error(ErrorCode::DomainError, "recursion runs over t >= 1");
  std::vector<std::pair<double, double>> out{{C0, S0}};
  if (t == 1.0) {
    for (int m = 1; m <= m_max; ++m) out.emplace_back(0.0, 0.0);
    return out;
  }
  std::vector<double> x(nodes), pv(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    x[i] = 1.0 + (t - 1.0) * static_cast<double>(i) / static_cast<double>(nodes - 1);
    pv[i] = p(x[i]);
  }
  const quad::CumulativeRule rule(x);
  std::vector<double> C(nodes, C0), S(nodes, S0), fc(nodes), fs(nodes);
  for (int m = 1; m <= m_max; ++m) {
    for (std::size_t i = 0; i < nodes; ++i) {
      fc[i] = 0.5 * pv[i] * S[i];
      fs[i] = -0.5 * pv[i] * C[i];
    }
    C = rule.cumulative(fc);
    S = rule.cumulative(fs);
    out.emplace_back(C.back(), S.back());
  }
  return out;
}

/// Partial sums Σ_μ [T_{4μ} - T_{4μ+2}] and Σ_μ [T_{4μ+1} - T_{4μ+3}].
inline std::pair<double, double> grouped_t_sums(double P, int mu_max = 40) {
  double a = 0.0, b = 0.0;
  for (int mu = 0; mu <= mu_max; ++mu) {
    a += t_factor(P, 4 * mu) - t_factor(P, 4 * mu + 2);
    b += t_factor(P, 4 * mu + 1) - t_factor(P, 4 * mu + 3);
  }
  return {a, b};
}

/// Zero-order limiting solution: constants from the limiting weights and
/// region evaluators built on the exact reference functions at the exact R.
struct AsymptoticSolution {
  AsymptoticProfile profile;
  WkbContext ctx;
  double P_eps_01 = 0.0;
  double C0 = 0.0;
  double S0 = 0.0;

  double T(int m, double t) const { return t_factor(profile.weight_integral(Region::Tau, 1.0, t), m); }

  /// w_eps0(t) exp P_eps(0, t).
  double v_eps(double t) const {
    const LocalQuantities q = ctx.local(Region::Epsilon, t);
    const double om = ctx.phase_integral(Region::Epsilon, 1.0, t);
    return q.eta * std::exp(om + profile.weight_integral(Region::Epsilon, 0.0, t));
  }

  double w_tau0_plus(double t) const {
    const double x = ctx.kR() * (t - 1.0);
    return ctx.local(Region::Tau, t).eta * (C0 * std::cos(x) + S0 * std::sin(x));
  }
  double w_tau0_minus(double t) const {
    const double x = ctx.kR() * (t - 1.0);
    return ctx.local(Region::Tau, t).eta * (S0 * std::cos(x) - C0 * std::sin(x));
  }

  /// Resummed form: cos(P/2) w+ + sin(P/2) w-.
  double v_tau(double t) const {
    const double half = 0.5 * profile.weight_integral(Region::Tau, 1.0, t);
    return std::cos(half) * w_tau0_plus(t) + std::sin(half) * w_tau0_minus(t);
  }

  /// Grouped partial-sum form, kept for cross-checking the resummation.
  double v_tau_partial(double t, int mu_max = 40) const {
    const auto [a, b] = grouped_t_sums(profile.weight_integral(Region::Tau, 1.0, t), mu_max);
    return a * w_tau0_plus(t) + b * w_tau0_minus(t);
  }
};

inline AsymptoticSolution asym_zero_order(const AsymptoticProfile& profile) {
  if (has_exp_tail(profile.spec.family()) && profile.channel.l == 0)
    throw Error(ErrorCode::UnsupportedRegime, "S-wave over an exponential tail has no limiting zero-order form");
  const double R = solve_matching_radius({profile.spec, profile.channel.k, profile.channel.lambda_sq}).R;
  AsymptoticSolution s{profile, WkbContext(profile.spec, profile.channel, R)};
  s.P_eps_01 = profile.weight_integral(Region::Epsilon, 0.0, 1.0);
  s.C0 = std::exp(s.P_eps_01);
  s.S0 = s.C0 * (std::pow(2.0, 3.75) * profile.channel.lambda_sq + std::pow(2.0, -0.75));
  return s;
}

struct ZeroOrderDeviation {
  double R = 0.0;
  double eps = 0.0;  // sup |w0/u - 1| on the exponential grid above the oracle start
  double tau = 0.0;  // sup |w0 - u| / sup |u| on the trigonometric grid
  double total() const { return std::max(eps, tau); }
};

/// Distance between the lone zero-order reference terms (exact smooth
/// matching at t = 1) and the direct solution, normalized at t = 1.
inline ZeroOrderDeviation zero_order_deviation(const PotentialSpec& spec, const Channel& ch, SeriesConfig cfg = {}) {
  cfg.N = 0;
  cfg.M = 0;
  cfg.check_bounds = false;
  const double R = solve_matching_radius({spec, ch.k, ch.lambda_sq}).R;
  const WkbContext ctx(spec, ch, R);
  const SeriesSolution s = solve_series(ctx, cfg);
  const double ts = default_oracle_start(ctx);

  std::vector<double> at;
  for (const auto& smp : s.samples)
    if (smp.t >= ts) at.push_back(smp.t);
  const OracleSolution o = integrate_radial(ctx, ts, s.t_max(), at);

  auto log_abs = [&](std::size_t i) {
    return std::log(std::abs(o.u_scaled[i])) + static_cast<double>(o.scale_exp2[i]) * std::log(2.0);
  };
  const std::size_t i1 = *o.find(1.0);
  const SolutionSample* s1 = s.sample_at(1.0, Region::Epsilon);
  const double shift = std::log(std::abs(s1->u)) - log_abs(i1);

  ZeroOrderDeviation d;
  d.R = R;
  double sup_u = 0.0, sup_diff = 0.0;
  for (const auto& smp : s.samples) {
    if (smp.t < ts) continue;
    const auto oi = o.find(smp.t);
    if (!oi) continue;
    if (smp.region == Region::Epsilon) {
      const double lr = std::log(std::abs(smp.u)) - (log_abs(*oi) + shift);
      d.eps = std::max(d.eps, std::abs(std::expm1(lr)));
    } else {
      const double u = o.u_scaled[*oi] * std::ldexp(1.0, static_cast<int>(o.scale_exp2[*oi] - o.scale_exp2[i1])) *
                       (s1->u / o.u_scaled[i1]);
      sup_u = std::max(sup_u, std::abs(u));
      sup_diff = std::max(sup_diff, std::abs(smp.u - u));
    }
  }
  d.tau = sup_u > 0.0 ? sup_diff / sup_u : 0.0;
  return d;
}

/// P integrals from the exact reference tables, without iterating.
struct ConvergenceProfile {
  double R = 0.0;
  double P_eps = 0.0;
  double P_tau = 0.0;
  double t_max = 0.0;
};

inline ConvergenceProfile convergence_profile(const PotentialSpec& spec, const Channel& ch, const GridOptions& go = {}) {
  const double R = solve_matching_radius({spec, ch.k, ch.lambda_sq}).R;
  const WkbContext ctx(spec, ch, R);
  const ReferenceBasis e = build_basis(ctx, Region::Epsilon, go);
  const ReferenceBasis t = build_basis(ctx, Region::Tau, go);
  ConvergenceProfile c;
  c.R = R;
  c.P_eps = detail::cumulative_abs(e).back() + e.origin_tail;
  c.P_tau = detail::cumulative_abs(t).back();
  c.t_max = t.q.back().t;
  return c;
}

}  // namespace smoothwkb
