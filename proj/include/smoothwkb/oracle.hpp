#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "smoothwkb/errors.hpp"
#include "smoothwkb/volterra.hpp"
#include "smoothwkb/wkb_reference.hpp"

namespace smoothwkb {

enum class SeedKind { FullWavenumber, PotentialOnly };

struct OracleOptions {
  double tolerance = 1e-10;
  int guard_exp2 = 500;
  std::size_t max_steps = 50'000'000;
  SeedKind seed = SeedKind::FullWavenumber;
};

/// Samples of the regular solution of u'' = V(t) u with
/// V = -k^2R^2 + G^2R^2 U(Rt) + l(l+1)/t^2. The true values are
/// u_scaled * 2^scale_exp2, so the log-derivative is exact at any magnitude.
struct OracleSolution {
  std::vector<double> t;
  std::vector<double> u_scaled;
  std::vector<double> du_scaled;
  std::vector<std::int64_t> scale_exp2;
  double t_start = 0.0;
  double seed_log_derivative = 0.0;
  double seed_log_value = 0.0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  double max_error_estimate = 0.0;

  double log_derivative(std::size_t i) const { return du_scaled[i] / u_scaled[i]; }
  std::optional<std::size_t> find(double tt) const {
    for (std::size_t i = 0; i < t.size(); ++i)
      if (std::abs(t[i] - tt) <= 1e-12 * std::max(1.0, tt)) return i;
    return std::nullopt;
  }
};

namespace detail {

inline double radial_v(const WkbContext& ctx, double t) {
  const double R = ctx.R(), k = ctx.channel().k;
  const double lu = ctx.spec().log_coupled(R * t);
  const double l = ctx.channel().l;
  return -k * k * R * R + std::exp(lu + 2.0 * std::log(R)) + l * (l + 1.0) / (t * t);
}

}  // namespace detail

/// Checks the dominance condition for starting the integration at t.
inline bool oracle_start_admissible(const WkbContext& ctx, double t) {
  const double R = ctx.R(), k = ctx.channel().k;
  const double lu = ctx.spec().log_coupled(R * t);
  const double rhs = 1e3 * (k * k + ctx.channel().lambda_eps_sq / (R * R * t * t));
  return lu > std::log(rhs);
}

/// Walks t down from 1 until the potential dominates and at least
/// `min_phase` of exponential growth separates the start from t = 1.
inline double default_oracle_start(const WkbContext& ctx, double min_phase = 30.0) {
  for (double t = 0.9; t > 1e-8; t *= 0.95) {
    if (!oracle_start_admissible(ctx, t)) continue;
    if (ctx.phase_integral(Region::Epsilon, t, 1.0) >= min_phase) return t;
  }
  throw Error(ErrorCode::StartTooLate, "no admissible oracle start above t = 1e-8");
}

/// Dormand-Prince 5(4) integration from the regular-branch seed at t_start
/// through every requested sample up to t_end.
inline OracleSolution integrate_radial(const WkbContext& ctx, double t_start, double t_end,
                                       std::vector<double> samples = {}, const OracleOptions& opt = {}) {
  if (!(t_end > 1.0)) throw Error(ErrorCode::InvalidConfig, "oracle needs t_end > 1");
  if (!(t_start > 0.0 && t_start < 1.0) || !oracle_start_admissible(ctx, t_start))
    throw Error(ErrorCode::StartTooLate, "potential does not dominate at t_start");

  OracleSolution sol;
  sol.t_start = t_start;
  const double R = ctx.R();
  const LocalQuantities q0 = ctx.local(Region::Epsilon, t_start);
  const LogForm lf0 = ctx.spec().log_form(R * t_start);
  const double log_pot0 = ctx.spec().log_coupled(R * t_start) + 2.0 * std::log(R);
  double y0 = 0.0, log_u0 = 0.0;
  if (opt.seed == SeedKind::FullWavenumber) {
    y0 = q0.rk - 0.25 * q0.d1;
    log_u0 = std::log(q0.eta) - ctx.phase_integral(Region::Epsilon, t_start, 1.0);
  } else {
    const double root = std::exp(0.5 * log_pot0);
    y0 = root - 0.25 * lf0.l1 * R;
    auto sqrt_pot = [&](double t) {
      return std::exp(0.5 * (ctx.spec().log_coupled(R * t) + 2.0 * std::log(R)));
    };
    log_u0 = -0.25 * log_pot0 - quad::integrate(sqrt_pot, t_start, 1.0, {1e-10, 0.0, std::size_t{1} << 15});
  }
  sol.seed_log_derivative = y0;
  sol.seed_log_value = log_u0;

  std::int64_t ex = static_cast<std::int64_t>(std::floor(log_u0 / std::log(2.0)));
  std::array<double, 2> y{std::exp(log_u0 - static_cast<double>(ex) * std::log(2.0)), 0.0};
  y[1] = y[0] * y0;

  std::sort(samples.begin(), samples.end());
  samples.erase(std::remove_if(samples.begin(), samples.end(),
                               [&](double s) { return s < t_start || s > t_end; }),
                samples.end());
  samples.push_back(t_end);
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());

  auto record = [&](double t) {
    sol.t.push_back(t);
    sol.u_scaled.push_back(y[0]);
    sol.du_scaled.push_back(y[1]);
    sol.scale_exp2.push_back(ex);
  };
  record(t_start);

  // Dormand-Prince tableau.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  using State = std::array<double, 2>;
  auto f = [&](double t, const State& s) -> State { return {s[1], detail::radial_v(ctx, t) * s[0]}; };
  auto axpy = [](const State& s, double h, std::initializer_list<std::pair<double, const State*>> terms) {
    State out = s;
    for (auto [c, k] : terms) {
      out[0] += h * c * (*k)[0];
      out[1] += h * c * (*k)[1];
    }
    return out;
  };

  double t = t_start;
  double h = 0.05 / (std::sqrt(std::abs(detail::radial_v(ctx, t))) + 1.0);
  State k1 = f(t, y);
  std::size_t next = 0;
  while (next < samples.size()) {
    if (sol.steps + sol.rejected > opt.max_steps) throw Error(ErrorCode::StiffnessFailure, "step budget exhausted");
    const double target = samples[next];
    bool hits = false;
    double hh = h;
    if (t + hh >= target) {
      hh = target - t;
      hits = true;
    }
    if (hh < 1e-15 * std::max(1.0, t)) {
      if (hits) {
        t = target;
        record(t);
        ++next;
        continue;
      }
      throw Error(ErrorCode::StiffnessFailure, "step size underflow");
    }
    const State k2 = f(t + c2 * hh, axpy(y, hh, {{a21, &k1}}));
    const State k3 = f(t + c3 * hh, axpy(y, hh, {{a31, &k1}, {a32, &k2}}));
    const State k4 = f(t + c4 * hh, axpy(y, hh, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const State k5 = f(t + c5 * hh, axpy(y, hh, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const State k6 = f(t + hh, axpy(y, hh, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    const State yn = axpy(y, hh, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const State k7 = f(t + hh, yn);
    State err{};
    for (int c = 0; c < 2; ++c)
      err[c] = hh * (e1 * k1[c] + e3 * k3[c] + e4 * k4[c] + e5 * k5[c] + e6 * k6[c] + e7 * k7[c]);

    // Phase-space scale: a node of u is not a small solution.
    const double w = std::sqrt(std::abs(detail::radial_v(ctx, t + hh))) + 1e-3;
    const double su = std::max({std::abs(y[0]), std::abs(yn[0]), std::abs(y[1]) / w, std::abs(yn[1]) / w});
    const double sd = std::max({std::abs(y[1]), std::abs(yn[1]), std::abs(y[0]) * w, std::abs(yn[0]) * w});
    const double en = std::max(std::abs(err[0]) / (opt.tolerance * su), std::abs(err[1]) / (opt.tolerance * sd));

    if (en <= 1.0) {
      ++sol.steps;
      sol.max_error_estimate = std::max(sol.max_error_estimate, en * opt.tolerance);
      t = hits ? target : t + hh;
      y = yn;
      k1 = k7;
      const int e = std::ilogb(std::max(std::abs(y[0]), std::abs(y[1])));
      if (e > opt.guard_exp2 || e < -opt.guard_exp2) {
        y[0] = std::ldexp(y[0], -e);
        y[1] = std::ldexp(y[1], -e);
        k1[0] = std::ldexp(k1[0], -e);
        k1[1] = std::ldexp(k1[1], -e);
        ex += e;
      }
      if (hits) {
        record(t);
        ++next;
      }
      const double fac = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
      if (!hits || hh >= h) h = hh * std::clamp(fac, 0.2, 5.0);
    } else {
      ++sol.rejected;
      const double fac = std::isfinite(en) ? 0.9 * std::pow(en, -0.2) : 0.1;
      h = hh * std::clamp(fac, 0.1, 0.9);
    }
  }
  return sol;
}

struct CheckpointComparison {
  double t = 0.0;
  double oracle = 0.0;
  double candidate = 0.0;
  double deviation = 0.0;
  bool skipped = false;
};

struct ComparisonReport {
  double max_deviation = 0.0;
  std::vector<CheckpointComparison> points;
  std::size_t skipped() const {
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](auto& p) { return p.skipped; }));
  }
};

/// Max |Δ(u'/u)| over checkpoints. Points where either solution sits near a
/// node (|u| below node_fraction of its phase-space amplitude) are skipped.
inline ComparisonReport compare_log_derivative(const OracleSolution& oracle, const SeriesSolution& cand,
                                               std::span<const double> checkpoints, double node_fraction = 0.05) {
  ComparisonReport rep;
  for (double tc : checkpoints) {
    const auto oi = oracle.find(tc);
    const SolutionSample* s = cand.sample_at(tc, tc < 1.0 ? Region::Epsilon : Region::Tau);
    if (!oi || !s) throw Error(ErrorCode::InvalidConfig, "checkpoint " + std::to_string(tc) + " not sampled by both solutions");
    CheckpointComparison c;
    c.t = tc;
    c.oracle = oracle.log_derivative(*oi);
    c.candidate = s->log_derivative;
    const double ou = oracle.u_scaled[*oi], odu = oracle.du_scaled[*oi];
    const bool near_node_o = std::abs(ou) < node_fraction * std::hypot(ou, odu / s->rk);
    const bool near_node_c = std::abs(s->u) < node_fraction * std::hypot(s->u, s->du / s->rk);
    c.skipped = s->region == Region::Tau && (near_node_o || near_node_c);
    c.deviation = std::abs(c.oracle - c.candidate);
    if (!c.skipped) rep.max_deviation = std::max(rep.max_deviation, c.deviation);
    rep.points.push_back(c);
  }
  return rep;
}

/// n points in each region: evenly spread over (t_start, 1) and over
/// (1, min(t_hi, 4)), midpoint placement.
inline std::vector<double> default_checkpoints(double t_start, double t_hi, int n = 10) {
  std::vector<double> out;
  const double top = std::min(t_hi, 4.0);
  for (int i = 0; i < n; ++i) out.push_back(t_start + (1.0 - t_start) * (i + 0.5) / n);
  for (int i = 0; i < n; ++i) out.push_back(1.0 + (top - 1.0) * (i + 0.5) / n);
  return out;
}

struct OracleRun {
  SeriesSolution solution;
  OracleSolution oracle;
  ComparisonReport report;
};

/// Series solution and direct integration on shared checkpoints.
inline OracleRun run_with_oracle(const WkbContext& ctx, SeriesConfig cfg, const OracleOptions& opt = {}) {
  const double ts = default_oracle_start(ctx);
  double t_hi = cfg.t_max.value_or(0.0);
  if (!cfg.t_max) t_hi = build_basis(ctx, Region::Tau, cfg.grid_options()).q.back().t;
  if (cfg.checkpoints.empty()) cfg.checkpoints = default_checkpoints(ts, t_hi);
  OracleRun run;
  run.solution = solve_series(ctx, cfg);
  run.oracle = integrate_radial(ctx, ts, run.solution.t_max(), cfg.checkpoints, opt);
  run.report = compare_log_derivative(run.oracle, run.solution, cfg.checkpoints);
  return run;
}

inline void write_oracle_csv(std::ostream& os, const OracleSolution& o) {
  os << "t,u_scaled,uprime_scaled,scale_exp2\n";
  os.precision(17);
  for (std::size_t i = 0; i < o.t.size(); ++i)
    os << o.t[i] << ',' << o.u_scaled[i] << ',' << o.du_scaled[i] << ',' << o.scale_exp2[i] << '\n';
}

}  // namespace smoothwkb
