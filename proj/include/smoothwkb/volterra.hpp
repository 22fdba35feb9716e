#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothwkb/errors.hpp"
#include "smoothwkb/matching_radius.hpp"
#include "smoothwkb/quadrature.hpp"
#include "smoothwkb/riccati_bessel.hpp"
#include "smoothwkb/wkb_reference.hpp"

namespace smoothwkb {

struct SeriesConfig {
  int N = 4;
  int M = 4;
  double t_min = 1e-4;
  std::optional<double> t_max;
  GridOptions grid;
  bool check_bounds = true;
  int bound_orders = 5;
  double bound_slack = 1e-6;
  double divergence_threshold = 100.0;
  std::vector<double> checkpoints;

  void validate() const {
    if (N < 0 || M < 0) throw Error(ErrorCode::InvalidConfig, "orders must be nonnegative");
    if (!(t_min > 0.0 && t_min < 1.0)) throw Error(ErrorCode::InvalidConfig, "t_min must lie in (0, 1)");
    if (t_max && !(*t_max > 1.0)) throw Error(ErrorCode::InvalidConfig, "t_max must exceed 1");
    if (!(divergence_threshold > 0.0)) throw Error(ErrorCode::InvalidConfig, "divergence threshold must be positive");
  }

  GridOptions grid_options() const {
    GridOptions g = grid;
    g.t_min = t_min;
    g.t_max = t_max;
    g.pins.insert(g.pins.end(), checkpoints.begin(), checkpoints.end());
    return g;
  }
};

/// Resolvent kernels expressed through the local wavenumbers. Both vanish on
/// the diagonal and carry no dependence on the reference coefficients.
inline double kernel(const WkbContext& ctx, Region g, double t, double tp) {
  if (tp > t) throw Error(ErrorCode::DomainError, "kernel requires t' <= t");
  const double w = ctx.phase_integral(g, tp, t);
  const double scale = std::sqrt(ctx.local(g, t).rk * ctx.local(g, tp).rk);
  return (g == Region::Epsilon ? std::sinh(w) : std::sin(w)) / scale;
}

namespace detail {

struct ExpMoments {
  std::array<double, 4> mu{};  // ∫_0^1 y^k e^{-θy} dy
  std::array<double, 4> nu{};  // ∫_0^1 y^k (1 - e^{-θy}) dy
};

inline ExpMoments exp_moments(double theta) {
  ExpMoments m;
  if (std::isinf(theta)) {
    for (int k = 0; k < 4; ++k) m.nu[k] = 1.0 / (k + 1);
    return m;
  }
  if (theta < 2.0) {
    for (int k = 0; k < 4; ++k) {
      double term = 1.0, nu = 0.0;
      for (int j = 1; j < 60; ++j) {
        term *= -theta / j;
        const double c = term / (k + j + 1);
        nu -= c;
        if (std::abs(c) < 1e-18 * std::abs(nu)) break;
      }
      m.nu[k] = nu;
      m.mu[k] = 1.0 / (k + 1) - nu;
    }
    return m;
  }
  const double e = std::exp(-theta);
  m.mu[0] = -std::expm1(-theta) / theta;
  for (int k = 1; k < 4; ++k) m.mu[k] = (k * m.mu[k - 1] - e) / theta;
  for (int k = 0; k < 4; ++k) m.nu[k] = 1.0 / (k + 1) - m.mu[k];
  return m;
}

/// Weights of the cubic interpolant against e^{-θy} and 1 - e^{-θy}, where
/// y = (b - s)/h runs backward from the right end of panel [a, b].
struct FittedPanel {
  std::size_t first = 0;
  std::array<double, 4> we{};
  std::array<double, 4> wf{};
  double decay = 1.0;
  double one_minus = 0.0;
};

inline FittedPanel fitted_panel(std::span<const double> x, std::size_t first, double a, double b, double theta) {
  FittedPanel fp;
  fp.first = first;
  fp.decay = std::exp(-theta);
  fp.one_minus = -std::expm1(-theta);
  const ExpMoments mom = exp_moments(theta);
  const double h = b - a;
  for (std::size_t m = 0; m < 4; ++m) {
    std::array<double, 4> c{1.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < 4; ++i) {
      if (i == m) continue;
      const double den = x[first + m] - x[first + i];
      const double al = (b - x[first + i]) / den, be = -h / den;
      for (std::size_t d = 3; d > 0; --d) c[d] = c[d] * al + c[d - 1] * be;
      c[0] *= al;
    }
    for (std::size_t d = 0; d < 4; ++d) {
      fp.we[m] += h * c[d] * mom.mu[d];
      fp.wf[m] += h * c[d] * mom.nu[d];
    }
  }
  return fp;
}

}  // namespace detail

/// Ratio tables q_n = w_n / w_0 in the exponential region with t-derivatives.
struct EpsilonSeries {
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> dq;
};

/// q_n(t) = 1/2 ∫_0^t p(t') (1 - e^{-2ω(t',t)}) q_{n-1}(t') dt'.
/// Split as J = A - I with I(t) = ∫ p q e^{-2ω(t',t)}, which is carried panel to
/// panel with the factor e^{-2Δω} <= 1, so nothing can overflow. Then
/// q_n = J/2 and q_n' = RK I exactly.
inline EpsilonSeries iterate_epsilon(const ReferenceBasis& b, int N) {
  if (b.region != Region::Epsilon) throw Error(ErrorCode::InvalidConfig, "iterate_epsilon needs an exponential-region basis");
  if (N < 0) throw Error(ErrorCode::InvalidConfig, "N must be nonnegative");
  const std::size_t n = b.size();
  const std::vector<double> t = b.nodes();
  std::vector<detail::FittedPanel> panels(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j)
    panels[j] = detail::fitted_panel(t, quad::CumulativeRule::stencil_start(j, n), t[j], t[j + 1], 2.0 * b.d_omega[j]);

  EpsilonSeries s;
  s.q.assign(1, std::vector<double>(n, 1.0));
  s.dq.assign(1, std::vector<double>(n, 0.0));
  std::vector<double> g(n);
  for (int order = 1; order <= N; ++order) {
    const auto& prev = s.q.back();
    for (std::size_t i = 0; i < n; ++i) g[i] = b.q[i].p * prev[i];
    std::vector<double> q(n, 0.0), dq(n, 0.0);
    double I = 0.0, J = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const auto& fp = panels[j];
      double e_int = 0.0, f_int = 0.0;
      for (std::size_t m = 0; m < 4; ++m) {
        e_int += fp.we[m] * g[fp.first + m];
        f_int += fp.wf[m] * g[fp.first + m];
      }
      J += fp.one_minus * I + f_int;
      I = fp.decay * I + e_int;
      q[j + 1] = 0.5 * J;
      dq[j + 1] = std::isfinite(b.q[j + 1].rk) ? b.q[j + 1].rk * I : 0.0;
    }
    s.q.push_back(std::move(q));
    s.dq.push_back(std::move(dq));
  }
  return s;
}

struct TauSeries {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<double>> dw;
};

/// w_m(t) = ∫_1^t p(t') sin ω(t',t) (K(t')/K(t))^{1/2} w_{m-1}(t') dt', evaluated
/// through the separable cos/sin cumulative sums.
inline TauSeries iterate_tau(const ReferenceBasis& b, double C, double S, int M) {
  if (b.region != Region::Tau) throw Error(ErrorCode::InvalidConfig, "iterate_tau needs a trigonometric-region basis");
  if (M < 0) throw Error(ErrorCode::InvalidConfig, "M must be nonnegative");
  const std::size_t n = b.size();
  const std::vector<double> t = b.nodes();
  const quad::CumulativeRule rule(t);
  std::vector<double> cs(n), sn(n), sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    cs[i] = std::cos(b.omega[i]);
    sn[i] = std::sin(b.omega[i]);
    sq[i] = std::sqrt(b.q[i].rk);
  }
  TauSeries s;
  s.w.emplace_back(n);
  s.dw.emplace_back(n);
  for (std::size_t i = 0; i < n; ++i) {
    const WaveValue v = reference_wave(b, i, WaveKind::Regular, {C, S, 0.0, 1.0});
    s.w[0][i] = v.value;
    s.dw[0][i] = v.derivative;
  }
  std::vector<double> fc(n), fs(n);
  for (int order = 1; order <= M; ++order) {
    const auto& prev = s.w.back();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = b.q[i].p * sq[i] * prev[i];
      fc[i] = g * cs[i];
      fs[i] = g * sn[i];
    }
    const auto A = rule.cumulative(fc);
    const auto B = rule.cumulative(fs);
    std::vector<double> w(n), dw(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = (sn[i] * A[i] - cs[i] * B[i]) / sq[i];
      dw[i] = b.q[i].rk * (cs[i] * A[i] + sn[i] * B[i]) / sq[i] - 0.25 * b.q[i].d1 * w[i];
    }
    s.w.push_back(std::move(w));
    s.dw.push_back(std::move(dw));
  }
  return s;
}

struct MatchResult {
  double C = 0.0;
  double S = 0.0;
  double S_printed = 0.0;  // closed-form alternative with the fixed 2^{-5/4}, 2^{-3/4} prefactors
  double v_eps = 0.0;
  double dv_eps = 0.0;
  double v_tau = 0.0;
  double dv_tau = 0.0;
  double continuity_residual = 0.0;
  double derivative_residual = 0.0;
};

/// Partial sums of the exponential-region series at t = 1.
inline std::pair<double, double> epsilon_edge_values(const ReferenceBasis& eps, const EpsilonSeries& s, int N) {
  const std::size_t i = eps.index_of_one();
  double sum = 0.0, dsum = 0.0;
  for (int n = 0; n <= N; ++n) {
    sum += s.q[n][i];
    dsum += s.dq[n][i];
  }
  const WaveValue w0 = reference_wave(eps, i, WaveKind::Regular);
  return {w0.value * sum, w0.derivative * sum + w0.value * dsum};
}

/// Continuity of value and slope at t = 1 fixes C and S from the exponential
/// side alone.
inline MatchResult match_at_one(const ReferenceBasis& eps, const EpsilonSeries& s, int N, const ReferenceBasis& tau) {
  MatchResult m;
  std::tie(m.v_eps, m.dv_eps) = epsilon_edge_values(eps, s, N);
  const LocalQuantities& q1 = tau.q[tau.index_of_one()];
  m.C = m.v_eps / q1.eta;
  m.S = (m.dv_eps + 0.25 * q1.d1 * q1.eta * m.C) / (q1.eta * q1.rk);
  const double kR = tau.k * tau.R;
  m.S_printed = std::pow(2.0, 0.75) * (m.dv_eps + std::pow(2.0, -1.25) * q1.d1 * std::sqrt(kR) * m.C);
  return m;
}

enum class Verdict { Converged, BoundNotEstablished };

constexpr std::string_view to_string(Verdict v) noexcept {
  return v == Verdict::Converged ? "converged" : "bound not established";
}

struct BoundReport {
  bool checked = false;
  bool eps_holds = true;
  bool tau_holds = true;
  double eps_worst_ratio = 0.0;        // max |q_n| / (P^n/n!)
  double tau_worst_ratio = 0.0;        // max |w_m| / envelope with the 2^{3/4} amplitude
  double tau_bare_worst_ratio = 0.0;  // same against the bare (kR)^{1/2} amplitude
  bool tau_bare_holds = true;
};

struct SolutionSample {
  double t;
  double u;
  double du;
  double log_derivative;
  Region region;
  double rk;
};

struct SeriesSolution {
  Channel channel;
  double R = 0.0;
  int N = 0;
  int M = 0;
  ReferenceBasis eps;
  ReferenceBasis tau;
  EpsilonSeries eps_terms;
  TauSeries tau_terms;
  std::vector<double> P_eps_cum;  // P_eps(0, t) at exponential nodes
  std::vector<double> P_tau_cum;  // P_tau(1, t) at trigonometric nodes
  double P_eps = 0.0;
  double P_tau = 0.0;
  MatchResult match;
  std::vector<double> eps_term_sup;
  std::vector<double> tau_term_sup;
  BoundReport bounds;
  Verdict verdict = Verdict::Converged;
  std::vector<SolutionSample> samples;  // exponential nodes, then trigonometric nodes (t = 1 appears in both)

  double t_max() const { return tau.q.back().t; }

  const SolutionSample* sample_at(double t, std::optional<Region> prefer = std::nullopt) const {
    const SolutionSample* best = nullptr;
    for (const auto& s : samples) {
      if (std::abs(s.t - t) > 1e-12 * std::max(1.0, t)) continue;
      if (!best || (prefer && s.region == *prefer)) best = &s;
    }
    return best;
  }
};

namespace detail {

inline std::vector<double> cumulative_abs(const ReferenceBasis& b) {
  std::vector<double> f(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) f[i] = std::abs(b.q[i].p);
  return quad::CumulativeRule(b.nodes()).cumulative(f);
}

inline double factorial(int n) { return std::tgamma(n + 1.0); }

}  // namespace detail

inline void check_factorial_bounds(SeriesSolution& s, int orders, double slack) {
  BoundReport& br = s.bounds;
  br.checked = true;
  for (int n = 1; n <= std::min(orders, s.N); ++n) {
    for (std::size_t i = 0; i < s.eps.size(); ++i) {
      const double env = std::pow(s.P_eps_cum[i], n) / detail::factorial(n);
      const double v = std::abs(s.eps_terms.q[n][i]);
      if (v > env * (1.0 + slack) + 1e-300) br.eps_holds = false;
      if (env > 0.0) br.eps_worst_ratio = std::max(br.eps_worst_ratio, v / env);
    }
  }
  const double kR = s.channel.k * s.R;
  const double amp = std::sqrt(kR) * (std::abs(s.match.C) + std::abs(s.match.S));
  const double amp34 = std::pow(2.0, 0.75) * amp;
  for (int m = 0; m <= std::min(orders, s.M); ++m) {
    for (std::size_t i = 0; i < s.tau.size(); ++i) {
      const double shape = std::pow(s.P_tau_cum[i], m) / detail::factorial(m);
      const double v = std::abs(s.tau_terms.w[m][i]);
      if (v > amp34 * shape * (1.0 + slack) + 1e-300) br.tau_holds = false;
      if (v > amp * shape * (1.0 + slack) + 1e-300) br.tau_bare_holds = false;
      if (shape > 0.0) {
        br.tau_worst_ratio = std::max(br.tau_worst_ratio, v / (amp34 * shape));
        br.tau_bare_worst_ratio = std::max(br.tau_bare_worst_ratio, v / (amp * shape));
      }
    }
  }
}

/// Full pipeline on a fixed matching radius.
inline SeriesSolution solve_series(const WkbContext& ctx, const SeriesConfig& cfg) {
  cfg.validate();
  const GridOptions go = cfg.grid_options();
  SeriesSolution s;
  s.channel = ctx.channel();
  s.R = ctx.R();
  s.N = cfg.N;
  s.M = cfg.M;
  s.eps = build_basis(ctx, Region::Epsilon, go);
  s.tau = build_basis(ctx, Region::Tau, go);
  s.eps_terms = iterate_epsilon(s.eps, cfg.N);
  s.match = match_at_one(s.eps, s.eps_terms, cfg.N, s.tau);
  s.tau_terms = iterate_tau(s.tau, s.match.C, s.match.S, cfg.M);

  s.P_eps_cum = detail::cumulative_abs(s.eps);
  for (double& v : s.P_eps_cum) v += s.eps.origin_tail;
  s.P_tau_cum = detail::cumulative_abs(s.tau);
  s.P_eps = s.P_eps_cum.back();
  s.P_tau = s.P_tau_cum.back();

  // Assemble u on both grids.
  for (std::size_t i = 0; i < s.eps.size(); ++i) {
    double sum = 0.0, dsum = 0.0;
    for (int n = 0; n <= cfg.N; ++n) {
      sum += s.eps_terms.q[n][i];
      dsum += s.eps_terms.dq[n][i];
    }
    const LocalQuantities& q = s.eps.q[i];
    const WaveValue w0 = reference_wave(s.eps, i, WaveKind::Regular);
    const double y0 = q.rk - 0.25 * q.d1;
    s.samples.push_back({q.t, w0.value * sum, w0.derivative * sum + w0.value * dsum, y0 + dsum / sum,
                         Region::Epsilon, q.rk});
  }
  for (std::size_t i = 0; i < s.tau.size(); ++i) {
    double v = 0.0, dv = 0.0;
    for (int m = 0; m <= cfg.M; ++m) {
      v += s.tau_terms.w[m][i];
      dv += s.tau_terms.dw[m][i];
    }
    s.samples.push_back({s.tau.q[i].t, v, dv, dv / v, Region::Tau, s.tau.q[i].rk});
  }
  s.match.v_tau = s.samples[s.eps.size()].u;
  s.match.dv_tau = s.samples[s.eps.size()].du;
  s.match.continuity_residual = std::abs(s.match.v_tau - s.match.v_eps) / std::abs(s.match.v_eps);
  s.match.derivative_residual =
      std::abs(s.match.dv_tau - s.match.dv_eps) / std::max(std::abs(s.match.dv_eps), 1e-300);

  s.eps_term_sup.assign(cfg.N + 1, 0.0);
  for (int n = 0; n <= cfg.N; ++n)
    for (std::size_t i = 0; i < s.eps.size(); ++i) {
      const double w0 = reference_wave(s.eps, i, WaveKind::Regular).value;
      s.eps_term_sup[n] = std::max(s.eps_term_sup[n], std::abs(s.eps_terms.q[n][i] * w0));
    }
  s.tau_term_sup.assign(cfg.M + 1, 0.0);
  for (int m = 0; m <= cfg.M; ++m)
    for (double v : s.tau_terms.w[m]) s.tau_term_sup[m] = std::max(s.tau_term_sup[m], std::abs(v));

  if (cfg.check_bounds) check_factorial_bounds(s, cfg.bound_orders, cfg.bound_slack);
  const bool finite = std::isfinite(s.P_eps) && std::isfinite(s.P_tau);
  const bool bounds_ok = !s.bounds.checked || (s.bounds.eps_holds && s.bounds.tau_holds);
  s.verdict = finite && bounds_ok && std::max(s.P_eps, s.P_tau) <= cfg.divergence_threshold
                  ? Verdict::Converged
                  : Verdict::BoundNotEstablished;
  return s;
}

inline SeriesSolution solve_series(const PotentialSpec& spec, const Channel& ch, const SeriesConfig& cfg) {
  const MatchingRoot root = solve_matching_radius({spec, ch.k, ch.lambda_sq});
  return solve_series(WkbContext(spec, ch, root.R), cfg);
}

/// Scattering phase from the assembled solution at the outer grid edge.
inline double phase_shift(const SeriesSolution& s, double free_tol = 1e-3) {
  const LocalQuantities& edge = s.tau.q.back();
  const double k = s.channel.k;
  if (!(std::abs(edge.k2 / (k * k) - 1.0) < free_tol))
    throw Error(ErrorCode::TailNotFree, "potential not negligible at t_max = " + std::to_string(edge.t));
  const SolutionSample& last = s.samples.back();
  return phase_from_log_derivative(s.channel.l, k, s.R * last.t, last.log_derivative / s.R);
}

inline nlohmann::json summary_json(const SeriesSolution& s, std::optional<double> delta_l) {
  nlohmann::json j;
  j["R"] = s.R;
  j["k"] = s.channel.k;
  j["l"] = s.channel.l;
  j["N"] = s.N;
  j["M"] = s.M;
  j["t_min"] = s.eps.q.front().t;
  j["t_max"] = s.t_max();
  j["P_eps"] = s.P_eps;
  j["P_tau"] = s.P_tau;
  j["C_plus"] = s.match.C;
  j["S_plus"] = s.match.S;
  j["S_plus_printed"] = s.match.S_printed;
  j["delta_l"] = delta_l ? nlohmann::json(*delta_l) : nlohmann::json(nullptr);
  j["verdict"] = std::string(to_string(s.verdict));
  j["matching_residuals"] = {{"continuity", s.match.continuity_residual},
                             {"derivative", s.match.derivative_residual}};
  j["term_sup_eps"] = s.eps_term_sup;
  j["term_sup_tau"] = s.tau_term_sup;
  if (s.bounds.checked)
    j["bounds"] = {{"eps_holds", s.bounds.eps_holds},
                   {"tau_holds", s.bounds.tau_holds},
                   {"tau_bare_amplitude_holds", s.bounds.tau_bare_holds},
                   {"eps_worst_ratio", s.bounds.eps_worst_ratio},
                   {"tau_worst_ratio", s.bounds.tau_worst_ratio}};
  j["grid"] = {{"eps_nodes", s.eps.size()}, {"tau_nodes", s.tau.size()}};
  return j;
}

inline void write_solution_csv(std::ostream& os, const SeriesSolution& s) {
  os << "t,u,u_prime,region\n";
  os.precision(17);
  for (const auto& p : s.samples) os << p.t << ',' << p.u << ',' << p.du << ',' << to_string(p.region) << '\n';
}

}  // namespace smoothwkb
