#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothwkb/matching_radius.hpp"
#include "smoothwkb/oracle.hpp"
#include "smoothwkb/potential.hpp"
#include "smoothwkb/volterra.hpp"
#include "smoothwkb/wkb_reference.hpp"

namespace smoothwkb {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckRequest {
  nlohmann::json spec;
  double k = 1.0;
  int l = 0;
  SeriesConfig series;
  std::string filter;  // case-insensitive substring of the check name; empty runs everything
};

namespace detail {

inline bool name_matches(std::string_view name, std::string_view filter) {
  if (filter.empty()) return true;
  auto lower = [](std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
  };
  return lower(name).find(lower(filter)) != std::string::npos;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Shared state, computed on first use.
struct CheckState {
  const CheckRequest& req;
  PotentialSpec spec;
  Channel channel;
  std::optional<MatchingRoot> root;
  std::optional<SeriesSolution> solution;

  const MatchingRoot& matching() {
    if (!root) root = solve_matching_radius({spec, channel.k, channel.lambda_sq});
    return *root;
  }
  WkbContext context() { return WkbContext(spec, channel, matching().R); }
  const SeriesSolution& series() {
    if (!solution) solution = solve_series(context(), req.series);
    return *solution;
  }
};

struct NamedCheck {
  std::string name;
  std::function<CheckResult(CheckState&)> run;
};

inline CheckResult verdict(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok, std::move(detail)};
}

inline std::vector<NamedCheck> check_catalog(const PotentialSpec& spec) {
  std::vector<NamedCheck> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string name = "admissibility: " + validate_admissibility(spec).checks[i].name;
    out.push_back({name, [i, name](CheckState& s) {
                     const auto rep = validate_admissibility(s.spec).checks[i];
                     return verdict(name, rep.passed, "witness r = " + fmt(rep.witness_r));
                   }});
  }
  out.push_back({"matching: root residual", [](CheckState& s) {
                   const auto& r = s.matching();
                   return verdict("matching: root residual", std::abs(r.relative_residual) < 1e-10,
                                  "R = " + fmt(r.R) + ", relative residual " + fmt(r.relative_residual));
                 }});
  out.push_back({"matching: K^2 continuous at t = 1", [](CheckState& s) {
                   const WkbContext ctx = s.context();
                   const double k2 = s.channel.k * s.channel.k;
                   const double d = std::abs(ctx.local(Region::Epsilon, 1.0).k2 - ctx.local(Region::Tau, 1.0).k2);
                   return verdict("matching: K^2 continuous at t = 1", d < 1e-10 * k2, "|jump| = " + fmt(d));
                 }});
  out.push_back({"matching: K^2(1) = 1/(8R^2)", [](CheckState& s) {
                   const WkbContext ctx = s.context();
                   const double R = ctx.R();
                   const double want = 1.0 / (8.0 * R * R);
                   double worst = 0.0;
                   for (Region g : {Region::Epsilon, Region::Tau})
                     worst = std::max(worst, std::abs(ctx.local(g, 1.0).k2 / want - 1.0));
                   return verdict("matching: K^2(1) = 1/(8R^2)", worst < 1e-10, "relative error " + fmt(worst));
                 }});
  out.push_back({"grid: amplitude positive", [](CheckState& s) {
                   const auto& sol = s.series();
                   bool ok = true;
                   for (const auto* b : {&sol.eps, &sol.tau})
                     for (const auto& q : b->q) ok = ok && q.eta > 0.0;
                   return verdict("grid: amplitude positive", ok, "");
                 }});
  out.push_back({"grid: free far field", [](CheckState& s) {
                   const auto& sol = s.series();
                   const double k2 = s.channel.k * s.channel.k;
                   const double dev = std::abs(sol.tau.q.back().k2 / k2 - 1.0);
                   return verdict("grid: free far field", dev < s.req.series.grid.free_tol,
                                  "t_max = " + fmt(sol.t_max()) + ", |K^2/k^2 - 1| = " + fmt(dev));
                 }});
  out.push_back({"wronskian: exponential region", [](CheckState& s) {
                   const auto& sol = s.series();
                   const auto w = basis_wronskian(sol.eps);
                   const double want = -2.0 * sol.channel.k * sol.R;
                   const double err = std::max(std::abs(w.mean / want - 1.0), w.relative_spread());
                   return verdict("wronskian: exponential region", err < 1e-6,
                                  "mean " + fmt(w.mean) + ", expected " + fmt(want) + ", spread " + fmt(w.relative_spread()));
                 }});
  out.push_back({"wronskian: trigonometric region", [](CheckState& s) {
                   const auto& sol = s.series();
                   const WaveCoefficients c{sol.match.C, sol.match.S, 0.0, 1.0};
                   const auto w = basis_wronskian(sol.tau, c);
                   const double want = sol.channel.k * sol.R * c.determinant();
                   const double err = std::max(std::abs(w.mean / want - 1.0), w.relative_spread());
                   return verdict("wronskian: trigonometric region", err < 1e-6,
                                  "mean " + fmt(w.mean) + ", expected " + fmt(want) + ", spread " + fmt(w.relative_spread()));
                 }});
  out.push_back({"bounds: exponential factorial envelope", [](CheckState& s) {
                   const auto& b = s.series().bounds;
                   return verdict("bounds: exponential factorial envelope", b.checked && b.eps_holds,
                                  "worst ratio " + fmt(b.eps_worst_ratio));
                 }});
  out.push_back({"bounds: trigonometric factorial envelope", [](CheckState& s) {
                   const auto& b = s.series().bounds;
                   return verdict("bounds: trigonometric factorial envelope", b.checked && b.tau_holds,
                                  "worst ratio " + fmt(b.tau_worst_ratio));
                 }});
  out.push_back({"matching: value continuity", [](CheckState& s) {
                   const double r = s.series().match.continuity_residual;
                   return verdict("matching: value continuity", r < 1e-10, "relative residual " + fmt(r));
                 }});
  out.push_back({"matching: derivative continuity", [](CheckState& s) {
                   const double r = s.series().match.derivative_residual;
                   return verdict("matching: derivative continuity", r < 1e-10, "relative residual " + fmt(r));
                 }});
  out.push_back({"matching: constants independent of M", [](CheckState& s) {
                   const auto& sol = s.series();
                   SeriesConfig other = s.req.series;
                   other.M = other.M == 0 ? 2 : 0;
                   other.check_bounds = false;
                   const auto alt = solve_series(s.context(), other);
                   const bool same = alt.match.C == sol.match.C && alt.match.S == sol.match.S;
                   return verdict("matching: constants independent of M", same,
                                  "C = " + fmt(sol.match.C) + ", S = " + fmt(sol.match.S));
                 }});
  out.push_back({"series: convergence verdict", [](CheckState& s) {
                   const auto& sol = s.series();
                   return verdict("series: convergence verdict", sol.verdict == Verdict::Converged,
                                  "P_eps = " + fmt(sol.P_eps) + ", P_tau = " + fmt(sol.P_tau));
                 }});
  out.push_back({"oracle: seed invariance", [](CheckState& s) {
                   const WkbContext ctx = s.context();
                   const double t0 = default_oracle_start(ctx);
                   const auto a = integrate_radial(ctx, t0, 1.5, {1.0});
                   const auto b = integrate_radial(ctx, 0.5 * t0, 1.5, {1.0});
                   const double d = std::abs(a.log_derivative(*a.find(1.0)) - b.log_derivative(*b.find(1.0)));
                   return verdict("oracle: seed invariance", d < 1e-6, "|change| at t = 1: " + fmt(d));
                 }});
  out.push_back({"oracle: seed variants agree", [](CheckState& s) {
                   const WkbContext ctx = s.context();
                   const double t0 = default_oracle_start(ctx);
                   OracleOptions alt;
                   alt.seed = SeedKind::PotentialOnly;
                   const auto a = integrate_radial(ctx, t0, 1.5, {1.0});
                   const auto b = integrate_radial(ctx, t0, 1.5, {1.0}, alt);
                   const double d = std::abs(a.log_derivative(*a.find(1.0)) - b.log_derivative(*b.find(1.0)));
                   return verdict("oracle: seed variants agree", d < 1e-6, "|difference| at t = 1: " + fmt(d));
                 }});
  return out;
}

}  // namespace detail

/// Runs the invariant suite. A spec the constructor rejects shows up as the
/// failed check "spec: construct"; so does any check that throws.
inline std::vector<CheckResult> run_checks(const CheckRequest& req) {
  std::vector<CheckResult> out;
  std::optional<PotentialSpec> spec;
  const char* construct = "spec: construct";
  try {
    spec = spec_from_json(req.spec);
  } catch (const Error& e) {
    if (detail::name_matches(construct, req.filter)) out.push_back({construct, false, e.what()});
    return out;
  }
  if (detail::name_matches(construct, req.filter)) out.push_back({construct, true, ""});

  std::optional<detail::CheckState> state;
  try {
    state.emplace(detail::CheckState{req, *spec, Channel::make(req.k, req.l), {}, {}});
  } catch (const Error& e) {
    out.push_back({"channel: construct", false, e.what()});
    return out;
  }
  for (auto& c : detail::check_catalog(*spec)) {
    if (!detail::name_matches(c.name, req.filter)) continue;
    try {
      out.push_back(c.run(*state));
    } catch (const std::exception& e) {
      out.push_back({c.name, false, e.what()});
    }
  }
  return out;
}

inline bool all_passed(const std::vector<CheckResult>& r) {
  return std::all_of(r.begin(), r.end(), [](const CheckResult& c) { return c.passed; });
}

inline void write_tap(std::ostream& os, const std::vector<CheckResult>& results) {
  os << "1.." << results.size() << '\n';
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    os << (r.passed ? "ok " : "not ok ") << i + 1 << " - " << r.name;
    if (!r.detail.empty()) os << " # " << r.detail;
    os << '\n';
  }
}

}  // namespace smoothwkb
