// Acceptance gate: one PASS/FAIL line per criterion. argv[1] is the CLI.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "smoothwkb/asymptotics.hpp"
#include "smoothwkb/oracle.hpp"

using namespace smoothwkb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const PotentialSpec kBenchmark{Family::PowCorePowTail, 6.0, 4.0, 1.0, 1.0, 1.0};
const std::vector<double> kDecades{1e2, 1e3, 1e4};
constexpr Family kFamilies[] = {Family::ExpCoreExpTail, Family::PowCoreExpTail, Family::ExpCorePowTail,
                                Family::PowCorePowTail};

PotentialSpec family_spec(Family f, double A) { return {f, A, has_exp_tail(f) ? 1.0 : 4.0, 1.0, 1.0, 1.0}; }

WkbContext context(const PotentialSpec& s, const Channel& ch) {
  return {s, ch, solve_matching_radius({s, ch.k, ch.lambda_sq}).R};
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

std::string list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + "]";
}

Outcome matching_point_algebra() {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto in = [&](double a, double b) { return a + (b - a) * u01(rng); };
  double worst_jump = 0.0, worst_k2 = 0.0;
  int cases = 0;
  for (int i = 0; i < 5; ++i) {
    const Family f = kFamilies[static_cast<std::size_t>(u01(rng) * 4.0) % 4];
    const double core = has_exp_core(f) ? in(1.0, 30.0) : in(4.5, 12.0);
    const double tail = has_exp_tail(f) ? in(0.5, 3.0) : in(3.5, 8.0);
    const PotentialSpec s(f, core, tail, in(0.5, 2.0), in(0.5, 2.0), in(0.5, 2.0));
    const double k = in(0.5, 2.0);
    for (int l : {0, 1, 2}) {
      const WkbContext ctx = context(s, Channel::make(k, l));
      const double ke = ctx.local(Region::Epsilon, 1.0).k2, kt = ctx.local(Region::Tau, 1.0).k2;
      const double want = 1.0 / (8.0 * ctx.R() * ctx.R());
      worst_jump = std::max(worst_jump, std::abs(ke - kt) / (k * k));
      worst_k2 = std::max({worst_k2, std::abs(ke / want - 1.0), std::abs(kt / want - 1.0)});
      ++cases;
    }
  }
  return {worst_jump < 1e-10 && worst_k2 < 1e-10,
          std::to_string(cases) + " cases, max |jump|/k^2 " + fmt(worst_jump) + ", max rel K^2(1) error " + fmt(worst_k2)};
}

Outcome wronskian_constancy() {
  double worst = 0.0;
  for (int l : {0, 1}) {
    const WkbContext ctx = context(kBenchmark, Channel::make(1.0, l));
    for (double refine : {1.0, 0.5}) {
      SeriesConfig cfg;
      cfg.grid.h_log *= refine;
      cfg.grid.h_lin *= refine;
      cfg.grid.h_phase *= refine;
      cfg.grid.h_deriv *= refine;
      cfg.check_bounds = false;
      const SeriesSolution s = solve_series(ctx, cfg);
      const auto we = basis_wronskian(s.eps);
      const double want_e = -2.0 * ctx.kR();
      worst = std::max({worst, std::abs(we.mean / want_e - 1.0), we.relative_spread()});
      const WaveCoefficients c{s.match.C, s.match.S, 0.0, 1.0};
      const auto wt = basis_wronskian(s.tau, c);
      const double want_t = ctx.kR() * c.determinant();
      worst = std::max({worst, std::abs(wt.mean / want_t - 1.0), wt.relative_spread()});
    }
  }
  return {worst < 1e-6, "max relative error over l = 0,1 and two grids " + fmt(worst)};
}

Outcome factorial_bounds() {
  SeriesConfig cfg;
  cfg.N = cfg.M = 5;
  cfg.bound_orders = 5;
  cfg.bound_slack = 1e-6;
  const SeriesSolution s = solve_series(context(kBenchmark, Channel::make(1.0, 0)), cfg);
  const auto& b = s.bounds;
  return {b.checked && b.eps_holds && b.tau_holds,
          "worst ratio eps " + fmt(b.eps_worst_ratio) + ", tau " + fmt(b.tau_worst_ratio)};
}

Outcome oracle_equivalence() {
  const WkbContext ctx = context(kBenchmark, Channel::make(1.0, 0));
  const double ts = default_oracle_start(ctx);
  SeriesConfig cfg;
  const double t_hi = build_basis(ctx, Region::Tau, cfg.grid_options()).q.back().t;
  cfg.checkpoints = default_checkpoints(ts, t_hi);
  std::vector<double> dev;
  std::size_t skipped = 0;
  for (int n = 0; n <= 4; ++n) {
    cfg.N = cfg.M = n;
    const OracleRun run = run_with_oracle(ctx, cfg);
    dev.push_back(run.report.max_deviation);
    skipped = run.report.skipped();
  }
  const bool ok = dev.back() < 1e-4 && strictly_decreasing(dev);
  return {ok, std::to_string(cfg.checkpoints.size()) + " checkpoints (" + std::to_string(skipped) +
                  " near nodes), max |d log u| for N=M=0..4 " + list(dev)};
}

Outcome smooth_matching() {
  double worst = 0.0;
  bool identical = true;
  for (int l : {0, 1}) {
    const WkbContext ctx = context(kBenchmark, Channel::make(1.0, l));
    SeriesConfig cfg;
    cfg.check_bounds = false;
    const SeriesSolution ref = solve_series(ctx, cfg);
    worst = std::max({worst, ref.match.continuity_residual, ref.match.derivative_residual});
    for (int M : {0, 1, 2, 6}) {
      cfg.M = M;
      const SeriesSolution alt = solve_series(ctx, cfg);
      identical = identical && alt.match.C == ref.match.C && alt.match.S == ref.match.S;
    }
  }
  return {worst < 1e-10 && identical,
          "max residual " + fmt(worst) + ", C and S bit-identical in M: " + (identical ? "yes" : "no")};
}

Outcome radius_laws() {
  const Channel ch = Channel::make(1.0, 0);
  bool ok = true;
  std::string d;
  for (Family f : {Family::PowCoreExpTail, Family::ExpCoreExpTail}) {
    for (auto [A, tol] : {std::pair{1e2, 0.10}, std::pair{1e4, 0.03}}) {
      const PotentialSpec s = family_spec(f, A);
      const double gap = std::abs(solve_matching_radius({s, ch.k, ch.lambda_sq}).R / asymptotic_radius(s) - 1.0);
      ok = ok && gap < tol;
      d += std::string(to_string(f)) + "@" + fmt(A) + " " + fmt(gap) + "; ";
    }
  }
  double worst_implicit = 0.0;
  for (Family f : {Family::PowCorePowTail, Family::ExpCorePowTail}) {
    for (double A : kDecades) {
      const PotentialSpec s = family_spec(f, A);
      const double R = asymptotic_radius(s);
      const double rhs = s.tail_scale() * std::exp(s.core_scale() * A / (s.tail_param() * R));
      worst_implicit = std::max(worst_implicit, std::abs(R / rhs - 1.0));
    }
    const auto trend = sublinearity_trend(family_spec(f, kDecades[0]), ch.k, ch.lambda_sq, kDecades);
    ok = ok && trend.decreasing.value_or(false);
    d += std::string(to_string(f)) + " R/A " + list(trend.ratio) + "; ";
  }
  ok = ok && worst_implicit < 1e-8;
  return {ok, d + "implicit residual " + fmt(worst_implicit)};
}

Outcome regime_trends() {
  bool ok = true;
  std::string d;
  for (Family f : kFamilies) {
    for (int l : {0, 1}) {
      std::vector<double> pe, pt;
      for (double A : kDecades) {
        const auto cp = convergence_profile(family_spec(f, A), Channel::make(1.0, l));
        pe.push_back(cp.P_eps);
        pt.push_back(cp.P_tau);
      }
      const bool tau_up = has_exp_tail(f) && l == 0;
      const bool this_ok = strictly_decreasing(pe) && (tau_up ? strictly_increasing(pt) : strictly_decreasing(pt));
      ok = ok && this_ok;
      d += std::string(to_string(f)) + " l=" + std::to_string(l) + " P_eps " + list(pe) + " P_tau " + list(pt) + "; ";
    }
  }
  return {ok, d};
}

Outcome zero_order_exactness() {
  bool ok = true;
  std::string d;
  for (int l : {0, 1}) {
    std::vector<double> dev;
    for (double A : kDecades) dev.push_back(zero_order_deviation(family_spec(Family::PowCorePowTail, A), Channel::make(1.0, l)).total());
    ok = ok && strictly_decreasing(dev);
    d += "l=" + std::to_string(l) + " " + list(dev) + "; ";
  }
  return {ok, d};
}

Outcome internal_consistency() {
  double cyc = 0.0;
  const std::vector<std::pair<std::function<double(double)>, double>> profiles{
      {[](double) { return 0.8; }, 0.8 * 1.5},
      {[](double x) { return 0.6 / (x * x * x * x); }, 0.2 * (1.0 - 1.0 / 15.625)}};
  for (const auto& [p, P] : profiles) {
    const auto rec = coefficient_recursion(1.2, -0.4, p, 2.5, 8);
    for (int m = 0; m <= 8; ++m) {
      const auto [c, s] = coefficient_cycle(1.2, -0.4, P, m);
      cyc = std::max({cyc, std::abs(rec[m].first - c), std::abs(rec[m].second - s)});
    }
  }
  double resum = 0.0;
  for (double P : {0.0, 0.5, 3.0, 12.0}) {
    const auto [a, b] = grouped_t_sums(P);
    resum = std::max({resum, std::abs(a - std::cos(0.5 * P)), std::abs(b - std::sin(0.5 * P))});
  }
  std::vector<double> P, gap;
  for (double A : {1e2, 1e3, 1e4, 1e5}) {
    const auto z = asym_zero_order(AsymptoticProfile::make(family_spec(Family::PowCorePowTail, A), Channel::make(1.0, 0)));
    P.push_back(z.P_eps_01);
    gap.push_back(std::abs(z.C0 - 1.0));
  }
  const bool c0 = strictly_decreasing(P) && strictly_decreasing(gap) && gap.back() < 1e-2;
  return {cyc < 1e-10 && resum < 1e-12 && c0,
          "cycle vs recursion " + fmt(cyc) + ", resummation " + fmt(resum) + ", |C0 - 1| " + list(gap)};
}

int run_cli(const std::string& cli, const std::string& args, std::string& out) {
  FILE* p = popen((cli + " " + args + " 2>&1").c_str(), "r");
  if (!p) return -1;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int st = pclose(p);
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli) {
  if (cli.empty()) return {false, "no CLI path given"};
  const fs::path dir = fs::temp_directory_path() / ("smoothwkb_accept_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string spec = "'" + to_json(kBenchmark).dump() + "'";
  const std::vector<std::string> commands{"solve --spec " + spec + " --oracle --out ",
                                          "sweep --spec " + spec + " --a-grid 10,100,1000 --out "};
  bool ok = true;
  std::size_t files = 0;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::string out[2];
    int code[2];
    for (int r = 0; r < 2; ++r)
      code[r] = run_cli(cli, commands[c] + (dir / (std::to_string(c) + "_" + std::to_string(r))).string(), out[r]);
    ok = ok && code[0] == 0 && code[0] == code[1] && out[0] == out[1];
    const fs::path a = dir / (std::to_string(c) + "_0"), b = dir / (std::to_string(c) + "_1");
    if (!fs::exists(a)) { ok = false; continue; }
    for (const auto& e : fs::directory_iterator(a)) {
      ok = ok && slurp(e.path()) == slurp(b / e.path().filename());
      ++files;
    }
  }
  fs::remove_all(dir);
  return {ok && files > 0, std::to_string(files) + " output files and stdout compared over two runs each"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"matching-point algebra", matching_point_algebra},
      {"wronskian constancy", wronskian_constancy},
      {"factorial bounds", factorial_bounds},
      {"oracle equivalence", oracle_equivalence},
      {"smooth matching", smooth_matching},
      {"supersingular radius laws", radius_laws},
      {"convergence-regime trends", regime_trends},
      {"zero-order exactness", zero_order_exactness},
      {"asymptotic internal consistency", internal_consistency},
      {"determinism", [&] { return determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
