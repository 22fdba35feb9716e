// smoothwkb command-line front end.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "smoothwkb/asymptotics.hpp"
#include "smoothwkb/checks.hpp"
#include "smoothwkb/matching_radius.hpp"
#include "smoothwkb/oracle.hpp"
#include "smoothwkb/potential.hpp"
#include "smoothwkb/volterra.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace smoothwkb;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

struct Options {
  std::string spec;
  double k = 1.0;
  int l = 0;
  std::string orders = "4,4";
  std::optional<double> tmin;
  std::optional<double> tmax;
  std::string a_grid;
  bool oracle = false;
  bool strict = false;
  std::string out;
  std::string format = "json";
  std::string filter;
};

json load_spec_json(const std::string& arg) {
  if (arg.empty()) throw Error(ErrorCode::InvalidConfig, "--spec is required");
  std::string text = arg;
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || arg[first] != '{') {
    std::ifstream in(arg);
    if (!in) throw Error(ErrorCode::InvalidSpec, "cannot read spec file '" + arg + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, std::string("spec is not valid JSON: ") + e.what());
  }
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, std::string("cannot parse ") + what + " entry '" + item + "'");
    }
  }
  return out;
}

SeriesConfig series_config(const Options& o) {
  SeriesConfig cfg;
  const auto orders = parse_list(o.orders, "--orders");
  if (orders.size() != 2 || orders[0] != std::floor(orders[0]) || orders[1] != std::floor(orders[1]))
    throw Error(ErrorCode::InvalidConfig, "--orders expects N,M");
  cfg.N = static_cast<int>(orders[0]);
  cfg.M = static_cast<int>(orders[1]);
  if (o.tmin) cfg.t_min = *o.tmin;
  cfg.t_max = o.tmax;
  cfg.validate();
  return cfg;
}

Channel channel(const Options& o) {
  if (o.l < 0) throw Error(ErrorCode::InvalidConfig, "l must be nonnegative");
  return Channel::make(o.k, o.l);
}

void write_file(const Options& o, const std::string& name, const std::string& content) {
  if (o.out.empty()) return;
  fs::create_directories(o.out);
  std::ofstream f(fs::path(o.out) / name);
  if (!f) throw Error(ErrorCode::InvalidConfig, "cannot write into '" + o.out + "'");
  f << content;
}

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

std::optional<double> try_phase(const SeriesSolution& s, json& j) {
  try {
    return phase_shift(s);
  } catch (const Error& e) {
    j["delta_l_error"] = e.what();
    return std::nullopt;
  }
}

int cmd_solve(const Options& o) {
  const PotentialSpec spec = spec_from_json(load_spec_json(o.spec));
  const Channel ch = channel(o);
  const SeriesConfig cfg = series_config(o);
  const MatchingRoot root = solve_matching_radius({spec, ch.k, ch.lambda_sq});
  const WkbContext ctx(spec, ch, root.R);

  std::optional<OracleRun> run;
  SeriesSolution local;
  if (o.oracle) run = run_with_oracle(ctx, cfg);
  else local = solve_series(ctx, cfg);
  const SeriesSolution& s = run ? run->solution : local;

  json extra;
  const auto delta = try_phase(s, extra);
  json j = summary_json(s, delta);
  j["spec"] = to_json(spec);
  if (extra.is_object()) j.update(extra);
  if (run) {
    j["oracle_logderiv_dev"] = run->report.max_deviation;
    j["oracle_checkpoints"] = run->report.points.size();
    j["oracle_skipped"] = run->report.skipped();
    j["oracle_t_start"] = run->oracle.t_start;
  }

  const std::string summary = j.dump(2) + "\n";
  const std::string solution = render([&](std::ostream& os) { write_solution_csv(os, s); });
  write_file(o, "summary.json", summary);
  write_file(o, "solution.csv", solution);
  write_file(o, "basis.csv", render([&](std::ostream& os) {
               write_basis_csv(os, s.eps);
               write_basis_csv(os, s.tau, false);
             }));
  if (run) write_file(o, "oracle.csv", render([&](std::ostream& os) { write_oracle_csv(os, run->oracle); }));
  std::cout << (o.format == "csv" ? solution : summary);
  return o.strict && s.verdict != Verdict::Converged ? kExitNotConverged : kExitOk;
}

json sweep_row(const PotentialSpec& base, const Channel& ch, const SeriesConfig& cfg, double A) {
  json row{{"A", A}, {"R", nullptr}, {"R_asym", nullptr}, {"P_eps", nullptr}, {"P_tau", nullptr},
           {"zero_order_dev", nullptr}, {"delta_l", nullptr}, {"verdict", nullptr}, {"error", ""}};
  std::vector<std::string> errors;
  try {
    const PotentialSpec spec = base.with_core_param(A);
    row["R_asym"] = asymptotic_radius(spec);
    const MatchingRoot root = solve_matching_radius({spec, ch.k, ch.lambda_sq});
    row["R"] = root.R;
    const SeriesSolution s = solve_series(WkbContext(spec, ch, root.R), cfg);
    row["P_eps"] = s.P_eps;
    row["P_tau"] = s.P_tau;
    row["verdict"] = std::string(to_string(s.verdict));
    json extra;
    if (const auto d = try_phase(s, extra)) row["delta_l"] = *d;
    else errors.push_back(extra["delta_l_error"].get<std::string>());
    try {
      row["zero_order_dev"] = zero_order_deviation(spec, ch, cfg).total();
    } catch (const Error& e) {
      errors.push_back(e.what());
    }
  } catch (const std::exception& e) {
    errors.push_back(e.what());
  }
  std::string joined;
  for (const auto& e : errors) joined += (joined.empty() ? "" : "; ") + e;
  row["error"] = joined;
  return row;
}

std::string csv_field(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return v.dump();
}

int cmd_sweep(const Options& o) {
  const PotentialSpec base = spec_from_json(load_spec_json(o.spec));
  const Channel ch = channel(o);
  const SeriesConfig cfg = series_config(o);
  const std::vector<double> grid = parse_list(o.a_grid, "--a-grid");
  if (grid.size() < 2) throw Error(ErrorCode::InvalidConfig, "--a-grid needs at least two values");
  for (double A : grid) base.with_core_param(A);  // reject inadmissible grid points up front

  std::vector<std::future<json>> jobs;
  for (double A : grid) jobs.push_back(std::async(std::launch::async, sweep_row, base, ch, cfg, A));
  json rows = json::array();
  for (auto& j : jobs) rows.push_back(j.get());

  const std::vector<std::string> cols{"A", "R", "R_asym", "P_eps", "P_tau", "zero_order_dev", "delta_l", "verdict", "error"};
  const std::string csv = render([&](std::ostream& os) {
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << csv_field(r[cols[c]]);
      os << '\n';
    }
  });
  json doc{{"spec", to_json(base)}, {"k", ch.k}, {"l", ch.l}, {"rows", rows}};
  const std::string js = doc.dump(2) + "\n";
  write_file(o, "sweep.csv", csv);
  write_file(o, "sweep.json", js);
  std::cout << (o.format == "csv" ? csv : js);
  bool all_ok = true;
  for (const auto& r : rows) all_ok = all_ok && r["error"].get<std::string>().empty();
  return all_ok ? kExitOk : kExitError;
}

int cmd_asym(const Options& o) {
  const PotentialSpec spec = spec_from_json(load_spec_json(o.spec));
  const Channel ch = channel(o);
  const AsymptoticProfile prof = AsymptoticProfile::make(spec, ch);
  json j;
  j["spec"] = to_json(spec);
  j["l"] = ch.l;
  j["k"] = ch.k;
  j["R_asym"] = prof.R_asym;
  j["R"] = solve_matching_radius({spec, ch.k, ch.lambda_sq}).R;
  j["regime"] = std::string(to_string(regime_verdict(spec.family(), ch.l)));
  j["core_equivalent"] = to_json(core_equivalent(spec));
  try {
    const AsymptoticSolution z = asym_zero_order(prof);
    j["P_eps_asym"] = z.P_eps_01;
    j["C0_plus"] = z.C0;
    j["S0_plus"] = z.S0;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnsupportedRegime) throw;
    j["P_eps_asym"] = nullptr;
    j["C0_plus"] = nullptr;
    j["S0_plus"] = nullptr;
    j["zero_order_note"] = e.what();
  }
  if (o.oracle) j["zero_order_dev"] = zero_order_deviation(spec, ch, series_config(o)).total();
  const std::string out = j.dump(2) + "\n";
  write_file(o, "asym.json", out);
  std::cout << out;
  return kExitOk;
}

int cmd_oracle(const Options& o) {
  const PotentialSpec spec = spec_from_json(load_spec_json(o.spec));
  const Channel ch = channel(o);
  const SeriesConfig cfg = series_config(o);
  const MatchingRoot root = solve_matching_radius({spec, ch.k, ch.lambda_sq});
  const WkbContext ctx(spec, ch, root.R);
  const double ts = o.tmin ? *o.tmin : default_oracle_start(ctx);
  const double te = o.tmax ? *o.tmax : build_basis(ctx, Region::Tau, cfg.grid_options()).q.back().t;
  std::vector<double> samples = default_checkpoints(ts, te);
  samples.push_back(1.0);
  const OracleSolution sol = integrate_radial(ctx, ts, te, samples);
  OracleOptions alt;
  alt.seed = SeedKind::PotentialOnly;
  const OracleSolution sol2 = integrate_radial(ctx, ts, te, {1.0}, alt);

  json j;
  j["spec"] = to_json(spec);
  j["R"] = root.R;
  j["t_start"] = sol.t_start;
  j["t_end"] = te;
  j["steps"] = sol.steps;
  j["rejected"] = sol.rejected;
  j["max_error_estimate"] = sol.max_error_estimate;
  j["seed_log_derivative"] = sol.seed_log_derivative;
  const auto i1 = *sol.find(1.0);
  j["log_derivative_at_1"] = sol.log_derivative(i1);
  j["seed_variant_difference_at_1"] = std::abs(sol.log_derivative(i1) - sol2.log_derivative(*sol2.find(1.0)));
  const LocalQuantities edge = ctx.local(Region::Tau, te);
  if (std::abs(edge.k2 / (ch.k * ch.k) - 1.0) < cfg.grid.free_tol)
    j["delta_l"] = phase_from_log_derivative(ch.l, ch.k, root.R * te, sol.log_derivative(sol.t.size() - 1) / root.R);
  else
    j["delta_l"] = nullptr;

  const std::string summary = j.dump(2) + "\n";
  const std::string csv = render([&](std::ostream& os) { write_oracle_csv(os, sol); });
  write_file(o, "oracle.json", summary);
  write_file(o, "oracle.csv", csv);
  std::cout << (o.format == "csv" ? csv : summary);
  return kExitOk;
}

int cmd_check(const Options& o) {
  CheckRequest req;
  req.spec = load_spec_json(o.spec);
  req.k = o.k;
  req.l = o.l;
  req.series = series_config(o);
  req.filter = o.filter;
  const auto results = run_checks(req);
  const std::string tap = render([&](std::ostream& os) { write_tap(os, results); });
  write_file(o, "checks.tap", tap);
  std::cout << tap;
  return all_passed(results) ? kExitOk : kExitError;
}

void report_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smooth WKB solver for singular-core radial scattering"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--spec", o.spec, "Potential spec: JSON file path or inline JSON")->required();
    sub->add_option("--k", o.k, "Wavenumber k");
    sub->add_option("--l", o.l, "Angular momentum l");
    sub->add_option("--orders", o.orders, "Series cut-offs N,M");
    sub->add_option("--tmin", o.tmin, "Inner grid edge (oracle: start point)");
    sub->add_option("--tmax", o.tmax, "Outer grid edge");
    sub->add_option("--out", o.out, "Directory for output files");
    sub->add_option("--format", o.format, "Stdout format")->check(CLI::IsMember({"json", "csv"}));
  };

  auto* solve = app.add_subcommand("solve", "Solve one channel");
  common(solve);
  solve->add_flag("--oracle", o.oracle, "Compare against direct integration");
  solve->add_flag("--strict", o.strict, "Exit 2 unless convergence is established");

  auto* sweep = app.add_subcommand("sweep", "Sweep the core parameter");
  common(sweep);
  sweep->add_option("--a-grid", o.a_grid, "Comma-separated core parameters")->required();

  auto* asym = app.add_subcommand("asym", "Supersingular-limit report");
  common(asym);
  asym->add_flag("--oracle", o.oracle, "Include the zero-order deviation from direct integration");

  auto* oracle = app.add_subcommand("oracle", "Direct integration only");
  common(oracle);

  auto* check = app.add_subcommand("check", "Run the invariant suite");
  common(check);
  check->add_option("--filter", o.filter, "Run only checks whose name contains this text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("InvalidConfig", e.what());
    return kExitError;
  }

  try {
    if (*solve) return cmd_solve(o);
    if (*sweep) return cmd_sweep(o);
    if (*asym) return cmd_asym(o);
    if (*oracle) return cmd_oracle(o);
    if (*check) return cmd_check(o);
  } catch (const Error& e) {
    report_error(std::string(to_string(e.code())), e.what());
    return kExitError;
  } catch (const std::exception& e) {
    report_error("Internal", e.what());
    return kExitError;
  }
  return kExitError;
}
