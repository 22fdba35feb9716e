#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "smoothwkb/volterra.hpp"
#include "support.hpp"

using namespace smoothwkb;
using testing_support::benchmark_context;

namespace {

// Constant wavenumber kappa, constant weight p, unit amplitude.
ReferenceBasis flat_basis(Region g, double lo, double hi, std::size_t n, double kappa, double p) {
  ReferenceBasis b;
  b.region = g;
  b.R = 1.0;
  b.k = kappa;
  for (std::size_t i = 0; i < n; ++i) {
    LocalQuantities q;
    q.t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    q.k2 = kappa * kappa;
    q.log_k2 = std::log(q.k2);
    q.rk = kappa;
    q.eta = 1.0;
    q.p = p;
    q.delta = p * kappa;
    b.q.push_back(q);
    b.omega.push_back(kappa * (q.t - 1.0));
  }
  for (std::size_t i = 0; i + 1 < n; ++i) b.d_omega.push_back(b.omega[i + 1] - b.omega[i]);
  return b;
}

double sup_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(Kernel, VanishesOnDiagonal) {
  const WkbContext ctx = benchmark_context();
  EXPECT_EQ(kernel(ctx, Region::Epsilon, 0.5, 0.5), 0.0);
  EXPECT_EQ(kernel(ctx, Region::Tau, 2.0, 2.0), 0.0);
  EXPECT_THROW(kernel(ctx, Region::Tau, 2.0, 2.5), Error);
}

TEST(Kernel, ClosedFormAndOddNumerator) {
  const WkbContext ctx = benchmark_context();
  const double t = 0.8, tp = 0.6;
  const double w = testing_support::simpson([&](double s) { return ctx.local(Region::Epsilon, s).rk; }, tp, t);
  const double scale = std::sqrt(ctx.local(Region::Epsilon, t).rk * ctx.local(Region::Epsilon, tp).rk);
  EXPECT_NEAR(kernel(ctx, Region::Epsilon, t, tp), std::sinh(w) / scale, 1e-8 * std::sinh(w) / scale);
  EXPECT_DOUBLE_EQ(std::sinh(-w), -std::sinh(w));
}

TEST(Kernel, FreeRegionSineZero) {
  const WkbContext ctx = benchmark_context();
  const double tp = 200.0, t = tp + std::numbers::pi / ctx.kR();
  EXPECT_LT(std::abs(kernel(ctx, Region::Tau, t, tp)) * ctx.kR(), 1e-4);
  const double t2 = tp + 0.5 * std::numbers::pi / ctx.kR();
  EXPECT_NEAR(kernel(ctx, Region::Tau, t2, tp) * ctx.kR(), 1.0, 1e-4);
}

TEST(FittedPanel, MomentBranchesAgreeWithQuadrature) {
  for (double theta : {0.0, 1e-6, 0.5, 1.99, 2.01, 7.0, 60.0}) {
    const auto m = detail::exp_moments(theta);
    for (int k = 0; k < 4; ++k) {
      const double ref = testing_support::simpson([&](double y) { return std::pow(y, k) * std::exp(-theta * y); }, 0.0, 1.0, 20000);
      EXPECT_NEAR(m.mu[k], ref, 1e-10) << "theta=" << theta << " k=" << k;
      EXPECT_NEAR(m.mu[k] + m.nu[k], 1.0 / (k + 1), 1e-14);
    }
  }
  const auto inf = detail::exp_moments(INFINITY);
  EXPECT_EQ(inf.mu[0], 0.0);
  EXPECT_EQ(inf.nu[2], 1.0 / 3.0);
}

TEST(EpsilonIteration, ZeroWeightGivesZeroCorrections) {
  const auto b = flat_basis(Region::Epsilon, 0.1, 1.0, 200, 3.0, 0.0);
  const auto s = iterate_epsilon(b, 3);
  for (double v : s.q[0]) EXPECT_EQ(v, 1.0);
  for (int n = 1; n <= 3; ++n) EXPECT_EQ(sup_abs(s.q[n]), 0.0);
}

TEST(EpsilonIteration, ConstantWeightClosedForm) {
  const double kappa = 4.0, c = 0.3, t0 = 0.1;
  const auto b = flat_basis(Region::Epsilon, t0, 1.0, 400, kappa, c);
  const auto s = iterate_epsilon(b, 1);
  for (std::size_t i = 0; i < b.size(); i += 37) {
    const double x = b.t(i) - t0;
    const double e = -std::expm1(-2 * kappa * x);
    EXPECT_NEAR(s.q[1][i], 0.5 * c * (x - e / (2 * kappa)), 1e-10);
    EXPECT_NEAR(s.dq[1][i], kappa * c * e / (2 * kappa), 1e-10);
  }
}

TEST(TauIteration, ConstantWeightClosedForm) {
  const double kappa = 9.0, c = -0.2;
  const auto b = flat_basis(Region::Tau, 1.0, 3.0, 2000, kappa, c);
  const auto s = iterate_tau(b, 1.0, 0.0, 1);
  for (std::size_t i = 0; i < b.size(); i += 111) {
    const double x = b.t(i) - 1.0;
    EXPECT_NEAR(s.w[0][i], std::cos(kappa * x), 1e-13);
    EXPECT_NEAR(s.w[1][i], 0.5 * c * x * std::sin(kappa * x), 1e-9);
    EXPECT_NEAR(s.dw[1][i], 0.5 * c * (std::sin(kappa * x) + kappa * x * std::cos(kappa * x)), 1e-8);
  }
}

// Direct evaluation of the kernel sums with the trapezoid rule at a few
// target nodes, straight from the tabulated weights and phases.
TEST(EpsilonIteration, AgreesWithDirectKernelSum) {
  const WkbContext ctx = benchmark_context();
  const auto b = build_basis(ctx, Region::Epsilon);
  const auto s = iterate_epsilon(b, 3);
  const std::size_t n = b.size();
  std::vector<double> prev(n, 1.0);
  for (int order = 1; order <= 3; ++order) {
    const double scale = sup_abs(s.q[order]);
    for (std::size_t i = n / 7; i < n; i += n / 7 + 1) {
      double acc = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        auto f = [&](std::size_t m) { return b.q[m].p * -std::expm1(-2.0 * (b.omega[i] - b.omega[m])) * s.q[order - 1][m]; };
        acc += 0.5 * (b.t(j + 1) - b.t(j)) * (f(j) + f(j + 1));
      }
      EXPECT_NEAR(s.q[order][i], 0.5 * acc, 1e-4 * scale) << "order " << order << " t=" << b.t(i);
    }
    (void)prev;
  }
}

TEST(TauIteration, AgreesWithDirectKernelSum) {
  const WkbContext ctx = benchmark_context(1);
  const auto b = build_basis(ctx, Region::Tau);
  const double C = 0.7, S = -1.3;
  const auto s = iterate_tau(b, C, S, 3);
  const std::size_t n = b.size();
  for (int order = 1; order <= 3; ++order) {
    const double scale = sup_abs(s.w[order]);
    for (std::size_t i = n / 9; i < n; i += n / 9 + 1) {
      double acc = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        auto f = [&](std::size_t m) {
          return b.q[m].p * std::sin(b.omega[i] - b.omega[m]) * std::sqrt(b.q[m].rk / b.q[i].rk) * s.w[order - 1][m];
        };
        acc += 0.5 * (b.t(j + 1) - b.t(j)) * (f(j) + f(j + 1));
      }
      EXPECT_NEAR(s.w[order][i], acc, 1e-4 * scale) << "order " << order << " t=" << b.t(i);
    }
  }
}

TEST(TauIteration, DerivativeMatchesFiniteDifference) {
  const WkbContext ctx = benchmark_context();
  const auto b = build_basis(ctx, Region::Tau);
  const auto s = iterate_tau(b, 0.5, 2.0, 2);
  for (std::size_t i = 50; i + 50 < b.size(); i += 97) {
    const double fd = (s.w[2][i + 1] - s.w[2][i - 1]) / (b.t(i + 1) - b.t(i - 1));
    EXPECT_NEAR(s.dw[2][i], fd, 2e-3 * sup_abs(s.dw[2])) << b.t(i);
  }
}

TEST(Matching, ZeroOrderConstants) {
  const WkbContext ctx = benchmark_context();
  SeriesConfig cfg;
  cfg.N = 0;
  cfg.M = 0;
  const auto s = solve_series(ctx, cfg);
  EXPECT_NEAR(s.match.C, 1.0, 1e-12);
  const auto qe = s.eps.q.back(), qt = s.tau.q.front();
  EXPECT_NEAR(s.match.S, 1.0 + (qt.d1 - qe.d1) / (4.0 * qt.rk), 1e-10 * std::abs(s.match.S));
  // M = 0 leaves the lone base term
  for (std::size_t i = 0; i < s.tau.size(); ++i) EXPECT_EQ(s.samples[s.eps.size() + i].u, s.tau_terms.w[0][i]);
}

TEST(Matching, ContinuityAtEveryOrder) {
  const WkbContext ctx = benchmark_context();
  for (int N = 0; N <= 5; ++N) {
    SeriesConfig cfg;
    cfg.N = N;
    cfg.M = 3;
    const auto s = solve_series(ctx, cfg);
    EXPECT_LT(s.match.continuity_residual, 1e-10) << N;
    EXPECT_LT(s.match.derivative_residual, 1e-10) << N;
  }
}

TEST(Matching, ConstantsIndependentOfM) {
  const WkbContext ctx = benchmark_context();
  SeriesConfig cfg;
  cfg.N = 4;
  cfg.M = 0;
  const auto a = solve_series(ctx, cfg);
  for (int M : {1, 4, 7}) {
    cfg.M = M;
    const auto b = solve_series(ctx, cfg);
    EXPECT_EQ(a.match.C, b.match.C);
    EXPECT_EQ(a.match.S, b.match.S);
  }
}

TEST(Bounds, FactorialEnvelopesOnBenchmark) {
  const WkbContext ctx = benchmark_context();
  SeriesConfig cfg;
  cfg.N = 5;
  cfg.M = 5;
  const auto s = solve_series(ctx, cfg);
  ASSERT_TRUE(s.bounds.checked);
  EXPECT_TRUE(s.bounds.eps_holds);
  EXPECT_TRUE(s.bounds.tau_holds);
  EXPECT_LE(s.bounds.eps_worst_ratio, 1.0 + 1e-6);
  EXPECT_LE(s.bounds.tau_worst_ratio, 1.0 + 1e-6);
}

TEST(Bounds, TermsShrinkPastTheConvergenceIntegral) {
  const WkbContext ctx = benchmark_context();
  SeriesConfig cfg;
  cfg.N = 48;
  cfg.M = 48;
  cfg.check_bounds = false;
  const auto s = solve_series(ctx, cfg);
  const int from = static_cast<int>(std::ceil(std::max(s.P_eps, s.P_tau)));
  ASSERT_LT(from, 47);
  for (int n = from + 1; n <= 48; ++n) {
    EXPECT_LT(s.eps_term_sup[n], s.eps_term_sup[n - 1]) << n;
    EXPECT_LT(s.tau_term_sup[n], s.tau_term_sup[n - 1]) << n;
  }
}

// Nonuniform three-point second difference of the assembled u against V u,
// relative to the local phase-space amplitude. At N=M=4 the benchmark series
// is still truncation-dominated (about 1e-2); by N=M=6 only the difference
// error is left.
double radial_residual(const WkbContext& ctx, int order, Region g) {
  SeriesConfig cfg;
  cfg.N = order;
  cfg.M = order;
  const auto s = solve_series(ctx, cfg);
  std::vector<SolutionSample> reg;
  for (const auto& x : s.samples)
    if (x.region == g) reg.push_back(x);
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < reg.size(); ++i) {
    const double t = reg[i].t;
    if (g == Region::Epsilon && (t < 0.15 || t > 0.95)) continue;
    if (g == Region::Tau && (t < 1.05 || t > 4.0)) continue;
    const double d2 = (reg[i + 1].du - reg[i - 1].du) / (reg[i + 1].t - reg[i - 1].t);
    const double V = testing_support::radial_potential(ctx.spec(), ctx.channel(), ctx.R(), t);
    const double amp = std::hypot(reg[i].u, reg[i].du / reg[i].rk);
    worst = std::max(worst, std::abs(d2 - V * reg[i].u) / (std::abs(V) * amp + 1e-300));
  }
  return worst;
}

TEST(Solution, SatisfiesRadialEquationInsideRegions) {
  const WkbContext ctx = benchmark_context();
  for (Region g : {Region::Epsilon, Region::Tau}) {
    const double r4 = radial_residual(ctx, 4, g), r6 = radial_residual(ctx, 6, g);
    EXPECT_LT(r6, 1e-3) << to_string(g);
    EXPECT_LT(r6, r4) << to_string(g);
  }
}

TEST(PhaseShift, SyntheticSWave) {
  const double k = 1.7, phi = 0.4, r = 12.3;
  const double gamma = k * std::cos(k * r + phi) / std::sin(k * r + phi);
  EXPECT_NEAR(phase_from_log_derivative(0, k, r, gamma), phi, 1e-12);
  const double gamma2 = k * std::cos(k * r - 1.2) / std::sin(k * r - 1.2);
  EXPECT_NEAR(phase_from_log_derivative(0, k, r, gamma2), -1.2, 1e-12);
}

TEST(PhaseShift, SyntheticHigherWaves) {
  const double k = 0.9, r = 7.5, d = -0.35;
  for (int l : {1, 2, 3}) {
    const auto rb = riccati_bessel(l, k * r);
    const double u = rb.j * std::cos(d) - rb.n * std::sin(d);
    const double du = k * (rb.dj * std::cos(d) - rb.dn * std::sin(d));
    EXPECT_NEAR(phase_from_log_derivative(l, k, r, du / u), d, 1e-12) << l;
  }
}

TEST(RiccatiBessel, WronskianAndDerivatives) {
  for (int l : {0, 1, 4}) {
    for (double x : {0.7, 3.0, 11.0}) {
      const auto rb = riccati_bessel(l, x);
      EXPECT_NEAR(rb.j * rb.dn - rb.n * rb.dj, 1.0, 1e-12);
      const double h = 1e-6;
      EXPECT_NEAR(rb.dj, (riccati_bessel(l, x + h).j - riccati_bessel(l, x - h).j) / (2 * h), 1e-7);
    }
  }
}

TEST(PhaseShift, RequiresFreeTail) {
  const WkbContext ctx = benchmark_context();
  SeriesConfig cfg;
  cfg.t_max = 1.5;
  const auto s = solve_series(ctx, cfg);
  try {
    phase_shift(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TailNotFree);
  }
}

TEST(SeriesConfig, Validation) {
  SeriesConfig c;
  c.N = -1;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.t_min = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.t_max = 0.9;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Summary, JsonRoundTripIsStable) {
  const WkbContext ctx = benchmark_context();
  const auto s = solve_series(ctx, SeriesConfig{});
  const auto j = summary_json(s, phase_shift(s));
  for (const char* key : {"R", "P_eps", "P_tau", "C_plus", "S_plus", "delta_l", "verdict", "matching_residuals"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["verdict"], "converged");
  const auto again = nlohmann::json::parse(j.dump());
  EXPECT_EQ(again, j);
  EXPECT_EQ(again.dump(), j.dump());
  EXPECT_EQ(again["C_plus"].get<double>(), s.match.C);
}

TEST(Summary, SolutionCsv) {
  const WkbContext ctx = benchmark_context();
  SeriesConfig cfg;
  cfg.N = 1;
  cfg.M = 1;
  const auto s = solve_series(ctx, cfg);
  std::ostringstream os;
  write_solution_csv(os, s);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "t,u,u_prime,region");
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), s.samples.size() + 1);
}
