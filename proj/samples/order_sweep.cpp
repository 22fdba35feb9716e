// Solves the reference channel at increasing series orders and prints the
// log-derivative distance to direct integration.

#include <cstdio>

#include "smoothwkb/oracle.hpp"

using namespace smoothwkb;

int main() {
  const PotentialSpec spec(Family::PowCorePowTail, 6.0, 4.0, 1.0, 1.0, 1.0);
  const Channel ch = Channel::make(1.0, 0);
  const MatchingRoot root = solve_matching_radius({spec, ch.k, ch.lambda_sq});
  const WkbContext ctx(spec, ch, root.R);
  std::printf("R = %.15g\n", root.R);
  std::printf("%4s %12s %12s %14s %14s\n", "N=M", "C+", "S+", "max dev", "delta_0");
  for (int order = 0; order <= 6; ++order) {
    SeriesConfig cfg;
    cfg.N = order;
    cfg.M = order;
    const OracleRun run = run_with_oracle(ctx, cfg);
    std::printf("%4d %12.6f %12.6f %14.3e %14.8f\n", order, run.solution.match.C, run.solution.match.S,
                run.report.max_deviation, phase_shift(run.solution));
  }
}
