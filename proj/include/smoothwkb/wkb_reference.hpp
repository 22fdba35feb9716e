#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smoothwkb/errors.hpp"
#include "smoothwkb/potential.hpp"
#include "smoothwkb/quadrature.hpp"

namespace smoothwkb {

struct CentrifugalTriad {
  double eps;
  double tau;
  double avg;
};

inline CentrifugalTriad centrifugal_triad(int l) {
  if (l < 0) throw Error(ErrorCode::DomainError, "l must be nonnegative");
  const double eps = (l + 0.5) * (l + 0.5);
  const double tau = static_cast<double>(l) * (l + 1);
  return {eps, tau, 0.5 * (eps + tau)};
}

struct Channel {
  double k = 1.0;
  int l = 0;
  double lambda_eps_sq = 0.25;
  double lambda_tau_sq = 0.0;
  double lambda_sq = 0.125;

  static Channel make(double k, int l) {
    if (!(k > 0.0) || !std::isfinite(k)) throw Error(ErrorCode::DomainError, "k must be positive");
    const CentrifugalTriad c = centrifugal_triad(l);
    return {k, l, c.eps, c.tau, c.avg};
  }
};

enum class Region { Epsilon, Tau };

constexpr std::string_view to_string(Region r) noexcept { return r == Region::Epsilon ? "eps" : "tau"; }

/// Everything the reference system needs at one point t = r/R. Derivatives
/// are with respect to t; rk = R K is the phase velocity dω/dt.
struct LocalQuantities {
  double t = 0.0;
  double log_k2 = 0.0;
  double k2 = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double rk = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  double p = 0.0;
};

class WkbContext {
 public:
  static constexpr double kRegionSlack = 1e-9;

  WkbContext(PotentialSpec spec, Channel channel, double R) : spec_(std::move(spec)), ch_(channel), R_(R) {
    if (!(R > 0.0) || !std::isfinite(R)) throw Error(ErrorCode::DomainError, "matching radius must be positive");
  }

  const PotentialSpec& spec() const noexcept { return spec_; }
  const Channel& channel() const noexcept { return ch_; }
  double R() const noexcept { return R_; }
  double kR() const noexcept { return ch_.k * R_; }

  double lambda_region_sq(Region g) const noexcept {
    return g == Region::Epsilon ? ch_.lambda_eps_sq : ch_.lambda_tau_sq;
  }

  LocalQuantities local(Region g, double t) const {
    check_domain(g, t);
    const double R = R_, k2 = ch_.k * ch_.k;
    const double lam = lambda_region_sq(g);
    const LogForm lf = spec_.log_form(R * t);
    const double lu = std::log(spec_.coupling()) + lf.log_u;
    const double L = lf.l1 * R, Lp = lf.l1_prime * R * R;  // t-derivatives of log U
    const double cen = lam / (R * R * t * t);
    const double c0 = cen - k2;
    const double dc = -2.0 * cen / t;
    const double ddc = 6.0 * cen / (t * t);

    LocalQuantities q;
    q.t = t;
    if (g == Region::Epsilon && lu > 30.0) {
      // Potential dominates: factor it out so nothing overflows.
      const double e = std::exp(-lu);
      const double ratio = 1.0 + c0 * e;
      if (!(ratio > 0.0)) throw sign_violation(g, t);
      q.log_k2 = lu + std::log1p(c0 * e);
      q.d1 = (L + dc * e) / ratio;
      q.d2 = (L * L + Lp + ddc * e) / ratio;
    } else {
      const double u = std::exp(lu);
      const double s = g == Region::Epsilon ? 1.0 : -1.0;
      const double kk = s * (u + c0);
      if (!(kk > 0.0)) throw sign_violation(g, t);
      q.log_k2 = std::log(kk);
      q.d1 = s * (u * L + dc) / kk;
      q.d2 = s * (u * (L * L + Lp) + ddc) / kk;
    }
    q.k2 = std::exp(q.log_k2);
    q.rk = R * std::exp(0.5 * q.log_k2);
    q.eta = std::exp(0.25 * (std::log(k2) - q.log_k2));
    const double extra = (lam - ch_.lambda_tau_sq) / (t * t);
    q.delta = -5.0 / 16.0 * q.d1 * q.d1 + 0.25 * q.d2 - extra;
    q.p = std::isfinite(q.rk) ? q.delta / q.rk : 0.0;
    return q;
  }

  double wavenumber_sq(Region g, double t) const { return local(g, t).k2; }
  std::pair<double, double> log_derivatives(Region g, double t) const {
    const auto q = local(g, t);
    return {q.d1, q.d2};
  }
  double amplitude(Region g, double t) const { return local(g, t).eta; }
  double residual_potential(Region g, double t) const { return local(g, t).delta; }
  double p_weight(Region g, double t) const { return local(g, t).p; }

  /// ω(t1, t2) = R ∫ K over [t1, t2]; signed.
  double phase_integral(Region g, double t1, double t2, double rel_tol = 1e-10) const {
    if (t1 == t2) return 0.0;
    quad::Options opt;
    opt.rel_tol = rel_tol;
    opt.abs_tol = rel_tol * ch_.k * R_ * std::abs(t2 - t1);
    auto f = [&](double t) { return local(g, t).rk; };
    // K rises from its small matching-point value like a square root
    if (t1 == 1.0 || t2 == 1.0) return quad::integrate_graded(f, t1, t2, 1.0, opt);
    return quad::integrate(f, t1, t2, opt);
  }

  /// P(t1, t2) = ∫|p| over [t1, t2] ⊂ region. The integrand spikes at the
  /// matching point, so pieces touching t = 1 are graded toward it. In the
  /// exponential region a lower limit <= 0 extends toward the origin by panel
  /// halving until the last panel is negligible.
  double convergence_integral(Region g, double t1, double t2, double rel_tol = 1e-10) const {
    if (t1 == t2) return 0.0;
    if (t2 < t1) std::swap(t1, t2);
    quad::Options opt;
    opt.rel_tol = rel_tol;
    opt.abs_tol = 1e-300;
    auto f = [&](double t) { return std::abs(local(g, t).p); };
    double lo = t1;
    double total = 0.0;
    if (g == Region::Epsilon && t1 <= 0.0) lo = std::min(0.5 * t2, 1e-4);
    if (std::abs(t2 - 1.0) < 1e-12 || std::abs(lo - 1.0) < 1e-12) {
      const double focus = std::abs(t2 - 1.0) < 1e-12 ? t2 : lo;
      total = quad::integrate_graded(f, lo, t2, focus, opt);
    } else {
      total = quad::integrate(f, lo, t2, opt);
    }
    if (g == Region::Epsilon && t1 <= 0.0) total += origin_tail(lo, total, opt);
    return total;
  }

  /// ∫_0^t0 |p_eps| by halving panels toward the origin.
  double origin_tail(double t0, double running, const quad::Options& opt = {}) const {
    auto f = [&](double t) { return std::abs(local(Region::Epsilon, t).p); };
    double tail = 0.0, hi = t0;
    for (int i = 0; i < 400; ++i) {
      const double piece = quad::integrate(f, 0.5 * hi, hi, opt);
      tail += piece;
      if (piece <= 1e-10 * (running + tail) || piece == 0.0) return tail;
      hi *= 0.5;
      if (hi < 1e-300) break;
    }
    throw Error(ErrorCode::DivergentIntegral, "convergence integral does not settle toward the origin");
  }

 private:
  void check_domain(Region g, double t) const {
    if (!(t > 0.0) || !std::isfinite(t)) throw Error(ErrorCode::DomainError, "t must be positive");
    if (g == Region::Epsilon && t > 1.0 + kRegionSlack)
      throw Error(ErrorCode::DomainError, "exponential region requires t <= 1");
    if (g == Region::Tau && t < 1.0 - kRegionSlack)
      throw Error(ErrorCode::DomainError, "trigonometric region requires t >= 1");
  }

  static Error sign_violation(Region g, double t) {
    return Error(ErrorCode::SignViolation,
                 "K^2 <= 0 in region " + std::string(to_string(g)) + " at t = " + std::to_string(t));
  }

  PotentialSpec spec_;
  Channel ch_;
  double R_;
};

struct GridOptions {
  double h_log = 0.005;     // t-step relative to t (exponential region)
  double h_lin = 0.0125;    // maximal t-step (trigonometric region)
  double h_phase = 0.0125;  // maximal phase advance per panel
  double h_deriv = 0.005;   // maximal change of log K^2 per panel
  double phase_cap = 50.0;
  double t_min = 1e-4;
  std::optional<double> t_max;
  double free_tol = 1e-3;     // automatic t_max: |K^2/k^2 - 1| below this
  double tail_rel = 1e-14;    // exponential region stops once ∫_0^t |p| is this small
  double phase_rel_tol = 1e-12;
  std::vector<double> pins;   // t-values that must be grid nodes
  std::size_t max_nodes = 4'000'000;
};

/// Tabulated reference quantities on one region's grid. Phase ω is measured
/// from t = 1, panel increments are kept separately for the fitted weights.
struct ReferenceBasis {
  Region region = Region::Epsilon;
  double R = 0.0;
  double k = 0.0;
  std::vector<LocalQuantities> q;
  std::vector<double> omega;
  std::vector<double> d_omega;  // ω(t_j, t_{j+1}) > 0
  double origin_tail = 0.0;     // ∫_0^{t_0} |p|, exponential region only

  std::size_t size() const noexcept { return q.size(); }
  double t(std::size_t i) const { return q[i].t; }
  std::vector<double> nodes() const {
    std::vector<double> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = q[i].t;
    return out;
  }
  std::size_t index_of_one() const { return region == Region::Epsilon ? q.size() - 1 : 0; }
  std::optional<std::size_t> find_node(double t, double rel = 1e-12) const {
    auto it = std::lower_bound(q.begin(), q.end(), t, [](const LocalQuantities& a, double v) { return a.t < v; });
    for (auto cand : {it, it == q.begin() ? it : it - 1}) {
      if (cand != q.end() && std::abs(cand->t - t) <= rel * std::max(1.0, std::abs(t)))
        return static_cast<std::size_t>(cand - q.begin());
    }
    return std::nullopt;
  }
};

namespace detail {

inline double node_density(const GridOptions& o, Region g, const LocalQuantities& q) {
  const double deriv = (std::abs(q.d1) + std::sqrt(std::abs(q.d2))) / o.h_deriv;
  if (g == Region::Epsilon) return 1.0 / (o.h_log * q.t) + std::min(q.rk, o.phase_cap) / o.h_phase + deriv;
  return 1.0 / o.h_lin + q.rk / o.h_phase + deriv;
}

}  // namespace detail

inline ReferenceBasis build_basis(const WkbContext& ctx, Region g, const GridOptions& opt = {}) {
  if (!(opt.t_min > 0.0 && opt.t_min < 1.0)) throw Error(ErrorCode::InvalidConfig, "t_min must lie in (0, 1)");
  if (opt.t_max && !(*opt.t_max > 1.0)) throw Error(ErrorCode::InvalidConfig, "t_max must exceed 1");

  const double dir = g == Region::Epsilon ? -1.0 : 1.0;
  const double k2 = ctx.channel().k * ctx.channel().k;
  std::vector<double> ts{1.0};
  LocalQuantities cur = ctx.local(g, 1.0);
  double running_p = 0.0;
  std::vector<double> recent;  // |p| t over the last few nodes (exponential region stop test)

  while (true) {
    if (ts.size() > opt.max_nodes) throw Error(ErrorCode::InvalidConfig, "grid exceeds max_nodes");
    double h = 1.0 / detail::node_density(opt, g, cur);
    double t_new = 0.0;
    LocalQuantities next;
    bool last = false;
    for (int tries = 0;; ++tries) {
      t_new = cur.t + dir * h;
      if (g == Region::Epsilon && t_new <= opt.t_min * (1.0 + 1e-9)) {
        t_new = opt.t_min;
        last = true;
      }
      if (g == Region::Tau && opt.t_max && t_new >= *opt.t_max * (1.0 - 1e-12)) {
        t_new = *opt.t_max;
        last = true;
      }
      next = ctx.local(g, t_new);
      if (tries > 60 || detail::node_density(opt, g, next) * std::abs(t_new - cur.t) <= 1.5) break;
      h *= 0.5;
      last = false;
    }
    running_p += 0.5 * (std::abs(cur.p) + std::abs(next.p)) * std::abs(t_new - cur.t);
    ts.push_back(t_new);
    cur = next;
    if (last) break;
    if (g == Region::Epsilon) {
      recent.push_back(std::abs(cur.p) * cur.t);
      if (recent.size() > 20) recent.erase(recent.begin());
      const double env = *std::max_element(recent.begin(), recent.end());
      if (cur.log_k2 > 1400.0) break;
      if (recent.size() == 20 && cur.t < 0.5 && env < opt.tail_rel * std::max(running_p, 1e-300)) break;
    } else if (!opt.t_max && std::abs(cur.k2 / k2 - 1.0) < opt.free_tol) {
      break;
    }
  }
  if (g == Region::Epsilon) std::reverse(ts.begin(), ts.end());
  if (ts.size() < 4) throw Error(ErrorCode::InvalidConfig, "region grid too small");

  // Snap the closest interior node onto each pinned value.
  for (double pin : opt.pins) {
    if (!(pin > ts.front() && pin < ts.back())) continue;
    auto it = std::lower_bound(ts.begin(), ts.end(), pin);
    std::size_t i = static_cast<std::size_t>(it - ts.begin());
    if (i > 0 && pin - ts[i - 1] < ts[i] - pin) --i;
    if (ts[i] == pin) continue;
    if (i == 0 || i + 1 == ts.size()) continue;  // ends stay fixed
    if (pin <= ts[i - 1] || pin >= ts[i + 1]) continue;
    ts[i] = pin;
  }

  ReferenceBasis b;
  b.region = g;
  b.R = ctx.R();
  b.k = ctx.channel().k;
  b.q.reserve(ts.size());
  for (double t : ts) b.q.push_back(ctx.local(g, t));

  quad::Options qo;
  qo.rel_tol = opt.phase_rel_tol;
  b.d_omega.resize(ts.size() - 1);
  for (std::size_t j = 0; j + 1 < ts.size(); ++j) {
    if (!std::isfinite(b.q[j].rk) || !std::isfinite(b.q[j + 1].rk)) {
      b.d_omega[j] = std::numeric_limits<double>::infinity();
      continue;
    }
    // K^2 near a turning point is a difference of large numbers; measure the
    // error against the free phase kR h instead of the (tiny) local value.
    qo.abs_tol = opt.phase_rel_tol * ctx.channel().k * ctx.R() * std::abs(ts[j + 1] - ts[j]);
    b.d_omega[j] = quad::integrate([&](double t) { return ctx.local(g, t).rk; }, ts[j], ts[j + 1], qo);
  }
  b.omega.assign(ts.size(), 0.0);
  if (g == Region::Epsilon) {
    for (std::size_t j = ts.size() - 1; j-- > 0;) b.omega[j] = b.omega[j + 1] - b.d_omega[j];
    b.origin_tail = ctx.origin_tail(ts.front(), running_p);
  } else {
    for (std::size_t j = 0; j + 1 < ts.size(); ++j) b.omega[j + 1] = b.omega[j] + b.d_omega[j];
  }
  return b;
}

enum class WaveKind { Regular, Irregular };

struct WaveCoefficients {
  double c_plus = 1.0;
  double s_plus = 0.0;
  double c_minus = 0.0;
  double s_minus = 1.0;
  double determinant() const { return c_plus * s_minus - c_minus * s_plus; }
};

struct WaveValue {
  double value;
  double derivative;
};

/// Reference waves from tabulated local data and the phase ω(1, t).
inline WaveValue reference_wave(Region g, const LocalQuantities& q, double omega, WaveKind kind,
                                const WaveCoefficients& c = {}) {
  if (g == Region::Epsilon) {
    const double sgn = kind == WaveKind::Regular ? 1.0 : -1.0;
    const double w = q.eta * std::exp(sgn * omega);
    return {w, w * (sgn * q.rk - 0.25 * q.d1)};
  }
  if (c.determinant() == 0.0) throw Error(ErrorCode::DegenerateBasis, "C+S- - C-S+ vanishes");
  const double C = kind == WaveKind::Regular ? c.c_plus : c.c_minus;
  const double S = kind == WaveKind::Regular ? c.s_plus : c.s_minus;
  const double cs = std::cos(omega), sn = std::sin(omega);
  const double w = q.eta * (C * cs + S * sn);
  return {w, -0.25 * q.d1 * w + q.eta * q.rk * (-C * sn + S * cs)};
}

inline WaveValue reference_wave(const ReferenceBasis& b, std::size_t i, WaveKind kind, const WaveCoefficients& c = {}) {
  return reference_wave(b.region, b.q[i], b.omega[i], kind, c);
}

struct WronskianStats {
  double mean = 0.0;
  double max_deviation = 0.0;
  double relative_spread() const { return mean == 0.0 ? std::numeric_limits<double>::infinity() : max_deviation / std::abs(mean); }
};

/// W = w+ (w-)' - w- (w+)' per sample.
inline WronskianStats wronskian(std::span<const WaveValue> plus, std::span<const WaveValue> minus) {
  if (plus.size() != minus.size() || plus.empty()) throw Error(ErrorCode::InvalidConfig, "wronskian needs paired samples");
  std::vector<double> w(plus.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < plus.size(); ++i) {
    w[i] = plus[i].value * minus[i].derivative - minus[i].value * plus[i].derivative;
    sum += w[i];
  }
  WronskianStats s;
  s.mean = sum / static_cast<double>(w.size());
  for (double x : w) s.max_deviation = std::max(s.max_deviation, std::abs(x - s.mean));
  return s;
}

/// Wronskian of the regular/irregular pair across a whole basis, skipping
/// nodes where the exponential pair under- or overflows.
inline WronskianStats basis_wronskian(const ReferenceBasis& b, const WaveCoefficients& c = {}) {
  std::vector<WaveValue> plus, minus;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!std::isfinite(b.q[i].rk)) continue;
    if (b.region == Region::Epsilon && std::abs(b.omega[i]) > 300.0) continue;
    plus.push_back(reference_wave(b, i, WaveKind::Regular, c));
    minus.push_back(reference_wave(b, i, WaveKind::Irregular, c));
  }
  return wronskian(plus, minus);
}

inline void write_basis_csv(std::ostream& os, const ReferenceBasis& b, bool header = true) {
  if (header) os << "region,t,K2,D1,D2,eta,omega,Delta\n";
  os.precision(17);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& q = b.q[i];
    os << to_string(b.region) << ',' << q.t << ',' << q.k2 << ',' << q.d1 << ',' << q.d2 << ',' << q.eta << ','
       << b.omega[i] << ',' << q.delta << '\n';
  }
}

}  // namespace smoothwkb
