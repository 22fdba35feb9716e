#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "smoothwkb/errors.hpp"

namespace smoothwkb {

enum class Family { ExpCoreExpTail, PowCoreExpTail, ExpCorePowTail, PowCorePowTail };

constexpr std::string_view to_string(Family f) noexcept {
  switch (f) {
    case Family::ExpCoreExpTail: return "ExpCoreExpTail";
    case Family::PowCoreExpTail: return "PowCoreExpTail";
    case Family::ExpCorePowTail: return "ExpCorePowTail";
    case Family::PowCorePowTail: return "PowCorePowTail";
  }
  return "Unknown";
}

inline Family parse_family(std::string_view s) {
  for (Family f : {Family::ExpCoreExpTail, Family::PowCoreExpTail, Family::ExpCorePowTail, Family::PowCorePowTail})
    if (s == to_string(f)) return f;
  throw Error(ErrorCode::InvalidSpec, "unknown potential family '" + std::string(s) + "'");
}

constexpr bool has_exp_core(Family f) noexcept {
  return f == Family::ExpCoreExpTail || f == Family::ExpCorePowTail;
}
constexpr bool has_exp_tail(Family f) noexcept {
  return f == Family::ExpCoreExpTail || f == Family::PowCoreExpTail;
}

/// Log-form of the form factor: log U, L = U'/U and L' = dL/dr.
struct LogForm {
  double log_u;
  double l1;
  double l1_prime;
};

struct FormFactor {
  double u;
  double du;
  double d2u;
};

/// Singular core times decaying tail, scaled by the coupling G^2 (length^-2).
///   exponential core  exp(A rho1 / r)      power core  (1 + r1/r)^A
///   exponential tail  exp(-B r / rho2)     power tail  (1 + r/r2)^-B
class PotentialSpec {
 public:
  PotentialSpec(Family family, double core_param, double tail_param, double core_scale, double tail_scale,
                double coupling)
      : family_(family),
        core_param_(core_param),
        tail_param_(tail_param),
        core_scale_(core_scale),
        tail_scale_(tail_scale),
        coupling_(coupling) {
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(core_param) || !positive(tail_param))
      throw Error(ErrorCode::InvalidSpec, "core and tail parameters must be positive");
    if (!positive(core_scale) || !positive(tail_scale))
      throw Error(ErrorCode::InvalidSpec, "length scales must be positive");
    if (!positive(coupling)) throw Error(ErrorCode::InvalidSpec, "coupling must be positive");
    if (!has_exp_core(family) && !(core_param > 4.0))
      throw Error(ErrorCode::InvalidSpec, "power core requires a > 4");
    if (!has_exp_tail(family) && !(tail_param > 3.0))
      throw Error(ErrorCode::InvalidSpec, "power tail requires b > 3");
  }

  Family family() const noexcept { return family_; }
  double core_param() const noexcept { return core_param_; }
  double tail_param() const noexcept { return tail_param_; }
  double core_scale() const noexcept { return core_scale_; }
  double tail_scale() const noexcept { return tail_scale_; }
  double coupling() const noexcept { return coupling_; }

  PotentialSpec with_core_param(double a) const {
    return {family_, a, tail_param_, core_scale_, tail_scale_, coupling_};
  }

  LogForm log_form(double r) const {
    if (!(r > 0.0) || !std::isfinite(r)) throw Error(ErrorCode::DomainError, "form factor needs r > 0");
    LogForm out{};
    const double A = core_param_, c = core_scale_;
    if (has_exp_core(family_)) {
      out.log_u = A * c / r;
      out.l1 = -A * c / (r * r);
      out.l1_prime = 2.0 * A * c / (r * r * r);
    } else {
      const double rr = r * (r + c);
      out.log_u = A * std::log1p(c / r);
      out.l1 = -A * c / rr;
      out.l1_prime = A * c * (2.0 * r + c) / (rr * rr);
    }
    const double B = tail_param_, s = tail_scale_;
    if (has_exp_tail(family_)) {
      out.log_u -= B * r / s;
      out.l1 -= B / s;
    } else {
      out.log_u -= B * std::log1p(r / s);
      out.l1 -= B / (s + r);
      out.l1_prime += B / ((s + r) * (s + r));
    }
    return out;
  }

  /// U, U', U''. Overflows to infinity deep inside strong cores; use log_form there.
  FormFactor form_factor(double r) const {
    const LogForm lf = log_form(r);
    const double u = std::exp(lf.log_u);
    return {u, u * lf.l1, u * (lf.l1 * lf.l1 + lf.l1_prime)};
  }

  /// log(G^2 U(r)).
  double log_coupled(double r) const { return std::log(coupling_) + log_form(r).log_u; }

  friend bool operator==(const PotentialSpec&, const PotentialSpec&) = default;

 private:
  Family family_;
  double core_param_;
  double tail_param_;
  double core_scale_;
  double tail_scale_;
  double coupling_;
};

inline nlohmann::json to_json(const PotentialSpec& s) {
  return {{"family", std::string(to_string(s.family()))},
          {"core_param", s.core_param()},
          {"tail_param", s.tail_param()},
          {"core_scale", s.core_scale()},
          {"tail_scale", s.tail_scale()},
          {"coupling", s.coupling()}};
}

inline PotentialSpec spec_from_json(const nlohmann::json& j) {
  try {
    const auto num = [&](const char* key, double fallback) {
      if (!j.contains(key)) {
        if (std::isnan(fallback)) throw Error(ErrorCode::InvalidSpec, std::string("missing field '") + key + "'");
        return fallback;
      }
      return j.at(key).get<double>();
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return PotentialSpec(parse_family(j.at("family").get<std::string>()), num("core_param", nan),
                         num("tail_param", nan), num("core_scale", 1.0), num("tail_scale", 1.0),
                         num("coupling", 1.0));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
}

struct AdmissibilityCheck {
  std::string name;
  bool passed = false;
  double witness_r = 0.0;  // first offending sample, or the most extreme sample when passing
  double witness_value = 0.0;
};

struct AdmissibilityReport {
  std::vector<AdmissibilityCheck> checks;
  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

/// Trend checks of the admissibility postulates on a geometric grid from
/// 1e-6 core_scale to 1e6 tail_scale. Everything is compared in log space so
/// strong cores never overflow.
inline AdmissibilityReport validate_admissibility(const PotentialSpec& spec, int per_decade = 20) {
  std::vector<double> r;
  const double lo = 1e-6 * spec.core_scale(), hi = 1e6 * spec.tail_scale();
  const int n = static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade));
  for (int i = 0; i <= n; ++i) r.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / n));

  AdmissibilityReport rep;
  AdmissibilityCheck positive{"U > 0", true, r.front(), 0.0};
  AdmissibilityCheck decreasing{"U' < 0", true, r.front(), 0.0};
  for (double x : r) {
    const LogForm lf = spec.log_form(x);
    if (!(lf.log_u > -std::numeric_limits<double>::infinity())) {
      positive = {"U > 0", false, x, lf.log_u};
      break;
    }
  }
  for (double x : r) {
    const LogForm lf = spec.log_form(x);
    if (!(lf.l1 < 0.0)) {
      decreasing = {"U' < 0", false, x, lf.l1};
      break;
    }
  }
  rep.checks.push_back(positive);
  rep.checks.push_back(decreasing);

  // r^4 U must keep growing as r -> 0 over the innermost three decades.
  AdmissibilityCheck core{"r^4 U grows as r -> 0", true, r.front(), 4.0 * std::log(r.front()) + spec.log_form(r.front()).log_u};
  const double core_edge = 1e-3 * spec.core_scale();
  for (std::size_t i = 1; i < r.size() && r[i] <= core_edge; ++i) {
    const double inner = 4.0 * std::log(r[i - 1]) + spec.log_form(r[i - 1]).log_u;
    const double outer = 4.0 * std::log(r[i]) + spec.log_form(r[i]).log_u;
    if (!(inner > outer)) {
      core = {core.name, false, r[i], outer};
      break;
    }
  }
  rep.checks.push_back(core);

  // r^3 U must decrease toward 0 over the outermost three decades.
  AdmissibilityCheck tail{"r^3 U decays as r -> inf", true, r.back(), 3.0 * std::log(r.back()) + spec.log_form(r.back()).log_u};
  const double tail_edge = 1e3 * spec.tail_scale();
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (r[i - 1] < tail_edge) continue;
    const double before = 3.0 * std::log(r[i - 1]) + spec.log_form(r[i - 1]).log_u;
    const double after = 3.0 * std::log(r[i]) + spec.log_form(r[i]).log_u;
    if (!(after < before)) {
      tail = {tail.name, false, r[i], after};
      break;
    }
  }
  if (tail.passed && !(tail.witness_value < 0.0)) tail.passed = false;  // r^3 U < 1 at the far end
  rep.checks.push_back(tail);
  return rep;
}

}  // namespace smoothwkb
