#pragma once

// Closed-form bounds and target quantities for the two-thinning process.
// All logarithms are natural.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>

#include "thinlab/error.hpp"

namespace thinlab {

namespace detail {
inline double ratio_log_loglog(std::uint64_t n) {
  const double ln = std::log(static_cast<double>(n));
  return ln / std::log(ln);
}

inline void require_n3(std::uint64_t n, const char* who) {
  if (n < 3) throw domain_error(std::string(who) + " needs n >= 3, got " + std::to_string(n));
}

inline void require_unit(double theta) {
  if (!(theta >= 0.0 && theta <= 1.0))
    throw domain_error("theta must lie in [0, 1], got " + std::to_string(theta));
}
}  // namespace detail

/// a! as a double; exact for a <= 20, log-gamma beyond.
inline double factorial(unsigned a) {
  if (a <= 20) {
    std::uint64_t f = 1;
    for (unsigned i = 2; i <= a; ++i) f *= i;
    return static_cast<double>(f);
  }
  return std::exp(std::lgamma(static_cast<double>(a) + 1.0));
}

/// ln(a!); exact-integer route for a <= 20.
inline double log_factorial(unsigned a) {
  return a <= 20 ? std::log(factorial(a)) : std::lgamma(static_cast<double>(a) + 1.0);
}

/// ⌈√(2 ln n / ln ln n)⌉.
inline unsigned threshold_L(std::uint64_t n) {
  detail::require_n3(n, "threshold_L");
  return static_cast<unsigned>(std::ceil(std::sqrt(2.0 * detail::ratio_log_loglog(n))));
}

/// ⌊√(2 ln n / ln ln n)⌋, the level used by the lower-bound argument.
inline unsigned lower_ell(std::uint64_t n) {
  detail::require_n3(n, "lower_ell");
  return static_cast<unsigned>(std::floor(std::sqrt(2.0 * detail::ratio_log_loglog(n))));
}

/// √(8 ln n / ln ln n), the leading-order max load of the threshold strategy.
inline double target_maxload(std::uint64_t n) {
  detail::require_n3(n, "target_maxload");
  return std::sqrt(8.0 * detail::ratio_log_loglog(n));
}

/// Bound on P(max over S of X_m < a) when θn balls go uniformly into n bins:
/// 2·exp(−θ^a·|S| / (e·a!)). Raw value; may exceed 1.
inline double lemma22_bound(double theta, unsigned a, double s_size) {
  detail::require_unit(theta);
  if (a < 1) throw domain_error("lemma22 needs a >= 1");
  if (!(s_size >= 0.0)) throw domain_error("subset size must be non-negative");
  if (theta == 0.0 || s_size == 0.0) return 2.0;
  double rate = 0.0;
  if (a <= 20) {
    rate = std::pow(theta, static_cast<double>(a)) * s_size / (std::numbers::e * factorial(a));
  } else {
    rate = std::exp(a * std::log(theta) + std::log(s_size) - 1.0 - log_factorial(a));
  }
  return 2.0 * std::exp(-rate);
}

/// Bound on P(at most θ|S|/(2e) bins of S are occupied): 2·exp(−θ²|S|/(2e²)).
inline double lemma23_bound(double theta, double s_size) {
  detail::require_unit(theta);
  if (!(s_size >= 0.0)) throw domain_error("subset size must be non-negative");
  constexpr double two_e2 = 2.0 * std::numbers::e * std::numbers::e;
  return 2.0 * std::exp(-theta * theta * s_size / two_e2);
}

struct Prop41Value {
  double value;     ///< 2n^exponent + 2e^{−√n}
  double exponent;  ///< −η/4 + 2 lnlnln n / lnln n
};

/// Upper bound on P(max load > (2+η)L) under the L-threshold strategy.
inline Prop41Value prop41_bound(std::uint64_t n, double eta) {
  if (n < 16) throw domain_error("prop41 needs n >= 16 so that ln ln ln n > 0");
  if (!(eta > 0.0)) throw domain_error("prop41 needs eta > 0");
  const double ln = std::log(static_cast<double>(n));
  const double lnln = std::log(ln);
  const double exponent = -eta / 4.0 + 2.0 * std::log(lnln) / lnln;
  const double value = 2.0 * std::exp(exponent * ln) + 2.0 * std::exp(-std::sqrt(static_cast<double>(n)));
  return {value, exponent};
}

/// Bound exp(−n^{ε/5}) on P(max load < (2−ε)ℓ) for any strategy.
inline double prop51_bound(std::uint64_t n, double epsilon) {
  if (n < 1) throw domain_error("prop51 needs n >= 1");
  if (!(epsilon > 0.0)) throw domain_error("prop51 needs epsilon > 0");
  return std::exp(-std::pow(static_cast<double>(n), epsilon / 5.0));
}

/// Stage decomposition used by the lower-bound argument.
struct StageParams {
  unsigned ell = 0;       ///< lower_ell(n)
  unsigned s = 0;         ///< ⌈(2−ε)ℓ⌉ stages
  std::uint64_t w = 0;    ///< ⌈ρn/(2ℓ)⌉ balls per stage
  double zeta = 0.0;      ///< ρ/(8eℓ)

  friend bool operator==(const StageParams&, const StageParams&) = default;
};

inline StageParams stage_params(std::uint64_t n, double rho, double epsilon) {
  if (!(rho > 0.0)) throw domain_error("stage_params needs rho > 0");
  if (!(epsilon > 0.0 && epsilon < 2.0)) throw domain_error("stage_params needs 0 < epsilon < 2");
  StageParams p;
  p.ell = lower_ell(n);
  if (p.ell == 0) throw domain_error("lower_ell(n) is 0; stages undefined");
  p.s = static_cast<unsigned>(std::ceil((2.0 - epsilon) * p.ell));
  p.w = static_cast<std::uint64_t>(std::ceil(rho * static_cast<double>(n) / (2.0 * p.ell)));
  p.zeta = rho / (8.0 * std::numbers::e * p.ell);
  return p;
}

/// 2n / L!, the rejection count beyond which the upper-bound argument gives up.
inline double rejection_budget(std::uint64_t n) {
  return 2.0 * static_cast<double>(n) / factorial(threshold_L(n));
}

inline double clamp_probability(double raw) { return std::clamp(raw, 0.0, 1.0); }

/// One evaluated bound with its inputs.
struct BoundReport {
  std::string name;
  std::map<std::string, double> inputs;
  double value = 0.0;
  std::optional<double> clamped;                 ///< set for probability bounds
  std::map<std::string, double> extras;          ///< secondary outputs (exponent, s, w, ...)
};

/// Names accepted by evaluate_bound.
inline constexpr const char* kBoundNames[] = {"lemma22",     "lemma23",   "prop41",
                                              "prop51",      "target_load", "threshold_L",
                                              "lower_ell",   "stage_params", "rejection_budget"};

/// Parameters for evaluate_bound; unused fields are ignored.
struct BoundQuery {
  std::uint64_t n = 0;
  double rho = 1.0;
  double theta = 0.0;
  unsigned a = 1;
  double set_size = 0.0;
  double eta = 0.0;
  double epsilon = 0.0;
};

inline BoundReport evaluate_bound(const std::string& name, const BoundQuery& q) {
  BoundReport r;
  r.name = name;
  const auto nd = static_cast<double>(q.n);
  if (name == "lemma22") {
    r.inputs = {{"theta", q.theta}, {"a", q.a}, {"set_size", q.set_size}};
    r.value = lemma22_bound(q.theta, q.a, q.set_size);
    r.clamped = clamp_probability(r.value);
  } else if (name == "lemma23") {
    r.inputs = {{"theta", q.theta}, {"set_size", q.set_size}};
    r.value = lemma23_bound(q.theta, q.set_size);
    r.clamped = clamp_probability(r.value);
  } else if (name == "prop41") {
    r.inputs = {{"n", nd}, {"eta", q.eta}};
    const auto v = prop41_bound(q.n, q.eta);
    r.value = v.value;
    r.clamped = clamp_probability(v.value);
    r.extras = {{"exponent", v.exponent}, {"L", threshold_L(q.n)},
                {"level", (2.0 + q.eta) * threshold_L(q.n)}};
  } else if (name == "prop51") {
    r.inputs = {{"n", nd}, {"epsilon", q.epsilon}};
    r.value = prop51_bound(q.n, q.epsilon);
    r.clamped = clamp_probability(r.value);
  } else if (name == "target_load") {
    r.inputs = {{"n", nd}};
    r.value = target_maxload(q.n);
  } else if (name == "threshold_L") {
    r.inputs = {{"n", nd}};
    r.value = threshold_L(q.n);
  } else if (name == "lower_ell") {
    r.inputs = {{"n", nd}};
    r.value = lower_ell(q.n);
  } else if (name == "stage_params") {
    r.inputs = {{"n", nd}, {"rho", q.rho}, {"epsilon", q.epsilon}};
    const auto p = stage_params(q.n, q.rho, q.epsilon);
    r.value = p.zeta;
    r.extras = {{"ell", p.ell}, {"s", p.s}, {"w", static_cast<double>(p.w)}, {"zeta", p.zeta}};
  } else if (name == "rejection_budget") {
    r.inputs = {{"n", nd}};
    r.value = rejection_budget(q.n);
    r.extras = {{"L", threshold_L(q.n)}};
  } else {
    throw config_error("unknown bound '" + name + "'");
  }
  return r;
}

}  // namespace thinlab
