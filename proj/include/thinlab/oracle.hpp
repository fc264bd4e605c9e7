#pragma once

// Exact small-instance ground truth.
//
// Enumeration pmfs and the one-choice distribution use exact rational
// arithmetic; only the Poisson side of the comparison check is floating point.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "thinlab/engine.hpp"
#include "thinlab/error.hpp"

namespace thinlab {

using bigint = boost::multiprecision::cpp_int;
using rational = boost::multiprecision::cpp_rational;

/// Distribution over max-load levels. Only levels with positive mass appear.
struct Pmf {
  std::vector<std::uint64_t> support;  // ascending
  std::vector<rational> probs;

  rational at(std::uint64_t level) const {
    auto it = std::lower_bound(support.begin(), support.end(), level);
    if (it == support.end() || *it != level) return 0;
    return probs[static_cast<std::size_t>(it - support.begin())];
  }

  /// P(X >= level).
  rational tail_ge(std::uint64_t level) const {
    rational p = 0;
    for (std::size_t i = 0; i < support.size(); ++i)
      if (support[i] >= level) p += probs[i];
    return p;
  }

  rational total() const {
    rational p = 0;
    for (const auto& q : probs) p += q;
    return p;
  }

  friend bool operator==(const Pmf&, const Pmf&) = default;
};

inline double to_double(const rational& r) { return r.convert_to<double>(); }

/// Builds a Pmf from counts over levels 0..counts.size()-1 with common denominator.
inline Pmf pmf_from_counts(std::span<const bigint> counts, const bigint& denominator) {
  Pmf p;
  for (std::size_t level = 0; level < counts.size(); ++level) {
    if (counts[level] == 0) continue;
    p.support.push_back(level);
    p.probs.emplace_back(counts[level], denominator);
  }
  return p;
}

/// Total-variation distance between an exact pmf and empirical counts by level.
inline double total_variation(const Pmf& exact, const std::map<std::uint64_t, std::uint64_t>& counts) {
  std::uint64_t trials = 0;
  for (const auto& [level, c] : counts) trials += c;
  std::map<std::uint64_t, double> diff;
  for (std::size_t i = 0; i < exact.support.size(); ++i) diff[exact.support[i]] += to_double(exact.probs[i]);
  for (const auto& [level, c] : counts) diff[level] -= static_cast<double>(c) / static_cast<double>(trials);
  double tv = 0.0;
  for (const auto& [level, d] : diff) tv += std::abs(d);
  return tv / 2.0;
}

namespace detail {
/// n^e, or nullopt-style sentinel max() on overflow past `cap`.
inline std::uint64_t checked_pow(std::uint64_t n, std::uint64_t e, std::uint64_t cap) {
  std::uint64_t v = 1;
  for (std::uint64_t i = 0; i < e; ++i) {
    if (n != 0 && v > cap / n) return std::numeric_limits<std::uint64_t>::max();
    v *= n;
  }
  return v;
}

class SpanStream {
 public:
  explicit SpanStream(std::span<const bin_t> bins) : bins_(bins) {}
  bin_t draw(bin_t /*n*/) { return bins_[pos_++]; }
  std::uint64_t counter() const noexcept { return pos_; }
 private:
  std::span<const bin_t> bins_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline constexpr std::uint64_t kEnumerationLimit = 100'000'000;

/// Number of joint (Z⁰, Z¹) outcomes the enumeration for (n, t, spec) visits.
/// The secondary pool has k·t entries for retry budget k.
inline std::uint64_t enumeration_size(std::uint64_t n, std::uint64_t t, const StrategySpec& spec) {
  const std::uint64_t digits = t + t * spec.retry_budget();
  return detail::checked_pow(n, digits, kEnumerationLimit);
}

/// Exact max-load pmf by running the engine on every joint draw assignment,
/// each with weight n^-(digits). Unused secondary draws are still iterated.
inline Pmf exact_maxload_distribution(std::uint64_t n, std::uint64_t t, const StrategySpec& spec) {
  if (n == 0) throw config_error("bin count must be at least 1");
  const std::uint64_t pool = t * spec.retry_budget();
  const std::uint64_t digits = t + pool;
  const std::uint64_t outcomes = enumeration_size(n, t, spec);
  if (outcomes > kEnumerationLimit)
    throw size_guard_error("enumeration needs n^" + std::to_string(digits) + " = " +
                           std::to_string(std::pow(static_cast<double>(n), static_cast<double>(digits))) +
                           " outcomes, limit is 1e8");

  std::vector<bin_t> draws(digits, 0);
  std::vector<std::uint64_t> hist(t + 1, 0);
  ProcessState state = new_process(n, spec);
  const auto bins = static_cast<bin_t>(n);
  for (std::uint64_t o = 0; o < outcomes; ++o) {
    state.reset();
    detail::SpanStream primary(std::span<const bin_t>(draws).first(t));
    detail::SpanStream secondary(std::span<const bin_t>(draws).subspan(t));
    advance(state, spec, t, primary, secondary, [](const AllocationRecord&) {});
    ++hist[max_load(state)];
    for (std::size_t d = 0; d < digits; ++d) {
      if (++draws[d] < bins) break;
      draws[d] = 0;
    }
  }
  std::vector<bigint> counts(hist.begin(), hist.end());
  return pmf_from_counts(counts, bigint(outcomes));
}

/// Number of ways to place `balls` labelled balls into `bins` bins with no
/// bin above `cap`.
inline bigint capped_placements(std::uint64_t bins, std::uint64_t balls, std::uint64_t cap,
                                const std::vector<std::vector<bigint>>& binom) {
  std::vector<bigint> ways(balls + 1, 0), next(balls + 1);
  ways[0] = 1;
  for (std::uint64_t j = 0; j < bins; ++j) {
    for (std::uint64_t b = 0; b <= balls; ++b) {
      bigint acc = 0;
      const std::uint64_t top = std::min(cap, b);
      for (std::uint64_t i = 0; i <= top; ++i)
        if (ways[b - i] != 0) acc += binom[b][i] * ways[b - i];
      next[b] = std::move(acc);
    }
    std::swap(ways, next);
  }
  return ways[balls];
}

inline std::vector<std::vector<bigint>> binomial_table(std::uint64_t up_to) {
  std::vector<std::vector<bigint>> c(up_to + 1);
  for (std::uint64_t b = 0; b <= up_to; ++b) {
    c[b].assign(b + 1, 1);
    for (std::uint64_t i = 1; i < b; ++i) c[b][i] = c[b - 1][i - 1] + c[b - 1][i];
  }
  return c;
}

inline constexpr std::uint64_t kDpCellLimit = 1'000'000;

/// Exact max-load pmf of t balls thrown independently and uniformly into n
/// bins, by dynamic programming over bins: P(max <= a) = W_a(n, t) / n^t.
inline Pmf exact_one_choice_maxload(std::uint64_t n, std::uint64_t t) {
  if (n == 0) throw config_error("bin count must be at least 1");
  if (n * t > kDpCellLimit)
    throw size_guard_error("one-choice DP needs n*t = " + std::to_string(n * t) +
                           " cells, limit is 1e6");
  if (t == 0) return Pmf{{0}, {rational(1)}};
  const auto binom = binomial_table(t);
  const bigint total = boost::multiprecision::pow(bigint(n), static_cast<unsigned>(t));
  std::vector<bigint> counts(t + 1, 0);
  bigint below = 0;  // W_{a-1}
  for (std::uint64_t a = 0; a <= t; ++a) {
    const bigint upto = a == t ? total : capped_placements(n, t, a, binom);
    counts[a] = upto - below;
    below = upto;
    if (upto == total) break;
  }
  return pmf_from_counts(counts, total);
}

/// P(Poisson(λ) > a), by direct tail summation above the mean and by
/// complement of the lower sum below it.
inline double poisson_tail(double lambda, std::uint64_t a) {
  if (!(lambda > 0.0)) throw domain_error("poisson_tail needs lambda > 0");
  const double log_lambda = std::log(lambda);
  auto log_pmf = [&](double j) { return -lambda + j * log_lambda - std::lgamma(j + 1.0); };
  if (static_cast<double>(a) < lambda) {
    double lower = 0.0;
    double term = std::exp(log_pmf(0.0));
    for (std::uint64_t j = 0; j <= a; ++j) {
      if (j > 0) term *= lambda / static_cast<double>(j);
      lower += term;
    }
    return std::max(0.0, 1.0 - lower);
  }
  double term = std::exp(log_pmf(static_cast<double>(a) + 1.0));
  double sum = 0.0;
  for (std::uint64_t j = a + 1; term > 0.0; ++j) {
    sum += term;
    term *= lambda / static_cast<double>(j + 1);
    if (term < sum * 1e-18) break;
  }
  return sum;
}

/// P(Poisson(λ) < a).
inline double poisson_below(double lambda, std::uint64_t a) {
  return a == 0 ? 0.0 : 1.0 - poisson_tail(lambda, a - 1);
}

enum class MonotoneStatistic { max_ge_a, empties_ge_k };

struct PoissonizationCheck {
  double lhs = 0.0;  ///< exact probability, multinomial allocation
  double rhs = 0.0;  ///< 2 × probability under iid Poisson(t/n)
  bool holds = false;
};

/// Exact P(at least k empty bins) for t uniform balls in n bins, by
/// inclusion–exclusion counts of surjections.
inline rational exact_empties_ge(std::uint64_t n, std::uint64_t t, std::uint64_t k) {
  if (k == 0) return 1;
  if (k > n) return 0;
  const auto binom = binomial_table(n);
  const bigint total = boost::multiprecision::pow(bigint(n), static_cast<unsigned>(t));
  bigint favourable = 0;
  for (std::uint64_t j = k; j <= n; ++j) {
    const std::uint64_t occupied = n - j;
    // surjections of t balls onto `occupied` bins
    bigint surj = 0;
    for (std::uint64_t i = 0; i <= occupied; ++i) {
      bigint term = binom[occupied][i] *
                    boost::multiprecision::pow(bigint(occupied - i), static_cast<unsigned>(t));
      if (i % 2) surj -= term;
      else surj += term;
    }
    favourable += binom[n][j] * surj;
  }
  return rational(favourable, total);
}

/// Compares P(X ∈ S) with 2·P(Y ∈ S) for a monotone event S from the menu,
/// X multinomial and Y iid Poisson(t/n).
inline PoissonizationCheck poissonization_check(std::uint64_t n, std::uint64_t t,
                                                MonotoneStatistic stat, std::uint64_t level) {
  if (n == 0) throw config_error("bin count must be at least 1");
  PoissonizationCheck c;
  const double lambda = static_cast<double>(t) / static_cast<double>(n);
  const auto nd = static_cast<double>(n);
  if (stat == MonotoneStatistic::max_ge_a) {
    c.lhs = to_double(exact_one_choice_maxload(n, t).tail_ge(level));
    double p;
    if (level == 0) p = 1.0;
    else if (t == 0) p = 0.0;
    else p = -std::expm1(nd * std::log1p(-poisson_tail(lambda, level - 1)));
    c.rhs = 2.0 * p;
  } else {
    if (n * t > kDpCellLimit) throw size_guard_error("empties check too large");
    c.lhs = to_double(exact_empties_ge(n, t, level));
    const double p0 = std::exp(-lambda);
    double p = 0.0;
    if (level == 0) {
      p = 1.0;
    } else {
      for (std::uint64_t j = level; j <= n; ++j) {
        const double lc = std::lgamma(nd + 1) - std::lgamma(j + 1.0) - std::lgamma(nd - j + 1);
        const double pj = p0 >= 1.0 ? (j == n ? 1.0 : 0.0)
                                    : std::exp(lc + j * std::log(p0) + (nd - j) * std::log1p(-p0));
        p += pj;
      }
    }
    c.rhs = 2.0 * std::min(1.0, p);
  }
  c.holds = c.lhs <= c.rhs + 1e-12;
  return c;
}

}  // namespace thinlab
