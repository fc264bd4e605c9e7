#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinlab/error.hpp"
#include "thinlab/rng.hpp"

namespace thinlab {

using count_t = std::uint32_t;

/// Live tallies of one allocation run. Bins are 0-based here; files and the
/// CLI present them 1-based.
///
/// Invariants after every step:
///   sum(load) == t
///   load[m] == primary_accepted[m] + secondary_used[m]
///   primary_accepted[m] <= primary_suggested[m]
///   sum(secondary_used) == rejections      (retry budget 1)
///   rejections <= t                        (retry budget 1)
struct ProcessState {
  bin_t n = 0;
  std::uint64_t t = 0;
  std::vector<count_t> load;               // F_t
  std::vector<count_t> primary_suggested;  // A_t, accepted or not
  std::vector<count_t> primary_accepted;
  std::vector<count_t> secondary_used;     // B at r_t
  std::uint64_t rejections = 0;            // r_t

  ProcessState() = default;
  explicit ProcessState(bin_t bins)
      : n(bins), load(bins, 0), primary_suggested(bins, 0), primary_accepted(bins, 0),
        secondary_used(bins, 0) {
    if (bins == 0) throw config_error("bin count must be at least 1");
  }

  void reset() {
    t = 0;
    rejections = 0;
    std::fill(load.begin(), load.end(), 0);
    std::fill(primary_suggested.begin(), primary_suggested.end(), 0);
    std::fill(primary_accepted.begin(), primary_accepted.end(), 0);
    std::fill(secondary_used.begin(), secondary_used.end(), 0);
  }

  friend bool operator==(const ProcessState&, const ProcessState&) = default;
};

/// The three per-bin tallies with level sets φ (final load), α (primary
/// suggestions) and β (secondary allocations).
enum class Tally { final_load, primary_suggested, secondary_used };

inline std::span<const count_t> tally_of(const ProcessState& s, Tally which) noexcept {
  switch (which) {
    case Tally::primary_suggested: return s.primary_suggested;
    case Tally::secondary_used: return s.secondary_used;
    case Tally::final_load: break;
  }
  return s.load;
}

namespace detail {
inline void check_subset(const ProcessState& s, std::span<const bin_t> subset) {
  for (bin_t m : subset)
    if (m >= s.n)
      throw std::out_of_range("bin " + std::to_string(m) + " outside [0, " +
                              std::to_string(s.n) + ")");
}
}  // namespace detail

/// Largest load over `subset` (all bins when omitted).
inline count_t max_load(const ProcessState& s,
                        std::optional<std::span<const bin_t>> subset = std::nullopt) {
  if (!subset) {
    if (s.load.empty()) return 0;
    return *std::max_element(s.load.begin(), s.load.end());
  }
  if (subset->empty()) throw domain_error("max load over an empty set of bins is undefined");
  detail::check_subset(s, *subset);
  count_t best = 0;
  for (bin_t m : *subset) best = std::max(best, s.load[m]);
  return best;
}

/// Number of bins in `subset` whose tally is at least `level`.
inline std::uint64_t level_set_count(const ProcessState& s, Tally which, count_t level,
                                     std::span<const bin_t> subset) {
  detail::check_subset(s, subset);
  const auto tally = tally_of(s, which);
  return static_cast<std::uint64_t>(
      std::count_if(subset.begin(), subset.end(), [&](bin_t m) { return tally[m] >= level; }));
}

/// Same as above over all bins.
inline std::uint64_t level_set_count(const ProcessState& s, Tally which, count_t level) {
  const auto tally = tally_of(s, which);
  return static_cast<std::uint64_t>(
      std::count_if(tally.begin(), tally.end(), [&](count_t v) { return v >= level; }));
}

/// Checks the state invariants; returns a description of the first violation.
inline std::optional<std::string> check_invariants(const ProcessState& s,
                                                   unsigned retry_budget = 1) {
  std::uint64_t total = 0;
  std::uint64_t secondary = 0;
  for (bin_t m = 0; m < s.n; ++m) {
    total += s.load[m];
    secondary += s.secondary_used[m];
    if (s.load[m] != s.primary_accepted[m] + s.secondary_used[m])
      return "decomposition broken at bin " + std::to_string(m);
    if (s.primary_accepted[m] > s.primary_suggested[m])
      return "accepted exceeds suggested at bin " + std::to_string(m);
  }
  if (total != s.t) return "conservation broken: sum of loads " + std::to_string(total) +
                           " != t " + std::to_string(s.t);
  if (retry_budget == 1) {
    if (secondary != s.rejections) return "secondary allocations != rejections";
    if (s.rejections > s.t) return "more rejections than balls";
  } else if (secondary > s.rejections) {
    return "more secondary allocations than rejections";
  }
  return std::nullopt;
}

}  // namespace thinlab
