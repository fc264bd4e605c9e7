#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinlab/process.hpp"
#include "thinlab/rng.hpp"
#include "thinlab/strategy.hpp"

namespace thinlab {

/// What happened to one ball.
///
/// The decision sequence is `rejects` rejections, followed by one accept
/// unless the ball was forced after exhausting the retry budget. With the
/// default budget of 1 that is either [accept] or [reject].
struct AllocationRecord {
  std::uint64_t ball = 0;  ///< 1-based ball number
  bin_t primary = 0;
  bin_t final_bin = 0;
  std::uint8_t rejects = 0;
  std::uint8_t retry_budget = 1;
  std::optional<std::uint64_t> secondary_index;  ///< Z¹ pool index used; none if accepted

  bool accepted_primary() const noexcept { return rejects == 0; }

  std::vector<Decision> decisions() const {
    std::vector<Decision> d(rejects, Decision::reject);
    if (rejects < retry_budget) d.push_back(Decision::accept);
    return d;
  }

  friend bool operator==(const AllocationRecord&, const AllocationRecord&) = default;
};

struct TraceParams {
  bin_t n = 0;
  std::uint64_t t = 0;
  StrategySpec strategy = ThinningRule::always_accept();
  std::uint64_t seed = 0;

  friend bool operator==(const TraceParams&, const TraceParams&) = default;
};

struct Trace {
  TraceParams params;
  std::vector<AllocationRecord> records;
  ProcessState final_state;

  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Empty state for `n` bins. Throws config_error when n == 0.
inline ProcessState new_process(std::uint64_t n, const StrategySpec& /*strategy*/) {
  if (n == 0) throw config_error("bin count must be at least 1");
  if (n > 0xffffffffULL) throw config_error("bin count exceeds 2^32 - 1");
  return ProcessState(static_cast<bin_t>(n));
}

/// Allocates one ball under a thinning rule.
///
/// The rule sees the primary suggestion and the history before this ball.
/// A rejected ball takes the secondary draw at pool index `rejections` (the
/// number of rejections so far), so the secondary stream must be positioned
/// there. With a retry budget k > 1 each fresh secondary suggestion is put
/// to the rule again; after k rejections the next draw is taken unconditionally.
template <BinStream Primary, BinStream Secondary>
AllocationRecord step(ProcessState& s, const ThinningRule& rule, Primary& primary,
                      Secondary& secondary) {
  AllocationRecord rec;
  rec.ball = s.t + 1;
  rec.retry_budget = static_cast<std::uint8_t>(rule.retry_budget());
  const bin_t z0 = primary.draw(s.n);
  rec.primary = z0;

  Decision d = rule.decide(s, z0);
  ++s.primary_suggested[z0];
  if (d == Decision::accept) {
    ++s.primary_accepted[z0];
    ++s.load[z0];
    rec.final_bin = z0;
    ++s.t;
    return rec;
  }

  const unsigned budget = rule.retry_budget();
  bin_t landed = 0;
  for (;;) {
    const std::uint64_t index = s.rejections;
    ++s.rejections;
    ++rec.rejects;
    landed = secondary.draw(s.n);
    rec.secondary_index = index;
    if (rec.rejects >= budget) break;
    if (rule.decide(s, landed) == Decision::accept) break;
  }
  ++s.secondary_used[landed];
  ++s.load[landed];
  rec.final_bin = landed;
  ++s.t;
  return rec;
}

/// Allocates one ball under the two-choices baseline. Every ball consumes one
/// secondary draw; choosing it counts as a rejection of the primary.
template <BinStream Primary, BinStream Secondary>
AllocationRecord step(ProcessState& s, const TwoChoicesGreedy& greedy, Primary& primary,
                      Secondary& secondary) {
  AllocationRecord rec;
  rec.ball = s.t + 1;
  const bin_t z0 = primary.draw(s.n);
  const std::uint64_t index = secondary.counter();
  const bin_t z1 = secondary.draw(s.n);
  rec.primary = z0;
  ++s.primary_suggested[z0];
  if (greedy.choose(s, z0, z1) == z0) {
    ++s.primary_accepted[z0];
    ++s.load[z0];
    rec.final_bin = z0;
  } else {
    ++s.rejections;
    rec.rejects = 1;
    rec.secondary_index = index;
    ++s.secondary_used[z1];
    ++s.load[z1];
    rec.final_bin = z1;
  }
  ++s.t;
  return rec;
}

template <BinStream Primary, BinStream Secondary>
AllocationRecord step(ProcessState& s, const StrategySpec& spec, Primary& primary,
                      Secondary& secondary) {
  return std::visit([&](const auto& rule) { return step(s, rule, primary, secondary); },
                    spec.rule());
}

/// Runs `balls` more steps, handing each record to `sink`.
template <BinStream Primary, BinStream Secondary, typename Sink>
void advance(ProcessState& s, const StrategySpec& spec, std::uint64_t balls, Primary& primary,
             Secondary& secondary, Sink&& sink) {
  std::visit(
      [&](const auto& rule) {
        for (std::uint64_t i = 0; i < balls; ++i) sink(step(s, rule, primary, secondary));
      },
      spec.rule());
}

/// Final state of a seeded run without keeping records. `state` is reused
/// (resized and zeroed) to avoid reallocating large tallies.
inline void run_state_into(ProcessState& state, std::uint64_t n, std::uint64_t t,
                           const StrategySpec& spec, std::uint64_t seed) {
  if (state.n != n || state.load.size() != n) state = new_process(n, spec);
  else state.reset();
  const auto seeds = stream_seeds(seed);
  RngStream primary(seeds.primary);
  RngStream secondary(seeds.secondary);
  advance(state, spec, t, primary, secondary, [](const AllocationRecord&) {});
}

inline ProcessState run_state(std::uint64_t n, std::uint64_t t, const StrategySpec& spec,
                              std::uint64_t seed) {
  ProcessState s = new_process(n, spec);
  run_state_into(s, n, t, spec, seed);
  return s;
}

/// Deterministic seeded run of `t` balls with the full per-ball record.
inline Trace run(std::uint64_t n, std::uint64_t t, const StrategySpec& spec, std::uint64_t seed) {
  Trace tr;
  tr.final_state = new_process(n, spec);
  tr.params = {static_cast<bin_t>(n), t, spec, seed};
  tr.records.reserve(t);
  const auto seeds = stream_seeds(seed);
  RngStream primary(seeds.primary);
  RngStream secondary(seeds.secondary);
  advance(tr.final_state, spec, t, primary, secondary,
          [&](const AllocationRecord& r) { tr.records.push_back(r); });
  return tr;
}

/// Applies one record to a state.
inline void apply_record(ProcessState& s, const AllocationRecord& r) {
  if (r.primary >= s.n || r.final_bin >= s.n) throw std::out_of_range("record bin out of range");
  ++s.primary_suggested[r.primary];
  if (r.accepted_primary()) {
    if (r.final_bin != r.primary) throw std::invalid_argument("accepted ball left its primary bin");
    ++s.primary_accepted[r.primary];
  } else {
    ++s.secondary_used[r.final_bin];
    s.rejections += r.rejects;
  }
  ++s.load[r.final_bin];
  ++s.t;
}

/// Rebuilds the final state from the records alone.
inline ProcessState replay(const Trace& tr) {
  ProcessState s(tr.params.n);
  for (const auto& r : tr.records) apply_record(s, r);
  return s;
}

}  // namespace thinlab
