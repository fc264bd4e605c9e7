#pragma once

// Invariant batteries shared by the `check` and `oracle --check` commands.

#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "thinlab/bounds.hpp"
#include "thinlab/engine.hpp"
#include "thinlab/oracle.hpp"
#include "thinlab/strategy.hpp"

namespace thinlab {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::string detail;
};

using CheckReport = std::vector<CheckResult>;

inline bool all_passed(const CheckReport& r) {
  for (const auto& c : r)
    if (!c.passed) return false;
  return true;
}

namespace detail {
inline std::string describe(std::uint64_t n, std::uint64_t t, const StrategySpec& s, std::uint64_t seed) {
  std::ostringstream os;
  os << "n=" << n << " t=" << t << " strategy=" << s.to_string() << " seed=" << seed;
  return os.str();
}

/// Checks every structural property of a trace; empty string when all hold.
inline std::string trace_violation(const Trace& tr) {
  const auto& s = tr.final_state;
  const auto budget = tr.params.strategy.retry_budget();
  if (auto v = check_invariants(s, budget)) return *v;
  if (tr.records.size() != tr.params.t) return "trace length != t";
  std::uint64_t expected_index = 0;
  std::optional<std::uint64_t> last_index;
  for (const auto& r : tr.records) {
    if (r.accepted_primary() && r.final_bin != r.primary) return "accepted ball moved";
    if (r.accepted_primary() != !r.secondary_index.has_value()) return "pool index on accepted ball";
    if (r.secondary_index) {
      if (last_index && *r.secondary_index <= *last_index) return "pool indices not increasing";
      last_index = r.secondary_index;
      if (tr.params.strategy.is_thinning() && budget == 1) {
        if (*r.secondary_index != expected_index) return "pool index skipped";
        ++expected_index;
      }
    }
  }
  if (replay(tr) != s) return "replay differs from final state";
  if (tr.params.strategy.kind() == StrategySpec::Kind::threshold) {
    for (bin_t m = 0; m < s.n; ++m)
      if (s.primary_accepted[m] > tr.params.strategy.ell()) return "threshold guarantee broken";
  }
  return {};
}
}  // namespace detail

/// Conservation, decomposition, pool indexing, replay, threshold guarantee
/// and determinism on `cases` seeded random configurations.
inline CheckReport check_engine(std::uint64_t cases = 200, std::uint64_t seed = 1) {
  CheckReport report;
  CheckResult structure{"engine.structure", true, ""};
  CheckResult determinism{"engine.determinism", true, ""};
  RngStream pick(seed);
  const char* kinds[] = {"threshold", "one-choice", "always-reject", "two-choices", "threshold-k"};
  for (std::uint64_t c = 0; c < cases && structure.passed && determinism.passed; ++c) {
    const std::uint64_t n = 1 + pick.draw(200);
    const std::uint64_t t = pick.draw(static_cast<bin_t>(3 * n + 1));
    const std::string kind = kinds[pick.draw(5)];
    std::string text = kind;
    if (kind == "threshold") text = "threshold:" + std::to_string(1 + pick.draw(4));
    if (kind == "threshold-k")
      text = "threshold:" + std::to_string(1 + pick.draw(3)) + ",k=" + std::to_string(2 + pick.draw(3));
    const auto spec = parse_strategy(text, n);
    const std::uint64_t run_seed = pick.next_word();
    const auto tr = run(n, t, spec, run_seed);
    if (auto v = detail::trace_violation(tr); !v.empty()) {
      structure.passed = false;
      structure.detail = v + " at " + detail::describe(n, t, spec, run_seed);
    }
    if (run(n, t, spec, run_seed) != tr || run_state(n, t, spec, run_seed) != tr.final_state) {
      determinism.passed = false;
      determinism.detail = detail::describe(n, t, spec, run_seed);
    }
  }
  report.push_back(structure);
  report.push_back(determinism);
  return report;
}

/// Decision-rule identities.
inline CheckReport check_strategies(std::uint64_t cases = 100, std::uint64_t seed = 2) {
  CheckReport report;
  CheckResult big_ell{"strategies.threshold_ge_t_is_one_choice", true, ""};
  RngStream pick(seed);
  for (std::uint64_t c = 0; c < cases && big_ell.passed; ++c) {
    const std::uint64_t n = 1 + pick.draw(50);
    const std::uint64_t t = pick.draw(100);
    const std::uint64_t s = pick.next_word();
    const auto a = run(n, t, ThinningRule::threshold(static_cast<count_t>(t + 1 + pick.draw(3))), s);
    const auto b = run(n, t, ThinningRule::always_accept(), s);
    if (a.records != b.records || a.final_state != b.final_state) {
      big_ell.passed = false;
      big_ell.detail = "n=" + std::to_string(n) + " t=" + std::to_string(t);
    }
  }
  report.push_back(big_ell);

  CheckResult rule{"strategies.threshold_rule", true, ""};
  ProcessState st(3);
  st.primary_suggested = {3, 4, 0};
  const auto th = ThinningRule::threshold(4);
  if (th.decide(st, 0) != Decision::accept || th.decide(st, 1) != Decision::reject) {
    rule.passed = false;
    rule.detail = "threshold 4 misclassifies counts 3/4";
  }
  st.load = {2, 1, 1};
  if (two_choices_decide(st, 0, 1) != 1 || two_choices_decide(st, 1, 2) != 1) {
    rule.passed = false;
    rule.detail = "two-choices tie or comparison wrong";
  }
  report.push_back(rule);
  return report;
}

/// Monotonicity, clamping and floor/ceil consistency over a parameter grid.
inline CheckReport check_bounds() {
  CheckReport report;
  CheckResult mono{"bounds.monotone", true, ""};
  auto fail = [&](CheckResult& r, std::string why) {
    if (r.passed) r.detail = std::move(why);
    r.passed = false;
  };
  for (double theta : {0.1, 0.3, 0.5, 0.9}) {
    for (unsigned a = 1; a < 8; ++a)
      for (double s = 1; s < 1e5; s *= 3) {
        if (lemma22_bound(theta, a, s * 3) > lemma22_bound(theta, a, s)) fail(mono, "lemma22 in |S|");
        if (lemma22_bound(theta, a + 1, s) < lemma22_bound(theta, a, s)) fail(mono, "lemma22 in a");
      }
    for (double s = 1; s < 1e5; s *= 3) {
      if (lemma23_bound(theta, s * 3) > lemma23_bound(theta, s)) fail(mono, "lemma23 in |S|");
      if (lemma23_bound(std::min(1.0, theta + 0.1), s) > lemma23_bound(theta, s)) fail(mono, "lemma23 in theta");
    }
  }
  for (std::uint64_t n = 16; n < 10'000'000'000ULL; n *= 7)
    for (double eta = 0.25; eta < 20; eta *= 2) {
      if (prop41_bound(n, eta * 2).value >= prop41_bound(n, eta).value) fail(mono, "prop41 in eta");
    }
  for (std::uint64_t n = 1; n < 10'000'000'000ULL; n *= 7)
    for (double eps = 0.05; eps < 2; eps *= 2) {
      if (prop51_bound(n * 7, eps) > prop51_bound(n, eps)) fail(mono, "prop51 in n");
      if (prop51_bound(n, eps * 2) > prop51_bound(n, eps)) fail(mono, "prop51 in epsilon");
    }
  report.push_back(mono);

  CheckResult ranges{"bounds.ranges", true, ""};
  for (std::uint64_t n = 3; n < 5'000'000'000ULL; n = n * 3 / 2 + 1) {
    const auto diff = threshold_L(n) - lower_ell(n);
    if (diff > 1) fail(ranges, "L - ell > 1 at n=" + std::to_string(n));
    if (std::abs(target_maxload(n) - 2.0 * std::sqrt(2.0 * std::log(n) / std::log(std::log(n)))) > 1e-12 * target_maxload(n))
      fail(ranges, "target identity");
  }
  for (double theta : {0.0, 0.2, 1.0})
    for (double s : {0.0, 10.0, 1e6}) {
      const double raw = lemma23_bound(theta, s);
      if (raw < 0 || clamp_probability(raw) > 1) fail(ranges, "lemma23 range");
    }
  report.push_back(ranges);
  return report;
}

/// Exact-law identities, dominance and the Poissonization comparison on small
/// instances.
inline CheckReport check_oracle(const std::vector<std::pair<std::uint64_t, std::uint64_t>>& instances) {
  CheckReport report;
  CheckResult equal{"oracle.one_choice_identities", true, ""};
  CheckResult dom{"oracle.threshold_dominated_by_one_choice", true, ""};
  CheckResult poi{"oracle.poissonization", true, ""};
  CheckResult sums{"oracle.pmf_sums_to_one", true, ""};
  for (auto [n, t] : instances) {
    const std::string where = "n=" + std::to_string(n) + " t=" + std::to_string(t);
    const auto accept = exact_maxload_distribution(n, t, ThinningRule::always_accept());
    const auto reject = exact_maxload_distribution(n, t, ThinningRule::always_reject());
    const auto dp = exact_one_choice_maxload(n, t);
    if (!(accept == dp && reject == accept)) {
      equal.passed = false;
      equal.detail = where;
    }
    for (const auto* p : {&accept, &reject, &dp})
      if (p->total() != 1) {
        sums.passed = false;
        sums.detail = where;
      }
    for (count_t ell : {1u, 2u}) {
      const auto th = exact_maxload_distribution(n, t, ThinningRule::threshold(ell));
      if (th.total() != 1) {
        sums.passed = false;
        sums.detail = where;
      }
      bool strict = false;
      for (std::uint64_t a = 2; a <= t; ++a) {
        if (th.tail_ge(a) > dp.tail_ge(a)) {
          dom.passed = false;
          dom.detail = where + " ell=" + std::to_string(ell) + " a=" + std::to_string(a);
        }
        strict = strict || th.tail_ge(a) < dp.tail_ge(a);
      }
      if (ell == 1 && n >= 2 && t >= 2 && !strict) {
        dom.passed = false;
        dom.detail = where + " ell=1 not strictly dominated";
      }
    }
    for (std::uint64_t level = 0; level <= t + 1; ++level)
      if (!poissonization_check(n, t, MonotoneStatistic::max_ge_a, level).holds) {
        poi.passed = false;
        poi.detail = where + " max>=" + std::to_string(level);
      }
    for (std::uint64_t level = 0; level <= n; ++level)
      if (!poissonization_check(n, t, MonotoneStatistic::empties_ge_k, level).holds) {
        poi.passed = false;
        poi.detail = where + " empties>=" + std::to_string(level);
      }
  }
  report.insert(report.end(), {equal, sums, dom, poi});
  return report;
}

inline std::vector<std::pair<std::uint64_t, std::uint64_t>> default_oracle_instances() {
  return {{2, 2}, {2, 3}, {3, 2}, {3, 3}};
}

}  // namespace thinlab
