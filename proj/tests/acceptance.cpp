// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "reference_bounds.hpp"
#include "thinlab/thinlab.hpp"

using namespace thinlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double x, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

ExperimentConfig campaign(std::uint64_t n, Ratio rho, std::string strategy, std::uint64_t trials,
                          std::uint64_t seed) {
  ExperimentConfig c;
  c.n = n;
  c.rho = rho;
  c.strategy = std::move(strategy);
  c.trials = trials;
  c.base_seed = seed;
  return c;
}

Outcome oracle_equality() {
  const auto start = Clock::now();
  for (auto [n, t] : std::vector<std::pair<std::uint64_t, std::uint64_t>>{{2, 2}, {2, 3}, {3, 2}, {3, 3}}) {
    const auto accept = exact_maxload_distribution(n, t, ThinningRule::always_accept());
    const auto reject = exact_maxload_distribution(n, t, ThinningRule::always_reject());
    const auto dp = exact_one_choice_maxload(n, t);
    if (!(accept == dp) || !(reject == dp) || dp.total() != 1)
      return {false, "mismatch at n=" + std::to_string(n) + " t=" + std::to_string(t)};
  }
  const double secs = seconds_since(start);
  return {secs < 10.0, "4 instances equal exactly in " + fmt(secs, 3) + " s"};
}

Outcome engine_vs_oracle() {
  const auto start = Clock::now();
  const auto spec = StrategySpec(ThinningRule::threshold(1));
  const auto exact = exact_maxload_distribution(3, 3, spec);
  ExperimentConfig c;
  c.n = 3;
  c.t = 3;
  c.strategy = "threshold:1";
  c.trials = 100'000;
  c.base_seed = 20250101;
  std::map<std::uint64_t, std::uint64_t> counts;
  for (auto m : run_trials(c).per_trial_maxload) ++counts[m];
  const double tv = total_variation(exact, counts);
  const double secs = seconds_since(start);
  return {tv <= 0.02 && secs < 30.0, "TV=" + fmt(tv, 4) + " (limit 0.02) in " + fmt(secs, 3) + " s"};
}

Outcome threshold_guarantee() {
  RngStream pick(31337);
  std::uint64_t trials = 0, violations = 0;
  std::string first;
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t n = 1 + pick.draw(10'000);
    const Ratio rho{1 + pick.draw(2000), 1000};  // (0, 2]
    const unsigned ell = 1 + pick.draw(4);
    auto c = campaign(n, rho, "threshold:" + std::to_string(ell), 5, pick.next_word());
    const auto bad = map_trials(c, [&](const ProcessState& s, std::uint64_t, std::uint64_t) {
      for (bin_t m = 0; m < s.n; ++m)
        if (s.primary_accepted[m] > ell || s.load[m] != s.primary_accepted[m] + s.secondary_used[m]) return 1;
      return 0;
    });
    for (int b : bad) {
      ++trials;
      if (b) {
        ++violations;
        if (first.empty()) first = " first at n=" + std::to_string(n) + " l=" + std::to_string(ell);
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations in " + std::to_string(trials) +
                               " trials over 100 configs" + first};
}

Outcome desk_scale() {
  const auto start = Clock::now();
  const auto s = run_trials(campaign(1'000'000, {1, 1}, "threshold:auto", 100, 42));
  const double secs = seconds_since(start);
  const bool pass = (s.median == 5 || s.median == 6) && *s.normalized_ratio >= 0.6 &&
                    *s.normalized_ratio <= 1.2 && secs < 300.0;
  return {pass, "strategy " + s.strategy + ", median " + std::to_string(s.median) + ", target " +
                    fmt(*s.target, 5) + ", ratio " + fmt(*s.normalized_ratio, 4) + ", " + fmt(secs, 3) + " s"};
}

Outcome separation() {
  const std::vector<std::uint64_t> grid{10'000, 100'000, 1'000'000};
  const auto two = scaling_study(grid, {1, 1}, "two-choices", 50, 7);
  const auto thr = scaling_study(grid, {1, 1}, "threshold:auto", 50, 7);
  const auto one = scaling_study(grid, {1, 1}, "one-choice", 50, 7);
  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto a = two[i].median_maxload, b = thr[i].median_maxload, c = one[i].median_maxload;
    pass = pass && a < b && b < c;
    detail += (i ? "; " : "") + std::string("n=") + std::to_string(grid[i]) + ": " + std::to_string(a) + " < " +
              std::to_string(b) + " < " + std::to_string(c);
  }
  return {pass, detail};
}

Outcome prop41_domination() {
  const std::uint64_t n = 1'000'000;
  const double eta = 4.0;
  const auto L = threshold_L(n);
  const auto level = static_cast<std::uint64_t>((2.0 + eta) * L);
  const auto tail = tail_from_maxloads(run_trials(campaign(n, {1, 1}, "threshold:auto", 1000, 4)).per_trial_maxload, level);
  const double bound = clamp_probability(prop41_bound(n, eta).value);
  const bool pass = tail.ci95.hi <= 0.055 && tail.ci95.hi <= bound;
  return {pass, std::to_string(tail.exceed) + "/1000 above " + std::to_string(level) + ", Wilson upper " +
                    fmt(tail.ci95.hi, 4) + ", bound " + fmt(bound, 4)};
}

Outcome poissonization() {
  int checked = 0;
  for (std::uint64_t n = 2; n <= 4; ++n)
    for (std::uint64_t t = 1; t <= 4; ++t) {
      for (std::uint64_t a = 0; a <= t + 1; ++a, ++checked)
        if (!poissonization_check(n, t, MonotoneStatistic::max_ge_a, a).holds)
          return {false, "max>=" + std::to_string(a) + " at n=" + std::to_string(n) + " t=" + std::to_string(t)};
      for (std::uint64_t k = 0; k <= n; ++k, ++checked)
        if (!poissonization_check(n, t, MonotoneStatistic::empties_ge_k, k).holds)
          return {false, "empties>=" + std::to_string(k) + " at n=" + std::to_string(n) + " t=" + std::to_string(t)};
    }
  return {true, std::to_string(checked) + " (n, t, statistic, level) cases hold"};
}

Outcome lemma_domination() {
  const std::uint64_t n = 1000, balls = 500, set_size = 100, trials = 100'000;
  const double theta = 0.5;
  const unsigned a = 2;
  const double saturation = theta * set_size / (2.0 * std::numbers::e);
  ExperimentConfig c;
  c.n = n;
  c.t = balls;
  c.trials = trials;
  c.base_seed = 22;
  c.strategy = "one-choice";
  struct Hit {
    bool below_a;
    bool few_occupied;
  };
  const auto hits = map_trials(c, [&](const ProcessState& s, std::uint64_t, std::uint64_t) {
    count_t top = 0;
    std::uint64_t occupied = 0;
    for (bin_t m = 0; m < set_size; ++m) {
      top = std::max(top, s.load[m]);
      occupied += s.load[m] > 0;
    }
    return Hit{top < a, static_cast<double>(occupied) <= saturation};
  });
  std::uint64_t below = 0, few = 0;
  for (const auto& h : hits) {
    below += h.below_a;
    few += h.few_occupied;
  }
  const double p22 = static_cast<double>(below) / trials, p23 = static_cast<double>(few) / trials;
  const double b22 = clamp_probability(lemma22_bound(theta, a, set_size));
  const double b23 = clamp_probability(lemma23_bound(theta, set_size));
  return {p22 <= b22 && p23 <= b23, "P(max_S < 2)=" + fmt(p22, 4) + " <= " + fmt(b22, 4) +
                                        "; P(occupied_S <= " + fmt(saturation, 4) + ")=" + fmt(p23, 4) + " <= " +
                                        fmt(b23, 4)};
}

Outcome rejections() {
  const std::uint64_t n = 1'000'000;
  double expectation = 0.0;
  for (std::uint64_t a = 4; a < 200; ++a) expectation += poisson_tail(1.0, a);
  expectation *= static_cast<double>(n);
  const auto s = run_trials(campaign(n, {1, 1}, "threshold:4", 100, 9));
  const double budget = rejection_budget(n);
  double worst = 0.0;
  for (auto r : s.per_trial_rejections) worst = std::max(worst, static_cast<double>(r) / budget);
  const double rel = s.mean_rejections / expectation - 1.0;
  return {std::abs(rel) <= 0.15 && worst < 0.5, "mean " + fmt(s.mean_rejections, 6) + " vs expected " +
                                                    fmt(expectation, 6) + " (" + fmt(100 * rel, 3) +
                                                    "%), worst ratio to budget " + fmt(worst, 4)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome cli_determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "thinlab_acceptance";
  std::filesystem::create_directories(dir);
  const std::vector<std::string> runs = {
      "simulate -n 100000 --rho 1 --strategy threshold:auto --trials 24 --seed 5",
      "simulate -n 50000 --rho 3/2 --strategy two-choices --trials 24 --seed 5 --format json",
      "scale --grid 10000,20000 --trials 10 --seed 7"};
  int compared = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::string reference;
    for (const char* workers : {"1", "2", "5"}) {
      const auto out = dir / ("run" + std::to_string(i) + "_w" + workers);
      const auto cmd = std::string(THINLAB_CLI_PATH) + " " + runs[i] + " --no-meta --workers " + workers +
                       " --out " + out.string();
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
      const auto bytes = slurp(out);
      if (bytes.empty()) return {false, "empty output: " + cmd};
      if (reference.empty()) reference = bytes;
      else if (bytes != reference) return {false, "output differs with --workers " + std::string(workers) + ": " + runs[i]};
      ++compared;
    }
  }
  std::filesystem::remove_all(dir);
  return {true, std::to_string(runs.size()) + " commands byte-identical across --workers 1, 2, 5"};
}

Outcome bounds_cross_validation() {
  int failures = 0;
  double worst = 0.0;
  std::string detail;
  int evaluators = 0;
  for (const auto& c : reference::cross_validate(100)) {
    if (c.evaluator == "rejection_budget") continue;
    ++evaluators;
    worst = std::max(worst, c.worst);
    failures += c.failures;
    if (c.failures && detail.empty()) detail = "; " + c.evaluator + " fails at " + c.first_failure;
  }
  return {failures == 0 && evaluators == 8,
          std::to_string(evaluators) + " evaluators x 100 points, worst relative error " + fmt(worst, 3) + detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equality battery", oracle_equality},
      {"engine matches exact pmf (TV)", engine_vs_oracle},
      {"threshold guarantee and decomposition", threshold_guarantee},
      {"desk-scale max load at n=1e6", desk_scale},
      {"separation two-choices < threshold < one-choice", separation},
      {"tail above (2+eta)L dominated", prop41_domination},
      {"poissonization comparison", poissonization},
      {"subset level and saturation bounds dominate", lemma_domination},
      {"rejection count near expectation", rejections},
      {"output independent of worker count", cli_determinism},
      {"bounds match 50-digit reference", bounds_cross_validation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
