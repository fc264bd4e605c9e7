#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "thinlab/bounds.hpp"
#include "thinlab/engine.hpp"
#include "thinlab/error.hpp"
#include "thinlab/strategy.hpp"

namespace thinlab {

/// Non-negative rational load factor. Kept exact so ⌊ρn⌋ never depends on
/// floating-point rounding.
struct Ratio {
  std::uint64_t num = 1;
  std::uint64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }

  /// ⌊ρ·n⌋ in exact integer arithmetic.
  std::uint64_t floor_times(std::uint64_t n) const {
    const __uint128_t prod = static_cast<__uint128_t>(num) * n / den;
    if (prod > std::numeric_limits<std::uint64_t>::max()) throw config_error("rho * n overflows");
    return static_cast<std::uint64_t>(prod);
  }

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Parses "p/q", an integer, or a plain decimal such as "1.25". A decimal is
/// read as the exact fraction its digits denote (1.25 = 125/100); no binary
/// floating point is involved.
inline Ratio parse_ratio(std::string_view text) {
  auto parse_u64 = [&](std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
      throw config_error("bad rho '" + std::string(text) + "'");
    return v;
  };
  Ratio r;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    r.num = parse_u64(text.substr(0, slash));
    r.den = parse_u64(text.substr(slash + 1));
  } else if (auto dot = text.find('.'); dot != std::string_view::npos) {
    const auto whole = text.substr(0, dot);
    const auto frac = text.substr(dot + 1);
    if (frac.size() > 18) throw config_error("rho has too many decimal places");
    std::uint64_t scale = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
    const std::uint64_t w = whole.empty() ? 0 : parse_u64(whole);
    const std::uint64_t f = frac.empty() ? 0 : parse_u64(frac);
    if (w > (std::numeric_limits<std::uint64_t>::max() - f) / scale)
      throw config_error("rho too large");
    r.num = w * scale + f;
    r.den = scale;
  } else {
    r.num = parse_u64(text);
    r.den = 1;
  }
  if (r.den == 0) throw config_error("rho denominator is zero");
  const auto g = std::gcd(r.num, r.den);
  if (g > 1) { r.num /= g; r.den /= g; }
  return r;
}

struct ExperimentConfig {
  std::uint64_t n = 0;
  std::optional<Ratio> rho;        ///< t = ⌊ρn⌋ ...
  std::optional<std::uint64_t> t;  ///< ... or explicit t (exactly one is set)
  std::string strategy = "one-choice";
  std::uint64_t trials = 1;
  std::uint64_t base_seed = 0;
  unsigned workers = 1;
  /// Refuse campaigns with n·trials above this.
  double max_bin_trials = 1e11;

  std::uint64_t balls() const {
    if (rho.has_value() == t.has_value()) throw config_error("set exactly one of rho and t");
    return t ? *t : rho->floor_times(n);
  }

  StrategySpec strategy_spec() const { return parse_strategy(strategy, n); }

  void validate() const {
    if (n == 0) throw config_error("n must be at least 1");
    if (trials == 0) throw config_error("trials must be at least 1");
    (void)balls();
    (void)strategy_spec();
    if (static_cast<double>(n) * static_cast<double>(trials) > max_bin_trials)
      throw size_guard_error("n*trials = " + std::to_string(static_cast<double>(n) * trials) +
                             " exceeds the configured budget");
  }
};

/// Seed of trial `index` of a campaign.
constexpr std::uint64_t trial_seed(std::uint64_t base_seed, std::uint64_t index) noexcept {
  return derive_seed(base_seed, index);
}

/// Runs every trial of `config` and returns `fn(state, trial_index, seed)` for
/// each, in trial order regardless of the worker count. Each worker owns and
/// reuses one ProcessState.
template <typename Fn>
auto map_trials(const ExperimentConfig& config, Fn&& fn) {
  config.validate();
  using R = std::invoke_result_t<Fn&, const ProcessState&, std::uint64_t, std::uint64_t>;
  const auto spec = config.strategy_spec();
  const std::uint64_t balls = config.balls();
  std::vector<R> out(config.trials);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    ProcessState state;
    try {
      for (std::uint64_t i = next++; i < config.trials; i = next++) {
        const auto seed = trial_seed(config.base_seed, i);
        run_state_into(state, config.n, balls, spec, seed);
        out[i] = fn(std::as_const(state), i, seed);
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = config.trials;
    }
  };

  const unsigned workers =
      static_cast<unsigned>(std::clamp<std::uint64_t>(config.workers, 1, config.trials));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// Type-1 (inverse ECDF) quantile of sorted data: the smallest x with
/// F(x) >= q.
template <typename T>
T quantile_type1(const std::vector<T>& sorted, double q) {
  if (sorted.empty()) throw domain_error("quantile of empty data");
  if (q <= 0.0) return sorted.front();
  // the epsilon keeps q·N from landing one rank high on representation error
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()) - 1e-9));
  return sorted[std::min(sorted.size(), std::max<std::size_t>(k, 1)) - 1];
}

struct SummaryStats {
  std::uint64_t n = 0;
  std::uint64_t t = 0;
  std::string strategy;
  std::vector<std::uint64_t> seeds;
  std::vector<std::uint64_t> per_trial_maxload;
  std::vector<std::uint64_t> per_trial_rejections;
  double mean = 0.0;
  std::uint64_t median = 0;
  std::uint64_t p50 = 0;
  std::uint64_t p90 = 0;
  std::uint64_t p99 = 0;
  std::uint64_t min = 0;
  std::uint64_t max = 0;
  double mean_rejections = 0.0;
  std::optional<double> target;            ///< target_maxload(n), n >= 3
  std::optional<double> normalized_ratio;  ///< median / target

  friend bool operator==(const SummaryStats&, const SummaryStats&) = default;
};

struct TrialOutcome {
  std::uint64_t seed = 0;
  std::uint64_t maxload = 0;
  std::uint64_t rejections = 0;
};

inline SummaryStats summarize(const ExperimentConfig& config, const std::vector<TrialOutcome>& trials) {
  SummaryStats s;
  s.n = config.n;
  s.t = config.balls();
  s.strategy = config.strategy_spec().to_string();
  for (const auto& o : trials) {
    s.seeds.push_back(o.seed);
    s.per_trial_maxload.push_back(o.maxload);
    s.per_trial_rejections.push_back(o.rejections);
  }
  auto sorted = s.per_trial_maxload;
  std::sort(sorted.begin(), sorted.end());
  const auto count = static_cast<double>(sorted.size());
  s.mean = static_cast<double>(std::accumulate(sorted.begin(), sorted.end(), std::uint64_t{0})) / count;
  s.mean_rejections = static_cast<double>(std::accumulate(s.per_trial_rejections.begin(),
                                                          s.per_trial_rejections.end(),
                                                          std::uint64_t{0})) / count;
  s.p50 = quantile_type1(sorted, 0.5);
  s.median = s.p50;
  s.p90 = quantile_type1(sorted, 0.9);
  s.p99 = quantile_type1(sorted, 0.99);
  s.min = sorted.front();
  s.max = sorted.back();
  if (config.n >= 3) {
    s.target = target_maxload(config.n);
    s.normalized_ratio = static_cast<double>(s.median) / *s.target;
  }
  return s;
}

/// Monte Carlo campaign. Output depends on the config only, not on workers.
inline SummaryStats run_trials(const ExperimentConfig& config) {
  auto outcomes = map_trials(config, [](const ProcessState& s, std::uint64_t, std::uint64_t seed) {
    return TrialOutcome{seed, max_load(s), s.rejections};
  });
  return summarize(config, outcomes);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline constexpr double kZ95 = 1.959963984540054;

/// Wilson score interval for `successes` out of `trials`.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = kZ95) {
  if (trials == 0) throw domain_error("wilson interval needs trials >= 1");
  const double nn = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return {successes == 0 ? 0.0 : std::max(0.0, center - half),
          successes == trials ? 1.0 : std::min(1.0, center + half)};
}

struct TailEstimate {
  std::uint64_t level = 0;
  std::uint64_t exceed = 0;
  std::uint64_t trials = 0;
  double p_hat = 0.0;
  Interval ci95;
};

inline TailEstimate tail_from_maxloads(const std::vector<std::uint64_t>& maxloads, std::uint64_t level) {
  TailEstimate e;
  e.level = level;
  e.trials = maxloads.size();
  e.exceed = static_cast<std::uint64_t>(
      std::count_if(maxloads.begin(), maxloads.end(), [&](std::uint64_t m) { return m > level; }));
  e.p_hat = static_cast<double>(e.exceed) / static_cast<double>(e.trials);
  e.ci95 = wilson_interval(e.exceed, e.trials);
  return e;
}

/// Empirical P(max load > level) with a 95% Wilson interval.
inline TailEstimate tail_estimate(const ExperimentConfig& config, std::uint64_t level) {
  if (config.trials < 100) throw config_error("tail_estimate needs at least 100 trials");
  return tail_from_maxloads(run_trials(config).per_trial_maxload, level);
}

struct ScalingRow {
  std::uint64_t n = 0;
  double target = 0.0;
  std::uint64_t median_maxload = 0;
  double ratio = 0.0;
  std::uint64_t trials = 0;
  std::string strategy;  ///< resolved strategy at this n
};

/// One campaign per grid point, all with the same base seed.
inline std::vector<ScalingRow> scaling_study(const std::vector<std::uint64_t>& n_grid, Ratio rho,
                                             const std::string& strategy, std::uint64_t trials,
                                             std::uint64_t base_seed, unsigned workers = 1) {
  if (!std::is_sorted(n_grid.begin(), n_grid.end())) throw config_error("n grid must be ascending");
  std::vector<ScalingRow> rows;
  for (auto n : n_grid) {
    ExperimentConfig c;
    c.n = n;
    c.rho = rho;
    c.strategy = strategy;
    c.trials = trials;
    c.base_seed = base_seed;
    c.workers = workers;
    const auto s = run_trials(c);
    ScalingRow r;
    r.n = n;
    r.target = target_maxload(n);
    r.median_maxload = s.median;
    r.ratio = static_cast<double>(s.median) / r.target;
    r.trials = trials;
    r.strategy = s.strategy;
    rows.push_back(r);
  }
  return rows;
}

struct StageRow {
  unsigned k = 0;
  std::uint64_t ball = 0;        ///< k·w
  std::uint64_t s_size = 0;      ///< |S_k|, bins with >= k primary suggestions by ball k·w
  double threshold = 0.0;        ///< n·ζ^k
  bool e = false;                ///< |S_k| < n·ζ^k
  std::uint64_t maxload = 0;     ///< max load by ball k·w
  bool f = false;                ///< maxload < (2−ε)ℓ
};

struct StageDiagnostics {
  StageParams params;
  double epsilon = 0.0;
  double rho = 0.0;
  std::uint64_t s0_size = 0;           ///< |S_0| = n
  std::vector<StageRow> per_stage;     ///< k = 1..s
  std::uint64_t uninspected_balls = 0; ///< balls after s·w
};

/// Observes the stage decomposition of the lower-bound argument on a trace.
/// S_k is read from primary suggestions (A), accepted or not.
inline StageDiagnostics stage_diagnostics(const Trace& trace, double rho, double epsilon) {
  const auto n = trace.params.n;
  StageDiagnostics d;
  d.params = stage_params(n, rho, epsilon);
  d.epsilon = epsilon;
  d.rho = rho;
  d.s0_size = n;
  const auto& p = d.params;
  const std::uint64_t need = static_cast<std::uint64_t>(p.s) * p.w;
  if (trace.records.size() < need)
    throw config_error("stage diagnostics need a trace of at least s*w = " + std::to_string(need) +
                       " balls, got " + std::to_string(trace.records.size()));
  const double load_bar = (2.0 - epsilon) * p.ell;
  std::vector<count_t> suggested(n, 0), load(n, 0);
  count_t maxload = 0;
  std::uint64_t ball = 0;
  for (unsigned k = 1; k <= p.s; ++k) {
    const std::uint64_t end = static_cast<std::uint64_t>(k) * p.w;
    for (; ball < end; ++ball) {
      const auto& r = trace.records[ball];
      ++suggested[r.primary];
      maxload = std::max(maxload, ++load[r.final_bin]);
    }
    StageRow row;
    row.k = k;
    row.ball = end;
    row.s_size = static_cast<std::uint64_t>(
        std::count_if(suggested.begin(), suggested.end(), [&](count_t a) { return a >= k; }));
    row.threshold = static_cast<double>(n) * std::pow(p.zeta, k);
    row.e = static_cast<double>(row.s_size) < row.threshold;
    row.maxload = maxload;
    row.f = static_cast<double>(maxload) < load_bar;
    d.per_stage.push_back(row);
  }
  d.uninspected_balls = trace.records.size() - need;
  return d;
}

struct RejectionStats {
  std::uint64_t total_rejections = 0;
  double budget = 0.0;  ///< 2n / L!
  double ratio = 0.0;   ///< total / budget
};

inline RejectionStats rejection_stats(const ProcessState& s) {
  RejectionStats r;
  r.total_rejections = s.rejections;
  r.budget = rejection_budget(s.n);
  r.ratio = static_cast<double>(s.rejections) / r.budget;
  return r;
}

inline RejectionStats rejection_stats(const Trace& trace) { return rejection_stats(trace.final_state); }

}  // namespace thinlab
