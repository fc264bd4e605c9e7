#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <variant>

#include "thinlab/bounds.hpp"
#include "thinlab/error.hpp"
#include "thinlab/process.hpp"

namespace thinlab {

enum class Decision : std::uint8_t { accept, reject };

/// A two-thinning decision rule: sees the history and the primary suggestion
/// only. The secondary bin is never visible to it.
class ThinningRule {
 public:
  enum class Kind : std::uint8_t { threshold, always_accept, always_reject };

  static ThinningRule threshold(count_t ell, unsigned retry_budget = 1) {
    if (ell == 0) throw config_error("threshold strategy needs ell >= 1");
    if (ell == std::numeric_limits<count_t>::max())
      throw config_error("unbounded threshold: use one-choice (always accept) instead");
    if (retry_budget == 0) throw config_error("retry budget must be at least 1");
    return ThinningRule(Kind::threshold, ell, retry_budget);
  }
  static ThinningRule always_accept() { return ThinningRule(Kind::always_accept, 0, 1); }
  static ThinningRule always_reject() { return ThinningRule(Kind::always_reject, 0, 1); }

  Kind kind() const noexcept { return kind_; }
  count_t ell() const noexcept { return ell_; }
  unsigned retry_budget() const noexcept { return retry_budget_; }

  /// Pure function of the history and the suggested bin. The threshold rule
  /// compares the suggestion count before the current ball: the first `ell`
  /// primary suggestions to a bin are accepted, later ones rejected.
  Decision decide(const ProcessState& history, bin_t suggested) const noexcept {
    switch (kind_) {
      case Kind::threshold:
        return history.primary_suggested[suggested] >= ell_ ? Decision::reject
                                                            : Decision::accept;
      case Kind::always_reject: return Decision::reject;
      case Kind::always_accept: break;
    }
    return Decision::accept;
  }

  friend bool operator==(const ThinningRule&, const ThinningRule&) = default;

 private:
  ThinningRule(Kind k, count_t ell, unsigned budget) : kind_(k), ell_(ell), retry_budget_(budget) {}
  Kind kind_;
  count_t ell_;
  unsigned retry_budget_;
};

/// Classical two-choices baseline. Not a thinning strategy: it looks at both
/// bins before choosing.
struct TwoChoicesGreedy {
  /// Less loaded of the two bins; ties go to the primary.
  bin_t choose(const ProcessState& history, bin_t primary, bin_t secondary) const noexcept {
    return history.load[secondary] < history.load[primary] ? secondary : primary;
  }
  friend bool operator==(const TwoChoicesGreedy&, const TwoChoicesGreedy&) = default;
};

inline bin_t two_choices_decide(const ProcessState& history, bin_t primary, bin_t secondary) {
  return TwoChoicesGreedy{}.choose(history, primary, secondary);
}

/// Any strategy the engine can run.
class StrategySpec {
 public:
  enum class Kind : std::uint8_t { threshold, always_accept, always_reject, two_choices_greedy };

  StrategySpec(ThinningRule rule) : rule_(rule) {}  // NOLINT(google-explicit-constructor)
  StrategySpec(TwoChoicesGreedy g) : rule_(g) {}    // NOLINT(google-explicit-constructor)

  Kind kind() const noexcept {
    if (std::holds_alternative<TwoChoicesGreedy>(rule_)) return Kind::two_choices_greedy;
    switch (std::get<ThinningRule>(rule_).kind()) {
      case ThinningRule::Kind::threshold: return Kind::threshold;
      case ThinningRule::Kind::always_reject: return Kind::always_reject;
      case ThinningRule::Kind::always_accept: break;
    }
    return Kind::always_accept;
  }

  bool is_thinning() const noexcept { return std::holds_alternative<ThinningRule>(rule_); }
  const ThinningRule* thinning() const noexcept { return std::get_if<ThinningRule>(&rule_); }
  const std::variant<ThinningRule, TwoChoicesGreedy>& rule() const noexcept { return rule_; }

  count_t ell() const noexcept { return is_thinning() ? thinning()->ell() : 0; }
  unsigned retry_budget() const noexcept { return is_thinning() ? thinning()->retry_budget() : 1; }

  /// Canonical text form, parseable by parse_strategy.
  std::string to_string() const {
    switch (kind()) {
      case Kind::threshold: {
        std::string s = "threshold:" + std::to_string(ell());
        if (retry_budget() > 1) s += ",k=" + std::to_string(retry_budget());
        return s;
      }
      case Kind::always_reject: return "always-reject";
      case Kind::two_choices_greedy: return "two-choices";
      case Kind::always_accept: break;
    }
    return "one-choice";
  }

  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;

 private:
  std::variant<ThinningRule, TwoChoicesGreedy> rule_;
};

/// Free-function form of ThinningRule::decide.
inline Decision decide(const ThinningRule& rule, const ProcessState& history, bin_t suggested) {
  return rule.decide(history, suggested);
}

/// Threshold strategy with ell = ⌈√(2 ln n / ln ln n)⌉.
inline ThinningRule default_threshold_spec(std::uint64_t n) {
  if (n < 3) throw config_error("threshold:auto needs n >= 3, got " + std::to_string(n));
  return ThinningRule::threshold(threshold_L(n));
}

namespace detail {
inline std::uint64_t parse_positive(std::string_view text, std::string_view what) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || v == 0)
    throw config_error("bad " + std::string(what) + " '" + std::string(text) + "'");
  return v;
}
}  // namespace detail

/// Parses "threshold:4", "threshold:auto", "threshold:4,k=2", "one-choice",
/// "always-reject" or "two-choices". `n` resolves "auto".
inline StrategySpec parse_strategy(std::string_view text, std::uint64_t n = 0) {
  if (text == "one-choice" || text == "always-accept") return ThinningRule::always_accept();
  if (text == "always-reject") return ThinningRule::always_reject();
  if (text == "two-choices") return TwoChoicesGreedy{};

  constexpr std::string_view prefix = "threshold:";
  if (!text.starts_with(prefix)) throw config_error("unknown strategy '" + std::string(text) + "'");
  std::string_view body = text.substr(prefix.size());
  unsigned budget = 1;
  if (auto comma = body.find(','); comma != std::string_view::npos) {
    std::string_view opt = body.substr(comma + 1);
    if (!opt.starts_with("k="))
      throw config_error("unknown strategy option '" + std::string(opt) + "'");
    const auto k = detail::parse_positive(opt.substr(2), "retry budget");
    if (k > 64) throw config_error("retry budget above 64 not supported");
    budget = static_cast<unsigned>(k);
    body = body.substr(0, comma);
  }
  count_t ell = 0;
  if (body == "auto") {
    ell = default_threshold_spec(n).ell();
  } else {
    const auto v = detail::parse_positive(body, "threshold");
    if (v >= std::numeric_limits<count_t>::max())
      throw config_error("threshold too large; use one-choice");
    ell = static_cast<count_t>(v);
  }
  return ThinningRule::threshold(ell, budget);
}

}  // namespace thinlab
