#include <gtest/gtest.h>

#include "thinlab/strategy.hpp"

using namespace thinlab;

TEST(Decide, ThresholdBelowAndAt) {
  ProcessState s(2);
  const auto rule = ThinningRule::threshold(4);
  s.primary_suggested[0] = 3;
  EXPECT_EQ(decide(rule, s, 0), Decision::accept);
  s.primary_suggested[0] = 4;
  EXPECT_EQ(decide(rule, s, 0), Decision::reject);
}

TEST(Decide, AlwaysAcceptAndReject) {
  ProcessState s(3);
  s.primary_suggested = {100, 0, 7};
  for (bin_t b = 0; b < 3; ++b) {
    EXPECT_EQ(ThinningRule::always_accept().decide(s, b), Decision::accept);
    EXPECT_EQ(ThinningRule::always_reject().decide(s, b), Decision::reject);
  }
}

TEST(Decide, IgnoresLoadsOnlySuggestions) {
  ProcessState s(2);
  s.load = {50, 0};
  EXPECT_EQ(ThinningRule::threshold(1).decide(s, 0), Decision::accept);
}

TEST(DefaultThresholdSpec, Values) {
  EXPECT_EQ(default_threshold_spec(1'000'000).ell(), 4u);
  EXPECT_EQ(default_threshold_spec(100).ell(), 3u);
  EXPECT_EQ(default_threshold_spec(3).ell(), 5u);
  EXPECT_THROW(default_threshold_spec(2), config_error);
}

TEST(TwoChoices, PicksLessLoaded) {
  ProcessState s(2);
  s.load = {2, 1};
  EXPECT_EQ(two_choices_decide(s, 0, 1), 1u);
  s.load = {1, 1};
  EXPECT_EQ(two_choices_decide(s, 0, 1), 0u);
  s.load = {0, 3};
  EXPECT_EQ(two_choices_decide(s, 0, 1), 0u);
}

TEST(ThinningRule, Validation) {
  EXPECT_THROW(ThinningRule::threshold(0), config_error);
  EXPECT_THROW(ThinningRule::threshold(std::numeric_limits<count_t>::max()), config_error);
  EXPECT_THROW(ThinningRule::threshold(2, 0), config_error);
}

TEST(ParseStrategy, Grammar) {
  EXPECT_EQ(parse_strategy("threshold:4"), StrategySpec(ThinningRule::threshold(4)));
  EXPECT_EQ(parse_strategy("threshold:auto", 1'000'000), StrategySpec(ThinningRule::threshold(4)));
  EXPECT_EQ(parse_strategy("threshold:4,k=2"), StrategySpec(ThinningRule::threshold(4, 2)));
  EXPECT_EQ(parse_strategy("one-choice").kind(), StrategySpec::Kind::always_accept);
  EXPECT_EQ(parse_strategy("always-reject").kind(), StrategySpec::Kind::always_reject);
  const auto two = parse_strategy("two-choices");
  EXPECT_EQ(two.kind(), StrategySpec::Kind::two_choices_greedy);
  EXPECT_FALSE(two.is_thinning());
  EXPECT_EQ(two.thinning(), nullptr);
}

TEST(ParseStrategy, Errors) {
  for (const char* bad : {"", "threshold", "threshold:", "threshold:0", "threshold:-1", "threshold:x",
                          "threshold:4,j=2", "threshold:4,k=0", "threshold:auto", "greedy", "threshold:4 "})
    EXPECT_THROW(parse_strategy(bad, 2), config_error) << bad;
}

TEST(ParseStrategy, CanonicalTextRoundTrips) {
  for (const char* text : {"threshold:1", "threshold:17", "threshold:3,k=5", "one-choice", "always-reject",
                           "two-choices"}) {
    const auto spec = parse_strategy(text);
    EXPECT_EQ(spec.to_string(), text);
    EXPECT_EQ(parse_strategy(spec.to_string()), spec);
  }
}

// A thinning rule must never be constructible from the two-choices baseline.
static_assert(!std::is_convertible_v<TwoChoicesGreedy, ThinningRule>);
static_assert(!std::is_invocable_v<decltype(&ThinningRule::decide), const ThinningRule&,
                                   const ProcessState&, bin_t, bin_t>);
