#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "reference_bounds.hpp"
#include "thinlab/bounds.hpp"

using namespace thinlab;

// Expected values below were evaluated with mpmath at 50 digits.

TEST(ThresholdL, Values) {
  EXPECT_EQ(threshold_L(1'000'000), 4u);
  EXPECT_EQ(threshold_L(3), 5u);
  EXPECT_EQ(threshold_L(100), 3u);
  EXPECT_THROW(threshold_L(2), domain_error);
}

TEST(LowerEll, Values) {
  EXPECT_EQ(lower_ell(1'000'000), 3u);
  EXPECT_EQ(lower_ell(100), 2u);
  EXPECT_THROW(lower_ell(1), domain_error);
  for (std::uint64_t n = 3; n < 100'000; ++n) {
    const auto d = threshold_L(n) - lower_ell(n);
    ASSERT_TRUE(d == 0 || d == 1) << n;
  }
}

TEST(Lemma22, Values) {
  EXPECT_NEAR(lemma22_bound(0.5, 2, 100), 0.020133990267062092, 1e-15);
  EXPECT_EQ(lemma22_bound(0.7, 3, 0), 2.0);
  EXPECT_EQ(lemma22_bound(0.0, 1, 1e6), 2.0);
  EXPECT_THROW(lemma22_bound(1.5, 2, 10), domain_error);
  EXPECT_THROW(lemma22_bound(0.5, 0, 10), domain_error);
}

TEST(Lemma23, Values) {
  const double e = std::numbers::e;
  EXPECT_NEAR(lemma23_bound(1.0, 2 * e * e), 0.73575888234288464, 1e-15);
  EXPECT_EQ(lemma23_bound(0.0, 1000), 2.0);
  EXPECT_NEAR(lemma23_bound(0.5, 1000) / 8.9972369076312339e-8, 1.0, 1e-12);
}

TEST(Prop41, Values) {
  const auto a = prop41_bound(1'000'000, 3);
  EXPECT_NEAR(a.value, 1.6325869198224127, 1e-12);
  EXPECT_NEAR(a.exponent, -0.014692280504180611, 1e-14);
  EXPECT_NEAR(prop41_bound(1'000'000, 4).value, 0.051626931448375209, 1e-14);
  EXPECT_THROW(prop41_bound(15, 1), domain_error);
  EXPECT_THROW(prop41_bound(100, 0), domain_error);
}

TEST(Prop41, DecreasingInEta) {
  for (std::uint64_t n : {16ULL, 1000ULL, 1'000'000ULL, 1'000'000'000'000ULL})
    for (double eta = 0.1; eta < 40; eta *= 1.5)
      EXPECT_GT(prop41_bound(n, eta).value, prop41_bound(n, eta * 1.5).value);
}

TEST(Prop51, Values) {
  EXPECT_NEAR(prop51_bound(1'000'000, 1.0) / 1.3088694199135065e-7, 1.0, 1e-12);
  EXPECT_NEAR(prop51_bound(1, 3.0), 0.36787944117144233, 1e-15);
  EXPECT_NEAR(prop51_bound(1'000'000, 0.5), 0.018665624561518921, 1e-15);
}

TEST(TargetMaxload, Values) {
  EXPECT_NEAR(target_maxload(1'000'000), 6.4878127923616821, 1e-13);
  EXPECT_NEAR(target_maxload(10'000), 5.7606883712290537, 1e-13);
  for (std::uint64_t n = 3; n < 1'000'000'000; n = n * 5 + 1)
    EXPECT_NEAR(target_maxload(n), 2 * std::sqrt(2 * std::log(n) / std::log(std::log(n))), 1e-13);
  EXPECT_THROW(target_maxload(2), domain_error);
}

TEST(StageParams, Values) {
  const auto a = stage_params(1'000'000, 1.0, 0.5);
  EXPECT_EQ(a.ell, 3u);
  EXPECT_EQ(a.s, 5u);
  EXPECT_EQ(a.w, 166667u);
  EXPECT_NEAR(a.zeta, 0.015328310048810097, 1e-16);
  const auto b = stage_params(100, 1.0, 1.0);
  EXPECT_EQ(b.ell, 2u);
  EXPECT_EQ(b.s, 2u);
  EXPECT_EQ(b.w, 25u);
  EXPECT_NEAR(b.zeta, 0.022992465073215145, 1e-16);
  EXPECT_THROW(stage_params(100, 1.0, 2.0), domain_error);
  EXPECT_THROW(stage_params(2, 1.0, 1.0), domain_error);
}

TEST(StageParams, StagesCoverLoad) {
  for (std::uint64_t n : {10ULL, 100ULL, 12345ULL, 1'000'000ULL})
    for (double rho : {0.25, 1.0, 3.0})
      for (double eps : {0.1, 0.5, 1.0, 1.9}) {
        const auto p = stage_params(n, rho, eps);
        EXPECT_GE(static_cast<double>(p.s) * p.w, (1 - eps / 2) * rho * n - p.w);
      }
}

TEST(RejectionBudget, Values) {
  EXPECT_NEAR(rejection_budget(1'000'000), 2e6 / 24, 1e-9);
  EXPECT_NEAR(rejection_budget(100), 200.0 / 6, 1e-12);
}

TEST(Factorial, ExactThenLogGamma) {
  EXPECT_EQ(factorial(0), 1.0);
  EXPECT_EQ(factorial(20), 2432902008176640000.0);
  EXPECT_NEAR(factorial(21) / 51090942171709440000.0, 1.0, 1e-13);
}

TEST(Clamp, ProbabilityRange) {
  EXPECT_EQ(clamp_probability(2.0), 1.0);
  EXPECT_EQ(clamp_probability(0.25), 0.25);
}

TEST(EvaluateBound, ReportsRawAndClamped) {
  BoundQuery q;
  q.n = 1'000'000;
  q.eta = 3;
  const auto r = evaluate_bound("prop41", q);
  EXPECT_GT(r.value, 1.0);
  ASSERT_TRUE(r.clamped.has_value());
  EXPECT_EQ(*r.clamped, 1.0);
  EXPECT_EQ(r.extras.at("L"), 4.0);
  EXPECT_THROW(evaluate_bound("nope", q), config_error);
  for (const char* name : kBoundNames) {
    BoundQuery all;
    all.n = 1000;
    all.theta = 0.5;
    all.a = 2;
    all.set_size = 10;
    all.eta = 1;
    all.epsilon = 0.5;
    EXPECT_NO_THROW(evaluate_bound(name, all)) << name;
  }
}

TEST(CrossValidation, MatchesFiftyDigitReference) {
  for (const auto& c : reference::cross_validate(100)) {
    EXPECT_EQ(c.points, 100) << c.evaluator;
    EXPECT_EQ(c.failures, 0) << c.evaluator << " first failure at " << c.first_failure << " worst " << c.worst;
  }
}
