#include "dtl/divergence.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace dtl {
namespace {

TEST(Perturb, ZeroSigmaIsIdentity) {
  const auto t = default_target_model(32, 4, 1);
  const auto s = perturb_model(t, {0.0, 5});
  for (std::size_t i = 0; i < t.features(); ++i) {
    for (std::size_t j = 0; j < t.classes(); ++j) {
      for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(s.cpt(i, j, k), t.cpt(i, j, k), 1e-12);
    }
  }
  const NaiveBayesModel multi({0.4, 0.6}, {{{0.2, 0.3, 0.5}, {0.6, 0.3, 0.1}}});
  const auto ms = perturb_model(multi, {0.0, 1});
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(ms.cpt(0, j, k), multi.cpt(0, j, k), 1e-12);
  }
}

TEST(Perturb, PriorCopiedExactlyAndDeterministic) {
  const auto t = default_target_model(16, 4, 2);
  const auto s = perturb_model(t, {1.0, 3});
  EXPECT_EQ(s.prior(), t.prior());
  EXPECT_EQ(perturb_model(t, {1.0, 3}), s);
  EXPECT_FALSE(perturb_model(t, {1.0, 4}) == s);
  EXPECT_THROW(perturb_model(t, {-0.1, 3}), std::invalid_argument);
}

TEST(Perturb, CellAtOneRejected) {
  // A single-level feature has every cell at exactly 1.
  const NaiveBayesModel m({0.5, 0.5}, {{{1.0}, {1.0}}});
  EXPECT_THROW(perturb_model(m, {0.5, 0}), ModelError);
}

TEST(Kl, SelfIsZeroAndGibbs) {
  const auto t = default_target_model(16, 4, 3);
  EXPECT_EQ(kl_factorized(t, t), 0.0);
  EXPECT_EQ(kl_joint_bruteforce(default_target_model(4, 2, 1), default_target_model(4, 2, 1)), 0.0);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = perturb_model(t, {0.5, seed});
    EXPECT_GT(kl_factorized(s, t), 0.0);
  }
}

TEST(Kl, TwoTermArithmetic) {
  const NaiveBayesModel p({1.0}, {{{0.2, 0.8}}});
  const NaiveBayesModel q({1.0}, {{{0.5, 0.5}}});
  const double expect = 0.8 * std::log(0.8 / 0.5) + 0.2 * std::log(0.2 / 0.5);
  EXPECT_NEAR(kl_factorized(p, q), expect, 1e-15);
  EXPECT_NEAR(kl_joint_bruteforce(p, q), expect, 1e-15);
  EXPECT_NEAR(expect, 0.19274, 5e-6);
}

TEST(Kl, FactorizedMatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = default_target_model(3, 2, seed);
    const auto s = perturb_model(t, {1.0, seed + 100});
    EXPECT_NEAR(kl_factorized(s, t), kl_joint_bruteforce(s, t), 1e-10);
  }
  // Non-binary arities too.
  const NaiveBayesModel t({0.3, 0.3, 0.4}, {{{0.2, 0.3, 0.5}, {0.6, 0.3, 0.1}, {0.3, 0.3, 0.4}},
                                            {{0.7, 0.3}, {0.1, 0.9}, {0.5, 0.5}}});
  const auto s = perturb_model(t, {0.8, 1});
  EXPECT_NEAR(kl_factorized(s, t), kl_joint_bruteforce(s, t), 1e-10);
}

TEST(Kl, StructureMismatchAndGuard) {
  const auto a = default_target_model(4, 2, 0);
  EXPECT_THROW(kl_factorized(a, default_target_model(5, 2, 0)), ModelError);
  EXPECT_THROW(kl_factorized(a, default_target_model(4, 3, 0)), ModelError);
  EXPECT_THROW(kl_factorized(a, default_target_model(4, 2, 1)), ModelError);  // priors differ
  EXPECT_THROW(kl_joint_bruteforce(default_target_model(30, 2, 0), default_target_model(30, 2, 0)),
               std::invalid_argument);
}

TEST(Kl, GrowsWithSigmaOnAverage) {
  const auto t = default_target_model(16, 4, 0);
  double previous = -1;
  for (double sigma : {0.01, 0.5, 1.0, 2.0}) {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) total += kl_factorized(perturb_model(t, {sigma, seed}), t);
    EXPECT_GE(total / 20, previous) << "sigma " << sigma;
    previous = total / 20;
  }
}

TEST(Lambda, Schedules) {
  EXPECT_EQ(resolve_lambda(LambdaSchedule::bounded(1.0), 0.0), 0.0);
  EXPECT_NEAR(resolve_lambda(LambdaSchedule::bounded(2.0), std::log(2.0)), 1.0, 1e-12);
  EXPECT_EQ(resolve_lambda(LambdaSchedule::kl_direct(), 3.0), 3.0);
  EXPECT_EQ(resolve_lambda(LambdaSchedule::fixed(0.25), 9.0), 0.25);
  EXPECT_THROW(LambdaSchedule::fixed(-1), std::invalid_argument);
  EXPECT_THROW(LambdaSchedule::bounded(0), std::invalid_argument);
  EXPECT_THROW(resolve_lambda(LambdaSchedule::kl_direct(), -1), std::invalid_argument);
}

TEST(Lambda, BoundedMonotoneAndCapped) {
  const auto s = LambdaSchedule::bounded(1.5);
  double previous = 0;
  for (double kl = 0; kl < 50; kl += 0.25) {
    const double l = resolve_lambda(s, kl);
    EXPECT_GE(l, previous);
    EXPECT_LE(l, 1.5);
    previous = l;
  }
}

TEST(Lambda, ParseRoundTrip) {
  for (const char* text : {"fixed:1", "fixed:0.5", "kl", "bounded:2"}) {
    EXPECT_EQ(LambdaSchedule::parse(text).to_string(), text);
  }
  EXPECT_EQ(LambdaSchedule::parse("bounded:2"), LambdaSchedule::bounded(2));
  EXPECT_THROW(LambdaSchedule::parse("fixed:"), std::invalid_argument);
  EXPECT_THROW(LambdaSchedule::parse("cosine"), std::invalid_argument);
}

}  // namespace
}  // namespace dtl
