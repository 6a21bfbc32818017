#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "et2q/growth.hpp"
#include "support.hpp"

using namespace et2q;
using et2q::testing::random_gmm;
using et2q::testing::random_rule;
using et2q::testing::uniform;

TEST(JumpGrid, Values) {
  EXPECT_DOUBLE_EQ(jump_grid(0.8, 1)(0), 0.8);
  const auto g = jump_grid(1.0, 3);
  EXPECT_DOUBLE_EQ(g(0), 0.5);
  EXPECT_DOUBLE_EQ(g(1), 1.0);
  EXPECT_DOUBLE_EQ(g(2), 1.5);
  EXPECT_THROW(jump_grid(1.0, 0), std::invalid_argument);
}

TEST(FirstRule, WidthsFromMixedVariance) {
  const auto gmm = GmmDensity::single(Eigen::Vector2d(0, 0), Eigen::Vector2d(4.0, 1.0));
  const auto r = make_first_rule(Eigen::Vector2d(0.3, -0.2), gmm, 2, 3, 0.7);
  EXPECT_EQ(r.mean, Eigen::VectorXd(Eigen::Vector2d(0.3, -0.2)));
  // Feature 0: sigma_upper = 2, sigma_lower = 1.4.
  EXPECT_NEAR(r.jumps.upper(0, 2), 3.0, 1e-15);
  for (int g = 0; g < 3; ++g) {
    EXPECT_NEAR(r.jumps.lower(0, g), 0.7 * r.jumps.upper(0, g), 1e-15);
  }
  EXPECT_NEAR(r.jumps.lower(0, 1), 1.4, 1e-15);
  // Feature 1: sigma_upper = 1.
  EXPECT_NEAR(r.jumps.upper(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(r.jumps.upper(1, 1), 1.0, 1e-15);
  EXPECT_NEAR(r.jumps.upper(1, 2), 1.5, 1e-15);
  EXPECT_TRUE(r.omega_upper.isZero());
  EXPECT_TRUE(r.omega_lower.isZero());
  EXPECT_EQ(r.omega_upper.rows(), 2);
}

TEST(FirstRule, SingleGradeIsTheWidth) {
  const auto gmm = GmmDensity::single(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.25));
  const auto r = make_first_rule(Eigen::VectorXd::Zero(1), gmm, 1, 1, 0.7);
  EXPECT_DOUBLE_EQ(r.jumps.upper(0, 0), 0.5);
}

TEST(HypotheticalRule, DistanceToMixedMean) {
  const auto gmm = GmmDensity::single(Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(1.0, 1.0));
  Rule winner(2, 1, 1);
  winner.omega_upper.setConstant(0.6);
  winner.omega_lower.setConstant(-0.4);
  const auto r = make_hypothetical_rule(Eigen::Vector2d(2.0, 3.0), gmm, winner, 1, 0.7);
  EXPECT_DOUBLE_EQ(r.jumps.upper(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.jumps.upper(1, 0), 2.0);
  EXPECT_NEAR(r.jumps.lower(0, 0), 0.7, 1e-15);
  EXPECT_NEAR(r.jumps.lower(1, 0), 1.4, 1e-15);
  EXPECT_EQ(r.omega_upper, winner.omega_upper);
  EXPECT_EQ(r.omega_lower, winner.omega_lower);
}

TEST(HypotheticalRule, ZeroDistanceIsFloored) {
  const auto gmm = GmmDensity::single(Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(1.0, 1.0));
  const Rule winner(2, 1, 2);
  const auto r = make_hypothetical_rule(Eigen::Vector2d(1.0, 1.0), gmm, winner, 2, 0.7);
  const auto expected = jump_grid(kWidthFloor, 2);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(r.jumps.upper.row(i), expected);
    EXPECT_EQ(r.jumps.lower.row(i), expected);
  }
}

namespace {

Rule unit_rule() {
  Rule r(1, 1, 1);
  r.jumps.upper(0, 0) = 1.0;
  r.jumps.lower(0, 0) = 1.0;
  r.omega_upper << 1.0, 0.0;
  r.omega_lower << 0.0, 1.0;
  return r;
}

}  // namespace

TEST(Significance, UnitExample) {
  const auto gmm = GmmDensity::single(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 0.5);
  const auto e = rule_significance(unit_rule(), gmm, q, q);
  EXPECT_NEAR(e.total, 2.6626707276007795, 1e-14);
  EXPECT_NEAR(e.e_left, e.e_right, 1e-15);
}

TEST(Significance, ZeroWeightsGiveZero) {
  Rule r = unit_rule();
  r.omega_upper.setZero();
  r.omega_lower.setZero();
  const auto gmm = GmmDensity::single(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1));
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 0.3);
  EXPECT_EQ(rule_significance(r, gmm, q, q).total, 0.0);
}

TEST(Significance, HomogeneousInWeights) {
  Rng rng(43);
  for (int t = 0; t < 100; ++t) {
    Rule r = random_rule(rng, 2, 2, 3);
    const auto gmm = random_gmm(rng, 2, 3);
    const Eigen::VectorXd ql = et2q::testing::uniform_vector(rng, 2, 0, 0.7);
    const Eigen::VectorXd qr = et2q::testing::uniform_vector(rng, 2, 0, 0.7);
    const double base = rule_significance(r, gmm, ql, qr).total;
    const double c = uniform(rng, 0.1, 5.0);
    r.omega_upper *= c;
    r.omega_lower *= c;
    EXPECT_NEAR(rule_significance(r, gmm, ql, qr).total, c * base, 1e-10 * std::max(1.0, c * base));
  }
}

TEST(Significance, CoreMatchesDirectFormula) {
  Rng rng(47);
  for (int t = 0; t < 50; ++t) {
    const auto gmm = random_gmm(rng, 2, 2);
    const Eigen::VectorXd m = et2q::testing::uniform_vector(rng, 2, -2, 2);
    const Eigen::VectorXd w = et2q::testing::uniform_vector(rng, 2, 0.1, 2);
    double sum = 0.0;
    for (int h = 0; h < 2; ++h) {
      double ex = 0.0;
      for (int i = 0; i < 2; ++i) {
        const double d = m(i) - gmm.means[static_cast<std::size_t>(h)](i);
        ex += d * d / (w(i) * w(i) / 2 + gmm.variances[static_cast<std::size_t>(h)](i));
      }
      sum += gmm.weights(h) * std::exp(-ex);
    }
    const double expected = std::sqrt(std::numbers::pi * w(0) * w(1) * sum);
    EXPECT_NEAR(significance_core(m, w, gmm), expected, 1e-13);
  }
}

TEST(GrowthCheck, Threshold) {
  SignificanceEstimate cand;
  SignificanceEstimate one;
  one.total = 1.0;
  const std::vector<SignificanceEstimate> existing{one};
  cand.total = 1.0;
  EXPECT_TRUE(growth_check(cand, existing, 0.65));
  cand.total = 0.0;
  EXPECT_FALSE(growth_check(cand, existing, 0.65));
  cand.total = 0.64;
  EXPECT_FALSE(growth_check(cand, existing, 0.65));
  cand.total = 0.65;
  EXPECT_TRUE(growth_check(cand, existing, 0.65));
  EXPECT_THROW(growth_check(cand, existing, 0.0), std::invalid_argument);
  EXPECT_THROW(growth_check(cand, existing, 1.5), std::invalid_argument);
}

TEST(GrowthCheck, MonotoneInVigilance) {
  Rng rng(53);
  for (int t = 0; t < 500; ++t) {
    SignificanceEstimate cand;
    cand.total = uniform(rng, 0, 2);
    std::vector<SignificanceEstimate> existing(static_cast<std::size_t>(et2q::testing::uniform_int(rng, 1, 5)));
    for (auto& e : existing) e.total = uniform(rng, 0, 1);
    const double lo = uniform(rng, 1e-6, 1);
    const double hi = uniform(rng, lo, 1);
    // Admitted at the stricter threshold implies admitted at the looser one.
    if (growth_check(cand, existing, hi)) EXPECT_TRUE(growth_check(cand, existing, lo));
    // Near-zero vigilance admits every candidate with positive significance.
    EXPECT_EQ(growth_check(cand, existing, 1e-300), cand.total > 0.0);
  }
}
