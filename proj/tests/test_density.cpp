#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "et2q/density.hpp"
#include "support.hpp"

using namespace et2q;
using et2q::testing::random_gmm;
using et2q::testing::uniform;

TEST(GaussianKernel, Values) {
  const Eigen::Vector2d v(0.3, -1.0);
  EXPECT_DOUBLE_EQ(gaussian_kernel(v, v, Eigen::Vector2d(0.5, 2.0)), 1.0);
  Eigen::VectorXd x(1);
  Eigen::VectorXd m(1);
  Eigen::VectorXd s(1);
  x << 1.0;
  m << 0.0;
  s << 1.0;
  EXPECT_NEAR(gaussian_kernel(x, m, s), 0.36787944117144233, 1e-15);
}

TEST(GaussianKernel, FactorsOverDimensions) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd x = et2q::testing::uniform_vector(rng, 3, -2, 2);
    const Eigen::VectorXd v = et2q::testing::uniform_vector(rng, 3, -2, 2);
    const Eigen::VectorXd s = et2q::testing::uniform_vector(rng, 3, 0.1, 2);
    double prod = 1.0;
    for (int i = 0; i < 3; ++i) {
      prod *= gaussian_kernel(x.segment(i, 1), v.segment(i, 1), s.segment(i, 1));
    }
    EXPECT_NEAR(gaussian_kernel(x, v, s), prod, 1e-14);
  }
}

TEST(FitGmm, SingleComponentRecoversSampleMean) {
  Rng rng(17);
  SampleWindow w(50, 2);
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i < 50; ++i) {
    Eigen::Vector2d x(1.5 + 0.7 * standard_normal(rng), -2.0 + 0.3 * standard_normal(rng));
    w.push(x);
    xs.push_back(x);
    sum += x;
  }
  const Eigen::Vector2d mean = sum / 50.0;
  Eigen::Vector2d var = Eigen::Vector2d::Zero();
  for (const auto& x : xs) var += (x - mean).array().square().matrix();
  const Eigen::Vector2d sd = (var / 50.0).cwiseSqrt();
  const auto g = fit_gmm(w, 1, 0);
  ASSERT_EQ(g.component_count(), 1u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_LE(std::abs(g.means[0](i) - mean(i)), 3.0 * sd(i) / std::sqrt(50.0));
  }
}

TEST(FitGmm, IdenticalSamplesHitTheFloor) {
  SampleWindow w(20, 2);
  for (int i = 0; i < 20; ++i) w.push(Eigen::Vector2d(4.0, -1.0));
  for (std::size_t h : {1u, 3u}) {
    const auto g = fit_gmm(w, h, 1);
    for (std::size_t c = 0; c < g.component_count(); ++c) {
      EXPECT_NEAR(g.means[c](0), 4.0, 1e-12);
      EXPECT_NEAR(g.means[c](1), -1.0, 1e-12);
      EXPECT_DOUBLE_EQ(g.variances[c](0), kVarianceFloor);
      EXPECT_DOUBLE_EQ(g.variances[c](1), kVarianceFloor);
    }
  }
}

TEST(FitGmm, SeparatesTwoClusters) {
  Rng rng(23);
  SampleWindow w(60, 1);
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd x(1);
    x << (i % 2 ? 10.0 : 0.0) + standard_normal(rng);
    w.push(x);
  }
  const auto g = fit_gmm(w, 2, 5);
  ASSERT_EQ(g.component_count(), 2u);
  const double a = std::min(g.means[0](0), g.means[1](0));
  const double b = std::max(g.means[0](0), g.means[1](0));
  EXPECT_NEAR(a, 0.0, 1.0);
  EXPECT_NEAR(b, 10.0, 1.0);
}

TEST(FitGmm, LogLikelihoodNeverDecreases) {
  Rng rng(29);
  for (int t = 0; t < 20; ++t) {
    std::vector<Eigen::VectorXd> xs;
    for (int i = 0; i < 50; ++i) {
      Eigen::VectorXd x(2);
      x << uniform(rng, -3, 3) + (i % 3) * 2.0, standard_normal(rng);
      xs.push_back(x);
    }
    const auto fit = fit_gmm_traced(xs, 3, static_cast<std::uint64_t>(t));
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
      EXPECT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-9 * std::abs(fit.log_likelihood[i - 1]));
    }
    EXPECT_LE(fit.log_likelihood.size(), 50u);
    EXPECT_NO_THROW(fit.density.validate());
    EXPECT_NEAR(fit.density.weights.sum(), 1.0, 1e-12);
  }
}

TEST(FitGmm, SameSeedSameFit) {
  Rng rng(31);
  std::vector<Eigen::VectorXd> xs;
  for (int i = 0; i < 50; ++i) xs.push_back(et2q::testing::uniform_vector(rng, 2, -1, 1));
  const auto a = fit_gmm_traced(xs, 3, 9).density;
  const auto b = fit_gmm_traced(xs, 3, 9).density;
  EXPECT_EQ(a.weights, b.weights);
  for (std::size_t h = 0; h < 3; ++h) {
    EXPECT_EQ(a.means[h], b.means[h]);
    EXPECT_EQ(a.variances[h], b.variances[h]);
  }
}

TEST(MixedMoments, SimpleCases) {
  const auto one = GmmDensity::single(Eigen::Vector2d(1, 2), Eigen::Vector2d(0.5, 3));
  EXPECT_EQ(mixed_mean(one), Eigen::VectorXd(Eigen::Vector2d(1, 2)));
  EXPECT_EQ(mixed_variance(one), Eigen::VectorXd(Eigen::Vector2d(0.5, 3)));

  GmmDensity two;
  two.weights = Eigen::Vector2d(0.5, 0.5);
  two.means = {Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 2.0)};
  two.variances = {Eigen::VectorXd::Constant(1, 0.7), Eigen::VectorXd::Constant(1, 0.7)};
  EXPECT_DOUBLE_EQ(mixed_mean(two)(0), 1.0);
  EXPECT_DOUBLE_EQ(mixed_variance(two)(0), 0.7);
}

TEST(MixedMoments, MatchLoopOracle) {
  Rng rng(37);
  for (int t = 0; t < 50; ++t) {
    const auto g = random_gmm(rng, 3, 4);
    for (int i = 0; i < 3; ++i) {
      double m = 0.0;
      double v = 0.0;
      for (int h = 0; h < 4; ++h) {
        m += g.weights(h) * g.means[static_cast<std::size_t>(h)](i);
        v += g.weights(h) * g.variances[static_cast<std::size_t>(h)](i);
      }
      EXPECT_NEAR(mixed_mean(g)(i), m, 1e-14);
      EXPECT_NEAR(mixed_variance(g)(i), v, 1e-14);
    }
  }
}

TEST(SampleWindow, RingBufferAndRunningMoments) {
  SampleWindow w(3, 1);
  for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) {
    Eigen::VectorXd x(1);
    x << v;
    w.push(x);
  }
  EXPECT_EQ(w.size(), 3u);
  EXPECT_EQ(w.total_seen(), 5u);
  EXPECT_EQ(w.samples().front()(0), 3.0);
  EXPECT_NEAR(w.running_mean()(0), 3.0, 1e-15);
  EXPECT_NEAR(w.running_variance()(0), 2.0, 1e-14);  // population variance of 1..5
  EXPECT_THROW(w.push(Eigen::Vector2d(1, 2)), std::invalid_argument);
}

TEST(DensityTracker, RefitsEveryWindow) {
  DensityTracker d(10, 1, 2, 4);
  Rng rng(41);
  for (int i = 1; i <= 35; ++i) {
    Eigen::VectorXd x(1);
    x << standard_normal(rng) + (i % 2) * 6.0;
    d.observe(x);
    if (i < 10) {
      EXPECT_EQ(d.current().component_count(), 1u);
      EXPECT_EQ(d.refits(), 0u);
    } else {
      EXPECT_EQ(d.refits(), static_cast<std::uint64_t>(i / 10));
    }
  }
  EXPECT_EQ(d.current().component_count(), 2u);
}

TEST(GmmDensity, ValidateRejectsBadShapes) {
  GmmDensity g = GmmDensity::single(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1));
  g.variances[0](1) = -1.0;
  EXPECT_THROW(g.validate(), std::invalid_argument);
  GmmDensity empty;
  EXPECT_THROW(empty.validate(), std::invalid_argument);
}
