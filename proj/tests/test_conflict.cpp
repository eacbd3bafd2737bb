#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spice/conflict.hpp"

using namespace spice;

TEST(Conflict, Examples) {
  const Eigen::Vector2d ex(1, 0), ey(0, 1);
  EXPECT_NEAR(conflict(-ex, ex), 1.0, 1e-7);
  EXPECT_EQ(conflict(ey, ex), 0.0);
  EXPECT_EQ(conflict(ex, ex), 0.0);
  EXPECT_NEAR(align(-ex, ex), -1.0, 1e-7);
  EXPECT_EQ(conflict(ex, Eigen::Vector2d::Zero()), 0.0);
  EXPECT_EQ(align(Eigen::Vector2d::Zero(), ex), 0.0);
  EXPECT_NEAR(conflict(Eigen::Vector2d(-1, 1), ex), 1.0 / std::sqrt(2.0), 1e-7);
}

TEST(Conflict, MeanGradient) {
  FisherState s(2, ScalingParams(1.0), Backend::dense);
  EXPECT_EQ(mean_gradient(s), Eigen::Vector2d::Zero());
  s.add_sample(0, Eigen::Vector2d(1, 0));
  s.add_sample(1, Eigen::Vector2d(0, 3));
  EXPECT_TRUE(mean_gradient(s).isApprox(Eigen::Vector2d(0.5, 1.5)));
}

TEST(Conflict, RangeAndScaleInvariance) {
  std::mt19937 gen(8);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int t = 0; t < 500; ++t) {
    Eigen::VectorXd g(6), m(6);
    for (int i = 0; i < 6; ++i) {
      g(i) = nd(gen);
      m(i) = nd(gen);
    }
    const double c = conflict(g, m);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
    const double a = scale(gen), b = scale(gen);
    EXPECT_NEAR(conflict(a * g, b * m), c, 1e-6);
    // Sign: conflict is positive exactly when the dot product is negative.
    EXPECT_EQ(c > 0.0, g.dot(m) < 0.0);
    // Oracle: naive cosine.
    const double cosine = oracle::dot(oracle::Vec(g.data(), g.data() + 6), oracle::Vec(m.data(), m.data() + 6)) /
                          (g.norm() * m.norm());
    EXPECT_NEAR(c, std::max(0.0, -cosine), 1e-7);
  }
}

TEST(Conflict, InteractionSum) {
  RowMatrix members(2, 2);
  members << 1, 0, 1, 1;
  EXPECT_NEAR(interaction_sum(Eigen::Vector2d(2, 3), members), 4.0 + 25.0, 1e-12);
  EXPECT_EQ(interaction_sum(Eigen::Vector2d(2, 3), RowMatrix(0, 2)), 0.0);
}
