#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spice/error.hpp"
#include "spice/fisher_core.hpp"

using namespace spice;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  std::size_t i = 0;
  for (const double x : v) out[static_cast<Eigen::Index>(i++)] = x;
  return out;
}

const ScalingParams kOne(1.0);

}  // namespace

TEST(FisherCore, NewState) {
  FisherState dense(3, kOne, Backend::dense);
  EXPECT_EQ(dense.logdet(), 0.0);
  EXPECT_TRUE(dense.cholesky().isIdentity(0.0));
  FisherState diag(3, kOne, Backend::diagonal);
  EXPECT_EQ(diag.diagonal(), Vector::Ones(3));
  EXPECT_EQ(diag.logdet(), 0.0);
  try {
    ScalingParams bad(0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidAlpha);
  }
  EXPECT_THROW(ScalingParams(-1.0), Error);
}

TEST(FisherCore, QuadFormExamples) {
  FisherState s(3, kOne, Backend::dense);
  const Vector g = vec({1, 2, -2});
  EXPECT_DOUBLE_EQ(s.quad_form(g), 9.0);
  s.add_sample(0, vec({1, 0, 0}));
  EXPECT_NEAR(s.quad_form(vec({1, 0, 0})), 0.5, 1e-15);
  try {
    (void)s.quad_form(vec({1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(FisherCore, QuadFormMatchesExplicitInverse) {
  const auto gs = oracle::gaussian_set(12, 6, 7);
  const double alpha = 0.7;
  const std::vector<std::size_t> subset{0, 3, 4, 9, 11};
  const auto state = FisherState::from_subset(gs, subset, ScalingParams(alpha), Backend::dense);
  const auto inv = oracle::gauss_inverse(oracle::assemble_fisher(gs, subset, alpha));
  for (std::size_t x = 0; x < gs.n(); ++x) {
    const double expected = oracle::quad(inv, oracle::to_vec(gs, x));
    EXPECT_NEAR(state.quad_form(gs.row(x)), expected, 1e-9 * expected) << x;
  }
}

TEST(FisherCore, MarginalGainExamples) {
  FisherState dense(3, kOne, Backend::dense);
  EXPECT_NEAR(dense.marginal_gain(vec({1, 0, 0})), std::log(2.0), 1e-15);
  dense.add_sample(0, vec({1, 0, 0}));
  EXPECT_NEAR(dense.marginal_gain(vec({1, 0, 0})), std::log(1.5), 1e-15);

  FisherState diag(2, kOne, Backend::diagonal);
  EXPECT_NEAR(diag.marginal_gain(vec({1, 1})), 2.0 * std::log(2.0), 1e-15);
  FisherState dense2(2, kOne, Backend::dense);
  EXPECT_NEAR(dense2.marginal_gain(vec({1, 1})), std::log(3.0), 1e-15);
}

TEST(FisherCore, MarginalGainEqualsDeterminantDifference) {
  const auto gs = oracle::gaussian_set(8, 4, 21);
  const double alpha = 1.3;
  std::vector<std::size_t> subset{1, 2, 5};
  const auto state = FisherState::from_subset(gs, subset, ScalingParams(alpha), Backend::dense);
  const double before = oracle::utility(gs, subset, alpha);
  for (const std::size_t x : {0u, 3u, 4u, 6u, 7u}) {
    auto with = subset;
    with.push_back(x);
    const double expected = oracle::utility(gs, with, alpha) - before;
    EXPECT_NEAR(state.marginal_gain(gs.row(x)), expected, 1e-10);
  }
}

TEST(FisherCore, AddSampleExamples) {
  FisherState s(3, kOne, Backend::dense);
  s.add_sample(0, vec({1, 0, 0}));
  s.add_sample(1, vec({0, 1, 0}));
  EXPECT_NEAR(s.logdet(), 2.0 * std::log(2.0), 1e-15);

  FisherState t(3, kOne, Backend::dense);
  t.add_sample(0, vec({1, 0, 0}));
  t.add_sample(1, vec({1, 0, 0}));
  EXPECT_NEAR(t.logdet(), std::log(3.0), 1e-15);
  EXPECT_EQ(t.sum_g(), vec({2, 0, 0}));
  try {
    t.add_sample(1, vec({0, 0, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateIndex);
  }
}

TEST(FisherCore, IncrementalMatchesRebuild) {
  const auto gs = oracle::gaussian_set(50, 10, 99, 0.8);
  const double alpha = 0.9;
  FisherState s(gs.d(), ScalingParams(alpha), Backend::dense);
  std::vector<std::size_t> subset;
  for (std::size_t i = 0; i < 50; ++i) {
    const double gain = s.marginal_gain(gs.row(i));
    const double before = s.logdet();
    s.add_sample(i, gs.row(i));
    subset.push_back(i);
    EXPECT_NEAR(s.logdet() - before, gain, 1e-10);
    EXPECT_GE(s.logdet(), before);
    if (i % 7 == 6 || i == 49) EXPECT_NEAR(s.logdet(), oracle::utility(gs, subset, alpha), 1e-8) << i;
  }
  // Invariant: logdet is 2 * sum ln L_jj and L L^T reproduces the matrix.
  EXPECT_NEAR(s.logdet(), 2.0 * s.cholesky().diagonal().array().log().sum(), 1e-12);
  const auto explicit_m = oracle::assemble_fisher(gs, subset, alpha);
  const Eigen::MatrixXd llt = s.cholesky() * s.cholesky().transpose();
  for (std::size_t i = 0; i < gs.d(); ++i)
    for (std::size_t j = 0; j < gs.d(); ++j)
      EXPECT_NEAR(llt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), explicit_m[i][j], 1e-9);
}

TEST(FisherCore, IncrementalMatchesBatchProperty) {
  std::mt19937 gen(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 1 + gen() % 64;
    const std::size_t n = 1 + gen() % 64;
    const double alpha = std::uniform_real_distribution<double>(0.05, 3.0)(gen);
    const auto gs = oracle::gaussian_set(n, d, static_cast<unsigned>(gen()), 0.5);
    std::vector<std::size_t> subset(n);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
    const auto s = FisherState::from_subset(gs, subset, ScalingParams(alpha), Backend::dense);
    EXPECT_NEAR(s.logdet(), oracle::utility(gs, subset, alpha), 1e-8) << "d=" << d << " n=" << n;
  }
}

TEST(FisherCore, DiagonalBackendState) {
  FisherState s(2, ScalingParams(2.0), Backend::diagonal);
  s.add_sample(3, vec({1, -2}));
  EXPECT_EQ(s.diagonal(), vec({3, 9}));
  EXPECT_NEAR(s.logdet(), std::log(27.0), 1e-14);
  EXPECT_NEAR(s.quad_form(vec({3, 3})), 9.0 / 3 + 9.0 / 9, 1e-15);
  // Gain equals the diagonal-model log-det difference.
  const Vector g = vec({0.5, 1.5});
  const double gain = s.marginal_gain(g);
  const double before = s.logdet();
  s.add_sample(4, g);
  EXPECT_NEAR(s.logdet() - before, gain, 1e-14);
}

TEST(FisherCore, AxisAlignedBackendsAgree) {
  // Each sample lives on one coordinate, distinct per sample.
  const std::size_t d = 6;
  RowMatrix m = RowMatrix::Zero(6, d);
  const double scales[] = {0.3, 1.1, -2.0, 0.7, 1.9, -0.4};
  for (Eigen::Index i = 0; i < 6; ++i) m(i, i) = scales[i];
  const GradientSet gs(m);
  FisherState dense(d, ScalingParams(0.8), Backend::dense);
  FisherState diag(d, ScalingParams(0.8), Backend::diagonal);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t x = i; x < 6; ++x) {
      EXPECT_NEAR(dense.marginal_gain(gs.row(x)), diag.marginal_gain(gs.row(x)), 1e-12);
    }
    dense.add_sample(i, gs.row(i));
    diag.add_sample(i, gs.row(i));
    EXPECT_NEAR(dense.logdet(), diag.logdet(), 1e-12);
  }
}

TEST(FisherCore, QuadFormRangeAndOrthogonalComplement) {
  std::mt19937 gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 3 + gen() % 10;
    const std::size_t k = 1 + gen() % (d - 1);
    // Orthonormal basis from a QR of a random matrix: first k span S, rest complement.
    const auto raw = oracle::gaussian_set(d, d, static_cast<unsigned>(gen()));
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd(raw.data())).householderQ();
    FisherState s(d, ScalingParams(1.5), Backend::dense);
    for (std::size_t i = 0; i < k; ++i) s.add_sample(i, 2.0 * q.col(static_cast<Eigen::Index>(i)));
    for (std::size_t i = k; i < d; ++i) {
      const Vector g = 3.0 * q.col(static_cast<Eigen::Index>(i));
      EXPECT_NEAR(s.quad_form(g), g.squaredNorm(), 1e-12 * g.squaredNorm());
    }
    const auto probe = oracle::gaussian_set(5, d, static_cast<unsigned>(gen()));
    for (std::size_t p = 0; p < 5; ++p) {
      const double q2 = s.quad_form(probe.row(p));
      EXPECT_GE(q2, 0.0);
      EXPECT_LE(q2, probe.row(p).squaredNorm() * (1 + 1e-12));
      EXPECT_GE(s.marginal_gain(probe.row(p)), 0.0);
    }
  }
}

TEST(FisherCore, BatchGainsMatchSingle) {
  const auto gs = oracle::gaussian_set(20, 7, 4);
  for (const Backend b : {Backend::dense, Backend::diagonal}) {
    const auto s = FisherState::from_subset(gs, {0, 1, 2, 3}, ScalingParams(0.6), b);
    const Eigen::MatrixXd cols = gs.data().transpose();
    const Vector gains = s.marginal_gains(cols);
    for (std::size_t i = 0; i < gs.n(); ++i) {
      EXPECT_NEAR(gains[static_cast<Eigen::Index>(i)], s.marginal_gain(gs.row(i)), 1e-13);
    }
  }
}

TEST(FisherCore, AdaFisherTransform) {
  const auto gs = oracle::from_rows({{2, -3}, {1, 0}, {0, 0}});
  const auto t = adafisher_transform(gs);
  EXPECT_EQ(t.row(0), Eigen::Vector2d(4, -9));
  EXPECT_EQ(t.row(1), Eigen::Vector2d(1, 0));
  EXPECT_EQ(t.row(2), Eigen::Vector2d(0, 0));
}

TEST(FisherCore, SpectralNorm) {
  EXPECT_EQ(spectral_norm_fs(RowMatrix(0, 3)), 0.0);
  RowMatrix e1(1, 3);
  e1 << 1, 0, 0;
  EXPECT_NEAR(spectral_norm_fs(e1), 1.0, 1e-15);
  RowMatrix e12(2, 3);
  e12 << 1, 0, 0, 0, 1, 0;
  EXPECT_NEAR(spectral_norm_fs(e12), 1.0, 1e-15);

  const auto gs = oracle::gaussian_set(6, 5, 17);
  std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
  auto f = oracle::assemble_fisher(gs, all, 1.0);
  for (std::size_t i = 0; i < 5; ++i) f[i][i] -= 1.0;
  const double expected = oracle::power_iteration(f);
  EXPECT_NEAR(spectral_norm_fs(gs.data()), expected, 1e-8 * expected);
}
