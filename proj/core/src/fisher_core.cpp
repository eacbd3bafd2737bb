#include "spice/fisher_core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "spice/error.hpp"

namespace spice {
namespace {

constexpr double kCholeskyFloor = 1e-12;

}  // namespace

ScalingParams::ScalingParams(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidAlpha, "alpha must be a finite positive number, got " + std::to_string(alpha));
  }
}

FisherState::FisherState(std::size_t d, ScalingParams alpha, Backend backend)
    : dim_(d), alpha_(alpha), backend_(backend), sum_g_(Vector::Zero(static_cast<Eigen::Index>(d))) {
  if (d < 1) throw Error(ErrorCode::DimensionMismatch, "dimension must be >= 1");
  const auto n = static_cast<Eigen::Index>(d);
  if (backend_ == Backend::dense) {
    chol_ = Eigen::MatrixXd::Identity(n, n);
  } else {
    diag_ = Vector::Ones(n);
  }
}

FisherState FisherState::from_subset(const GradientSet& gs, const std::vector<std::size_t>& subset,
                                     ScalingParams alpha, Backend backend) {
  FisherState state(gs.d(), alpha, backend);
  for (const std::size_t i : subset) state.add_sample(i, gs.row(i));
  return state;
}

void FisherState::check_dim(const VectorRef& g) const {
  if (static_cast<std::size_t>(g.size()) != dim_) {
    throw Error(ErrorCode::DimensionMismatch,
                "gradient has dimension " + std::to_string(g.size()) + ", state has " + std::to_string(dim_));
  }
}

double FisherState::quad_form(const VectorRef& g) const {
  check_dim(g);
  if (backend_ == Backend::diagonal) {
    return (g.array().square() / diag_.array()).sum();
  }
  if (selected_.empty()) return g.squaredNorm();
  return chol_.triangularView<Eigen::Lower>().solve(g).squaredNorm();
}

double FisherState::marginal_gain(const VectorRef& g) const {
  if (backend_ == Backend::diagonal) {
    check_dim(g);
    const double a = alpha();
    double gain = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) gain += std::log1p(a * g[j] * g[j] / diag_[j]);
    return gain;
  }
  return std::log1p(alpha() * quad_form(g));
}

Vector FisherState::marginal_gains(const Eigen::MatrixXd& candidates) const {
  if (static_cast<std::size_t>(candidates.rows()) != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "candidate block has " + std::to_string(candidates.rows()) +
                                                  " rows, state has dimension " + std::to_string(dim_));
  }
  const double a = alpha();
  if (backend_ == Backend::diagonal) {
    const Eigen::ArrayXXd scaled = candidates.array().square().colwise() * (a / diag_.array());
    return scaled.log1p().colwise().sum().transpose().matrix();
  }
  if (selected_.empty()) {
    return (a * candidates.colwise().squaredNorm().array()).log1p().transpose().matrix();
  }
  Eigen::MatrixXd solved = candidates;
  chol_.triangularView<Eigen::Lower>().solveInPlace(solved);
  return (a * solved.colwise().squaredNorm().array()).log1p().transpose().matrix();
}

void FisherState::add_sample(std::size_t index, const VectorRef& g) {
  check_dim(g);
  if (std::find(selected_.begin(), selected_.end(), index) != selected_.end()) {
    throw Error(ErrorCode::DuplicateIndex, "sample " + std::to_string(index) + " is already selected");
  }
  const double a = alpha();
  if (backend_ == Backend::diagonal) {
    diag_.array() += a * g.array().square();
    logdet_ = diag_.array().log().sum();
  } else {
    // Positive rank-one update of L for the vector sqrt(alpha) * g.
    Vector x = std::sqrt(a) * g;
    const Eigen::Index n = chol_.rows();
    Eigen::MatrixXd updated = chol_;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (x[k] == 0.0 && x.tail(n - k).isZero(0.0)) break;
      const double lkk = updated(k, k);
      const double r = std::hypot(lkk, x[k]);
      if (!(r >= kCholeskyFloor) || !std::isfinite(r)) {
        throw Error(ErrorCode::NumericalBreakdown,
                    "Cholesky diagonal fell below 1e-12 at column " + std::to_string(k));
      }
      const double c = r / lkk;
      const double s = x[k] / lkk;
      updated(k, k) = r;
      if (k + 1 < n) {
        const Eigen::Index m = n - k - 1;
        auto col = updated.col(k).tail(m);
        auto rest = x.tail(m);
        col = (col + s * rest) / c;
        rest = c * rest - s * col;
      }
    }
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) logdet += std::log(updated(k, k));
    chol_ = std::move(updated);
    logdet_ = 2.0 * logdet;
  }
  sum_g_ += g;
  selected_.push_back(index);
}

GradientSet adafisher_transform(const GradientSet& gs) {
  RowMatrix data = gs.data().array().abs() * gs.data().array();
  return GradientSet(std::move(data), gs.ids());
}

double spectral_norm_fs(const RowMatrix& members) {
  if (members.rows() == 0) return 0.0;
  const Eigen::MatrixXd gram = members * members.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues().maxCoeff());
}

}  // namespace spice
