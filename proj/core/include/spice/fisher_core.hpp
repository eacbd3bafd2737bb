#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "spice/gradient_store.hpp"

namespace spice {

// Scale of the Fisher term in log det(I + alpha * F_S). Must be > 0.
class ScalingParams {
 public:
  explicit ScalingParams(double alpha);
  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
};

enum class Backend { dense, diagonal };

// Incremental representation of I + alpha * F_S for the selected set S.
//
// dense:    lower Cholesky factor L with L L^T = I + alpha * sum g g^T,
//           updated by one O(d^2) rank-one update per added sample.
// diagonal: D_j = 1 + alpha * sum g_j^2, the exact state of the diagonal
//           surrogate model.
//
// Const member functions are safe to call concurrently.
class FisherState {
 public:
  FisherState(std::size_t d, ScalingParams alpha, Backend backend);

  // Builds the state for an explicit subset by adding its samples in order.
  static FisherState from_subset(const GradientSet& gs, const std::vector<std::size_t>& subset,
                                 ScalingParams alpha, Backend backend);

  std::size_t dim() const noexcept { return dim_; }
  Backend backend() const noexcept { return backend_; }
  ScalingParams scaling() const noexcept { return alpha_; }
  double alpha() const noexcept { return alpha_.alpha(); }
  double logdet() const noexcept { return logdet_; }
  const std::vector<std::size_t>& selected() const noexcept { return selected_; }
  std::size_t size() const noexcept { return selected_.size(); }
  const Vector& sum_g() const noexcept { return sum_g_; }
  // Dense backend only.
  const Eigen::MatrixXd& cholesky() const noexcept { return chol_; }
  // Diagonal backend only.
  const Vector& diagonal() const noexcept { return diag_; }

  // g^T (I + alpha F_S)^{-1} g under the active backend; in [0, |g|^2].
  double quad_form(const VectorRef& g) const;

  // Log-det increase from adding g. Dense: ln(1 + alpha * quad_form).
  // Diagonal: sum_j ln(1 + alpha g_j^2 / D_j).
  double marginal_gain(const VectorRef& g) const;

  // Marginal gains for many candidates at once; column c of `candidates`
  // (d x m, column-major) is one gradient. Dense path uses one blocked
  // triangular solve.
  Vector marginal_gains(const Eigen::MatrixXd& candidates) const;

  void add_sample(std::size_t index, const VectorRef& g);

 private:
  void check_dim(const VectorRef& g) const;

  std::size_t dim_;
  ScalingParams alpha_;
  Backend backend_;
  std::vector<std::size_t> selected_;
  double logdet_ = 0.0;
  Eigen::MatrixXd chol_;
  Vector diag_;
  Vector sum_g_;
};

// Effective vectors |g| * g (elementwise) used with the diagonal backend.
GradientSet adafisher_transform(const GradientSet& gs);

// Largest eigenvalue of F_S = sum g g^T for the rows of `members`, computed
// from the |S| x |S| Gram matrix. 0 when there are no members.
double spectral_norm_fs(const RowMatrix& members);

}  // namespace spice
