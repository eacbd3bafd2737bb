#include "spice/conflict.hpp"

#include <algorithm>
#include <string>

#include "spice/error.hpp"

namespace spice {

Vector mean_gradient(const FisherState& state) {
  if (state.size() == 0) return Vector::Zero(static_cast<Eigen::Index>(state.dim()));
  return state.sum_g() / static_cast<double>(state.size());
}

double align(const VectorRef& g, const VectorRef& g_bar, ConflictParams params) {
  if (g.size() != g_bar.size()) {
    throw Error(ErrorCode::DimensionMismatch, "align on vectors of different dimension");
  }
  const double dot = g.dot(g_bar);
  if (dot == 0.0) return 0.0;
  return dot / (g.norm() * g_bar.norm() + params.eta);
}

double conflict(const VectorRef& g, const VectorRef& g_bar, ConflictParams params) {
  return std::max(0.0, -align(g, g_bar, params));
}

double interaction_sum(const VectorRef& g_x, const RowMatrix& members) {
  if (members.rows() == 0) return 0.0;
  if (members.cols() != g_x.size()) {
    throw Error(ErrorCode::DimensionMismatch, "members have dimension " + std::to_string(members.cols()) +
                                                  ", candidate has " + std::to_string(g_x.size()));
  }
  return (members * g_x).squaredNorm();
}

}  // namespace spice
