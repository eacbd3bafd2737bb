#pragma once

#include "spice/fisher_core.hpp"
#include "spice/gradient_store.hpp"

namespace spice {

struct ConflictParams {
  double eta = 1e-8;
};

// Mean gradient of the selected set; the zero vector when S is empty.
Vector mean_gradient(const FisherState& state);

// Cosine alignment g^T gbar / (|g| |gbar| + eta). Zero if either vector is zero.
double align(const VectorRef& g, const VectorRef& g_bar, ConflictParams params = {});

// max(0, -align(g, gbar)).
double conflict(const VectorRef& g, const VectorRef& g_bar, ConflictParams params = {});

// sum over member rows y of (g_x^T y)^2.
double interaction_sum(const VectorRef& g_x, const RowMatrix& members);

}  // namespace spice
