#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "spice/conflict.hpp"
#include "spice/fisher_core.hpp"
#include "spice/gradient_store.hpp"

namespace spice {

enum class StoppingMode { fixed, adaptive };

struct SelectionConfig {
  double alpha = 1.0;
  double lambda = 0.1;
  std::size_t budget_k = 12;
  StoppingMode stopping = StoppingMode::fixed;
  double omega = 0.5;
  // Unset means one global pool holding every candidate.
  std::optional<std::size_t> pool_size_m;
  std::size_t interval_T = 10;
  Backend backend = Backend::dense;
  double eta = 1e-8;
  std::uint64_t seed = 0;
  // Scoring parallelism; results do not depend on it.
  std::size_t threads = 1;
  // Keep the Fisher state across the pools of one interval_T cycle instead of
  // resetting it for every pool.
  bool persist_across_pools = false;

  // Throws InvalidConfig / InvalidAlpha on out-of-range fields.
  void validate() const;
};

struct StepRecord {
  std::size_t step_t = 0;
  std::size_t chosen_index = 0;
  double delta = 0.0;
  double base = 0.0;
  double epsilon = 0.0;
  double conflict = 0.0;
  double score = 0.0;
  double cumulative_utility = 0.0;
  std::size_t pool_id = 0;
};

struct SelectionResult {
  std::vector<std::size_t> selected;
  std::vector<StepRecord> trace;
  bool stopped_early = false;
  // Step at which the adaptive rule fired; the sample chosen there is not added.
  std::optional<std::size_t> t_stop;
  std::size_t k_eff = 0;
  std::vector<std::vector<std::size_t>> batches;
};

struct ScoreResult {
  double score = 0.0;
  double delta = 0.0;
  double conflict = 0.0;
};

// Delta_x(S) - lambda * conflict(x | S), with conflict against mean_gradient(state).
ScoreResult score(const FisherState& state, const VectorRef& g, double lambda, ConflictParams params = {});

// Conflict-penalized greedy over `candidates` (one pool).
SelectionResult greedy_select(const GradientSet& gs, const std::vector<std::size_t>& candidates,
                              const SelectionConfig& cfg);

// Consecutive pools of pool_size_m over 0..n-1, greedy per pool, a batch every
// interval_T pools. Without pool_size_m this is greedy_select over all samples.
SelectionResult streaming_select(const GradientSet& gs, const SelectionConfig& cfg);

// k indices uniformly without replacement; deterministic per seed.
std::vector<std::size_t> random_select(const GradientSet& gs, std::size_t k, std::uint64_t seed);

// All indices 0..n-1.
std::vector<std::size_t> all_indices(std::size_t n);

}  // namespace spice
