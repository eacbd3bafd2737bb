#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spice/fisher_core.hpp"
#include "spice/gradient_store.hpp"

namespace spice {

// Two-cluster synthetic gradients: ceil(conflict_frac * n) rows around -mu,
// the rest around +mu, for a random unit anchor mu.
struct SynthConfig {
  std::size_t n = 256;
  std::size_t d = 64;
  double conflict_frac = 0.5;
  // Norm scale of the isotropic noise (per-coordinate std is noise_sigma / sqrt(d)).
  double noise_sigma = 0.25;
  // Rows longer than this are rescaled onto the sphere of this radius.
  double norm_max = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

GradientSet generate_population(const SynthConfig& cfg);

struct DecayMetrics {
  std::size_t half_life_t = 0;
  double aumg = 0.0;
  std::vector<double> delta_sequence;
};

// Half-life = first t whose running sum reaches half of the total; AUMG = total.
DecayMetrics decay_metrics(const std::vector<double>& delta_sequence);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

// Average (1-based) ranks, ties sharing the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values);

// Per-sample conflict against the mean of all rows of gs.
std::vector<double> population_conflicts(const GradientSet& gs, double eta = 1e-8);

// Marginal gains of a plain Fisher greedy run (lambda = 0) over `candidates`.
std::vector<double> fisher_greedy_gains(const GradientSet& gs, const std::vector<std::size_t>& candidates,
                                        std::size_t k, ScalingParams alpha);

struct SplitExperiment {
  DecayMetrics low;
  DecayMetrics high;
  std::vector<std::size_t> low_group;
  std::vector<std::size_t> high_group;
};

// Splits samples by population conflict (stable ascending order, so ties keep
// index order) into the bottom and top floor(split_frac * n) and runs k
// Fisher greedy steps inside each group.
SplitExperiment conflict_split_experiment(const GradientSet& gs, double split_frac, std::size_t k,
                                          ScalingParams alpha);

struct CorrelationStep {
  std::size_t step = 0;
  std::size_t pool_size = 0;
  std::size_t chosen_index = 0;
  double chosen_delta = 0.0;
  double mean_conflict = 0.0;
  double mean_delta = 0.0;
  double rho = 0.0;
};

struct ScatterPoint {
  std::size_t index = 0;
  double conflict = 0.0;
  double epsilon = 0.0;
};

// Sign convention: both coefficients are computed on raw values, conflict as
// the hinge of negative alignment. A positive rho_conflict_abs_eps means more
// conflicting samples carry larger |epsilon|.
struct CorrelationExperiment {
  double rho_conflict_delta = 0.0;
  double rho_conflict_abs_eps = 0.0;
  std::vector<CorrelationStep> steps;
  std::vector<std::size_t> s0;
  std::vector<ScatterPoint> scatter;
};

// (1) Per Fisher greedy step, Spearman(conflict, Delta) over the remaining
// candidates, averaged over k steps. (2) For a random S0 of size k,
// Spearman(conflict, |epsilon_x(S0)|) over samples outside S0.
CorrelationExperiment correlation_experiment(const GradientSet& gs, std::size_t k, ScalingParams alpha,
                                             std::uint64_t seed);

}  // namespace spice
