#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "spice/fisher_core.hpp"
#include "spice/gradient_store.hpp"

namespace spice {

// Largest number of k-subsets exhaustive_optimum will enumerate.
inline constexpr std::uint64_t kMaxEnumeratedSubsets = 2'000'000;

// log det(I + alpha F_S) evaluated from scratch through the |S| x |S| form
// log det(I + alpha G_S G_S^T). Shares no state with FisherState.
double subset_logdet(const GradientSet& gs, const std::vector<std::size_t>& subset, ScalingParams alpha);

// n choose k, saturating at UINT64_MAX.
std::uint64_t binomial(std::size_t n, std::size_t k);

struct OptimumResult {
  double value = 0.0;
  std::vector<std::size_t> set;
};

// Max of F over all k-subsets; the lexicographically smallest maximizer wins.
OptimumResult exhaustive_optimum(const GradientSet& gs, std::size_t k, ScalingParams alpha, std::size_t threads = 1);

struct SubmodularityWitness {
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
  std::size_t x = 0;
  double gain_a = 0.0;
  double gain_b = 0.0;
};

struct SubmodularityReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  // Trials where Delta_x(A) - Delta_x(B) > 1e-12.
  std::size_t strict = 0;
  double min_margin = 0.0;
  // Smallest observed Delta_x(A) - Delta_x(B).
  std::optional<SubmodularityWitness> worst;
};

inline constexpr double kSubmodularityTolerance = 1e-9;
inline constexpr double kStrictMargin = 1e-12;

// Random chains A subset B, x outside B; counts Delta_x(A) < Delta_x(B) - 1e-9.
SubmodularityReport verify_submodularity(const GradientSet& gs, std::size_t trials, std::uint64_t seed,
                                         ScalingParams alpha);

// Monotonicity of F over random nested pairs; returns the violation count.
std::size_t verify_monotonicity(const GradientSet& gs, std::size_t trials, std::uint64_t seed, ScalingParams alpha);

struct OracleResult {
  double optimum_value = 0.0;
  std::vector<std::size_t> optimum_set;
  double greedy_value = 0.0;
  std::vector<std::size_t> greedy_set;
  double ratio = 1.0;
  double c_empirical = 0.0;
  double c_bound = 0.0;
  double guarantee = 1.0;
  bool classical_bound_ok = false;
  bool curvature_bound_ok = false;
};

inline constexpr double kRatioTolerance = 1e-9;

// Greedy (penalty `lambda`) against the exhaustive optimum. Bound flags are
// meaningful for lambda = 0 only; for lambda > 0 the ratio is informational.
OracleResult certify_approximation(const GradientSet& gs, std::size_t k, ScalingParams alpha, double lambda = 0.0,
                                   std::size_t threads = 1);

}  // namespace spice
