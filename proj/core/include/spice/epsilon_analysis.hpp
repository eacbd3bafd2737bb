#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "spice/fisher_core.hpp"
#include "spice/gradient_store.hpp"

namespace spice {

// Delta_x(S) split into the empty-set gain and the interaction perturbation.
struct EpsilonRecord {
  std::size_t index = 0;
  double base = 0.0;
  double delta = 0.0;
  double epsilon = 0.0;
  double interaction = 0.0;
  // Perturbation bound; empty when the Neumann regime condition fails.
  std::optional<double> bound;
};

struct CurvatureReport {
  double c_empirical = 0.0;
  double c_bound = 0.0;
  std::size_t argmin_sample = 0;
  double guarantee_factor = 1.0;
};

// ln(1 + alpha |g|^2), the gain of g on the empty set.
double base_value(const VectorRef& g, ScalingParams alpha);

// Empty-set gain under a given backend (the diagonal backend sums per-coordinate logs).
double base_value(const VectorRef& g, ScalingParams alpha, Backend backend);

// epsilon_x(S) as the log of a single ratio, never as a difference of two
// utilities. Requires x not in S.
double epsilon_value(const FisherState& state, const VectorRef& g);

// (sum over the chain of Delta_x(S_{t-1}) - Delta_x(S_t), -epsilon_x(S_T)).
std::pair<double, double> telescoping_check(const GradientSet& gs, const std::vector<std::size_t>& chain,
                                            std::size_t x, ScalingParams alpha);

// C(rho, G_max, alpha) = 1 / (1 - rho - alpha G_max^2 rho); empty outside the regime.
std::optional<double> perturbation_constant(double alpha, double rho, double g_max);

// C * alpha^2 * sum_y (g_x^T g_y)^2 / (1 + alpha |g_x|^2). Throws InvalidRho
// for rho outside [0, 1).
std::optional<double> perturbation_bound(const VectorRef& g_x, const RowMatrix& members, ScalingParams alpha,
                                         double rho, double g_max);

// Maximum n accepted by curvature_empirical.
inline constexpr std::size_t kCurvatureMaxSamples = 512;

// Total curvature from leave-one-out states. Needs n >= 2 and every base > 0.
CurvatureReport curvature_empirical(const GradientSet& gs, ScalingParams alpha, std::size_t threads = 1);

// (1 - e^{-c}) / c with the limit 1 at c = 0. c must lie in [0, 1].
double guarantee_factor(double c);

// Summary of |epsilon| <= bound checks over one set S.
struct BoundCheckSummary {
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::size_t undefined = 0;
  double rho = 0.0;
  double g_max = 0.0;
  bool in_regime = false;
  // Violations among the records whose bound is defined.
  double violation_rate() const noexcept {
    const std::size_t defined = checked - undefined;
    return defined == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(defined);
  }
};

// EpsilonRecords for every sample outside `subset`, relative to `subset`.
// rho defaults to alpha * ||F_S||; G_max is the largest norm in the data set.
std::vector<EpsilonRecord> epsilon_records(const GradientSet& gs, const std::vector<std::size_t>& subset,
                                           ScalingParams alpha, Backend backend,
                                           std::optional<double> rho_override = std::nullopt,
                                           BoundCheckSummary* summary = nullptr);

}  // namespace spice
