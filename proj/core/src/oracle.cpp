#include "spice/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "spice/epsilon_analysis.hpp"
#include "spice/error.hpp"
#include "spice/parallel.hpp"
#include "spice/rng.hpp"
#include "spice/selector.hpp"

namespace spice {
namespace {

// Advances `combo` to the next k-combination of 0..n-1 in lexicographic order.
bool next_combination(std::vector<std::size_t>& combo, std::size_t n) {
  const std::size_t k = combo.size();
  std::size_t i = k;
  while (i > 0) {
    --i;
    if (combo[i] < n - k + i) {
      ++combo[i];
      for (std::size_t j = i + 1; j < k; ++j) combo[j] = combo[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

double subset_logdet(const GradientSet& gs, const std::vector<std::size_t>& subset, ScalingParams alpha) {
  if (subset.empty()) return 0.0;
  const RowMatrix rows = gs.gather(subset);
  const auto s = static_cast<Eigen::Index>(subset.size());
  const Eigen::MatrixXd kernel = Eigen::MatrixXd::Identity(s, s) + alpha.alpha() * (rows * rows.transpose());
  const Eigen::LLT<Eigen::MatrixXd> llt(kernel);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NumericalBreakdown, "subset kernel is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / num) return std::numeric_limits<std::uint64_t>::max();
    result = result * num / i;
  }
  return result;
}

OptimumResult exhaustive_optimum(const GradientSet& gs, std::size_t k, ScalingParams alpha, std::size_t threads) {
  const std::size_t n = gs.n();
  if (k > n) throw Error(ErrorCode::BudgetExceedsPool, "k exceeds n");
  const std::uint64_t count = binomial(n, k);
  if (count > kMaxEnumeratedSubsets) {
    throw Error(ErrorCode::InstanceTooLarge,
                "C(" + std::to_string(n) + ", " + std::to_string(k) + ") exceeds the enumeration limit");
  }
  if (k == 0) return {0.0, {}};

  // One task per leading element; each scans its combinations in order.
  const std::size_t leads = n - k + 1;
  std::vector<OptimumResult> partial(leads);
  parallel_for(leads, threads, [&](std::size_t lead) {
    OptimumResult best{-std::numeric_limits<double>::infinity(), {}};
    std::vector<std::size_t> combo(k);
    for (std::size_t j = 0; j < k; ++j) combo[j] = lead + j;
    do {
      if (combo[0] != lead) break;
      const double value = subset_logdet(gs, combo, alpha);
      if (value > best.value) best = {value, combo};
    } while (next_combination(combo, n));
    partial[lead] = std::move(best);
  });

  OptimumResult best{-std::numeric_limits<double>::infinity(), {}};
  for (auto& p : partial) {
    if (p.value > best.value) best = std::move(p);
  }
  return best;
}

SubmodularityReport verify_submodularity(const GradientSet& gs, std::size_t trials, std::uint64_t seed,
                                         ScalingParams alpha) {
  SubmodularityReport report;
  report.trials = trials;
  report.min_margin = std::numeric_limits<double>::infinity();
  const std::size_t n = gs.n();
  if (n < 1) return report;
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto perm = sample_without_replacement(n, n, rng);
    const std::size_t b_size = static_cast<std::size_t>(rng.below(n));
    const std::size_t a_size = static_cast<std::size_t>(rng.below(b_size + 1));
    const std::size_t x = perm[b_size];
    const auto g = gs.row(x);

    FisherState state(gs.d(), alpha, Backend::dense);
    for (std::size_t i = 0; i < a_size; ++i) state.add_sample(perm[i], gs.row(perm[i]));
    const double gain_a = state.marginal_gain(g);
    for (std::size_t i = a_size; i < b_size; ++i) state.add_sample(perm[i], gs.row(perm[i]));
    const double gain_b = state.marginal_gain(g);

    const double margin = gain_a - gain_b;
    if (margin < -kSubmodularityTolerance) ++report.violations;
    if (margin > kStrictMargin) ++report.strict;
    if (margin < report.min_margin) {
      report.min_margin = margin;
      report.worst = SubmodularityWitness{{perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(a_size)},
                                          {perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(b_size)},
                                          x,
                                          gain_a,
                                          gain_b};
    }
  }
  if (trials == 0) report.min_margin = 0.0;
  return report;
}

std::size_t verify_monotonicity(const GradientSet& gs, std::size_t trials, std::uint64_t seed, ScalingParams alpha) {
  std::size_t violations = 0;
  const std::size_t n = gs.n();
  Rng rng(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    auto perm = sample_without_replacement(n, n, rng);
    const std::size_t b_size = static_cast<std::size_t>(rng.below(n + 1));
    const std::size_t a_size = static_cast<std::size_t>(rng.below(b_size + 1));
    const std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(a_size));
    const std::vector<std::size_t> b(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(b_size));
    if (subset_logdet(gs, a, alpha) > subset_logdet(gs, b, alpha) + kSubmodularityTolerance) ++violations;
  }
  return violations;
}

OracleResult certify_approximation(const GradientSet& gs, std::size_t k, ScalingParams alpha, double lambda,
                                   std::size_t threads) {
  OracleResult out;
  const OptimumResult opt = exhaustive_optimum(gs, k, alpha, threads);
  out.optimum_value = opt.value;
  out.optimum_set = opt.set;

  SelectionConfig cfg;
  cfg.alpha = alpha.alpha();
  cfg.lambda = lambda;
  cfg.budget_k = k;
  cfg.threads = threads;
  const SelectionResult greedy = greedy_select(gs, all_indices(gs.n()), cfg);
  out.greedy_set = greedy.selected;
  out.greedy_value = subset_logdet(gs, greedy.selected, alpha);
  out.ratio = out.optimum_value > 0.0 ? out.greedy_value / out.optimum_value : 1.0;

  const CurvatureReport curv = curvature_empirical(gs, alpha, threads);
  out.c_empirical = curv.c_empirical;
  out.c_bound = curv.c_bound;
  out.guarantee = curv.guarantee_factor;
  const double classical = -std::expm1(-1.0);
  out.classical_bound_ok = out.ratio >= classical - kRatioTolerance;
  out.curvature_bound_ok = out.ratio >= out.guarantee - kRatioTolerance;
  return out;
}

}  // namespace spice
