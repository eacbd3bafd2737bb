#include "spice/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "spice/epsilon_analysis.hpp"
#include "spice/error.hpp"
#include "spice/parallel.hpp"
#include "spice/rng.hpp"

namespace spice {
namespace {

// Candidate gains are solved in fixed-width column blocks so the arithmetic
// does not depend on the worker count.
constexpr std::size_t kScoreBlock = 32;

struct PoolRun {
  std::vector<StepRecord> steps;
  bool stopped_early = false;
  std::optional<std::size_t> t_stop;
};

Vector block_gains(const FisherState& state, const GradientSet& gs, const std::vector<std::size_t>& remaining,
                   std::size_t threads) {
  const std::size_t r = remaining.size();
  Vector gains(static_cast<Eigen::Index>(r));
  const std::size_t blocks = (r + kScoreBlock - 1) / kScoreBlock;
  const auto d = static_cast<Eigen::Index>(gs.d());
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t begin = b * kScoreBlock;
    const std::size_t end = std::min(r, begin + kScoreBlock);
    Eigen::MatrixXd cols(d, static_cast<Eigen::Index>(end - begin));
    for (std::size_t c = begin; c < end; ++c) cols.col(static_cast<Eigen::Index>(c - begin)) = gs.row(remaining[c]);
    gains.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
        state.marginal_gains(cols);
  });
  return gains;
}

// Runs up to `budget` greedy steps over `pool`, mutating `state`.
PoolRun run_pool(const GradientSet& gs, std::vector<std::size_t> pool, std::size_t budget,
                 const SelectionConfig& cfg, FisherState& state, std::size_t pool_id) {
  PoolRun run;
  std::sort(pool.begin(), pool.end());
  const ScalingParams alpha(cfg.alpha);
  const ConflictParams cparams{cfg.eta};
  double reference_gain = 0.0;

  for (std::size_t t = 1; t <= budget && !pool.empty(); ++t) {
    const Vector gains = block_gains(state, gs, pool, cfg.threads);
    const Vector g_bar = mean_gradient(state);

    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    double best_conflict = 0.0;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      const double conf = conflict(gs.row(pool[c]), g_bar, cparams);
      const double s = gains[static_cast<Eigen::Index>(c)] - cfg.lambda * conf;
      // pool is sorted, so strict '>' keeps the smallest index on ties.
      if (s > best_score) {
        best_score = s;
        best = c;
        best_conflict = conf;
      }
    }
    const std::size_t x = pool[best];
    const double delta = gains[static_cast<Eigen::Index>(best)];

    if (cfg.stopping == StoppingMode::adaptive) {
      if (t == 1) reference_gain = delta;
      if (delta <= cfg.omega * reference_gain) {
        run.stopped_early = true;
        run.t_stop = t;
        break;
      }
    }

    const auto g = gs.row(x);
    StepRecord rec;
    rec.step_t = t;
    rec.chosen_index = x;
    rec.delta = delta;
    rec.base = base_value(g, alpha, cfg.backend);
    rec.epsilon = epsilon_value(state, g);
    rec.conflict = best_conflict;
    rec.score = best_score;
    rec.pool_id = pool_id;
    state.add_sample(x, g);
    rec.cumulative_utility = state.logdet();
    run.steps.push_back(rec);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return run;
}

void append_run(SelectionResult& result, const PoolRun& run) {
  for (const auto& step : run.steps) {
    result.selected.push_back(step.chosen_index);
    result.trace.push_back(step);
  }
  if (run.stopped_early && !result.stopped_early) {
    result.stopped_early = true;
    result.t_stop = run.t_stop;
  }
}

}  // namespace

void SelectionConfig::validate() const {
  (void)ScalingParams(alpha);
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::InvalidConfig, "lambda must be >= 0");
  }
  if (budget_k < 1) throw Error(ErrorCode::InvalidConfig, "budget must be >= 1");
  if (stopping == StoppingMode::adaptive && !(omega > 0.0 && omega < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "omega must lie in (0, 1)");
  }
  if (pool_size_m && *pool_size_m < 1) throw Error(ErrorCode::InvalidConfig, "pool size must be >= 1");
  if (interval_T < 1) throw Error(ErrorCode::InvalidConfig, "interval T must be >= 1");
  if (!(eta > 0.0)) throw Error(ErrorCode::InvalidConfig, "eta must be > 0");
  if (threads < 1) throw Error(ErrorCode::InvalidConfig, "threads must be >= 1");
}

ScoreResult score(const FisherState& state, const VectorRef& g, double lambda, ConflictParams params) {
  ScoreResult out;
  out.delta = state.marginal_gain(g);
  out.conflict = conflict(g, mean_gradient(state), params);
  out.score = out.delta - lambda * out.conflict;
  return out;
}

SelectionResult greedy_select(const GradientSet& gs, const std::vector<std::size_t>& candidates,
                              const SelectionConfig& cfg) {
  cfg.validate();
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "no candidates to select from");
  for (const std::size_t c : candidates) {
    if (c >= gs.n()) throw Error(ErrorCode::InvalidConfig, "candidate index " + std::to_string(c) + " out of range");
  }
  if (cfg.budget_k > candidates.size()) {
    throw Error(ErrorCode::BudgetExceedsPool, "budget " + std::to_string(cfg.budget_k) + " exceeds " +
                                                  std::to_string(candidates.size()) + " candidates");
  }
  FisherState state(gs.d(), ScalingParams(cfg.alpha), cfg.backend);
  SelectionResult result;
  append_run(result, run_pool(gs, candidates, cfg.budget_k, cfg, state, 0));
  result.k_eff = result.selected.size();
  result.batches.push_back(result.selected);
  return result;
}

SelectionResult streaming_select(const GradientSet& gs, const SelectionConfig& cfg) {
  cfg.validate();
  if (!cfg.pool_size_m) return greedy_select(gs, all_indices(gs.n()), cfg);
  const std::size_t m = *cfg.pool_size_m;
  const std::size_t n = gs.n();
  if (n >= m && cfg.budget_k > m) {
    throw Error(ErrorCode::PoolSmallerThanBudget,
                "pool size " + std::to_string(m) + " is smaller than budget " + std::to_string(cfg.budget_k));
  }
  if (n < m && cfg.budget_k > n) {
    throw Error(ErrorCode::BudgetExceedsPool, "budget exceeds the only pool");
  }

  const ScalingParams alpha(cfg.alpha);
  SelectionResult result;
  std::vector<std::size_t> batch;
  FisherState state(gs.d(), alpha, cfg.backend);
  const std::size_t pools = (n + m - 1) / m;
  for (std::size_t p = 0; p < pools; ++p) {
    const std::size_t begin = p * m;
    const std::size_t end = std::min(n, begin + m);
    const std::size_t size = end - begin;
    // A lone pool keeps the full budget; a short trailing pool gets a floored share.
    const std::size_t budget = (size == m || pools == 1) ? cfg.budget_k : cfg.budget_k * size / m;
    if (!cfg.persist_across_pools || p % cfg.interval_T == 0) state = FisherState(gs.d(), alpha, cfg.backend);
    if (budget > 0) {
      std::vector<std::size_t> pool(size);
      std::iota(pool.begin(), pool.end(), begin);
      const PoolRun run = run_pool(gs, std::move(pool), budget, cfg, state, p);
      append_run(result, run);
      for (const auto& step : run.steps) batch.push_back(step.chosen_index);
    }
    if ((p + 1) % cfg.interval_T == 0) {
      result.batches.push_back(std::move(batch));
      batch.clear();
    }
  }
  if (!batch.empty()) result.batches.push_back(std::move(batch));
  result.k_eff = result.selected.size();
  return result;
}

std::vector<std::size_t> random_select(const GradientSet& gs, std::size_t k, std::uint64_t seed) {
  if (k > gs.n()) {
    throw Error(ErrorCode::BudgetExceedsPool,
                "cannot draw " + std::to_string(k) + " of " + std::to_string(gs.n()) + " samples");
  }
  Rng rng(seed);
  return sample_without_replacement(gs.n(), k, rng);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

}  // namespace spice
