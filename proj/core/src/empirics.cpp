#include "spice/empirics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spice/conflict.hpp"
#include "spice/epsilon_analysis.hpp"
#include "spice/error.hpp"
#include "spice/rng.hpp"
#include "spice/selector.hpp"

namespace spice {
namespace {

// Rng streams used by generate_population.
constexpr std::uint64_t kAnchorStream = 0;
constexpr std::uint64_t kLabelStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

}  // namespace

void SynthConfig::validate() const {
  if (n < 1 || d < 1) throw Error(ErrorCode::InvalidConfig, "synthetic population needs n >= 1 and d >= 1");
  if (!(conflict_frac >= 0.0 && conflict_frac <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "conflict_frac must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw Error(ErrorCode::InvalidConfig, "noise_sigma must be >= 0");
  }
  if (!(norm_max > 0.0) || !std::isfinite(norm_max)) throw Error(ErrorCode::InvalidConfig, "norm_max must be > 0");
}

GradientSet generate_population(const SynthConfig& cfg) {
  cfg.validate();
  const auto d = static_cast<Eigen::Index>(cfg.d);
  Rng anchor_rng(cfg.seed, kAnchorStream);
  Vector mu(d);
  do {
    for (Eigen::Index j = 0; j < d; ++j) mu[j] = anchor_rng.normal();
  } while (mu.norm() == 0.0);
  mu.normalize();

  // Which rows belong to the conflicting (-mu) cluster.
  const auto conflicting = static_cast<std::size_t>(std::ceil(cfg.conflict_frac * static_cast<double>(cfg.n)));
  Rng label_rng(cfg.seed, kLabelStream);
  std::vector<bool> negative(cfg.n, false);
  for (const std::size_t i : sample_without_replacement(cfg.n, std::min(conflicting, cfg.n), label_rng)) {
    negative[i] = true;
  }

  Rng noise_rng(cfg.seed, kNoiseStream);
  const double coord_sigma = cfg.noise_sigma / std::sqrt(static_cast<double>(cfg.d));
  RowMatrix data(static_cast<Eigen::Index>(cfg.n), d);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto row = data.row(static_cast<Eigen::Index>(i));
    const double sign = negative[i] ? -1.0 : 1.0;
    for (Eigen::Index j = 0; j < d; ++j) row[j] = sign * mu[j] + coord_sigma * noise_rng.normal();
    const double norm = row.norm();
    if (norm > cfg.norm_max) row *= cfg.norm_max / norm;
  }
  return GradientSet(std::move(data));
}

DecayMetrics decay_metrics(const std::vector<double>& delta_sequence) {
  if (delta_sequence.empty()) throw Error(ErrorCode::AllZeroGains, "empty gain sequence");
  for (const double v : delta_sequence) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidConfig, "gains must be finite and >= 0");
  }
  DecayMetrics out;
  out.delta_sequence = delta_sequence;
  out.aumg = std::accumulate(delta_sequence.begin(), delta_sequence.end(), 0.0);
  if (!(out.aumg > 0.0)) throw Error(ErrorCode::AllZeroGains, "all gains are zero");
  const double half = 0.5 * out.aumg;
  double running = 0.0;
  out.half_life_t = delta_sequence.size();
  for (std::size_t t = 0; t < delta_sequence.size(); ++t) {
    running += delta_sequence[t];
    if (running >= half) {
      out.half_life_t = t + 1;
      break;
    }
  }
  return out;
}

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "spearman inputs have lengths " + std::to_string(xs.size()) + " and " + std::to_string(ys.size()));
  }
  if (xs.size() < 3) throw Error(ErrorCode::LengthMismatch, "spearman needs at least 3 points");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateConstantInput, "spearman input is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> population_conflicts(const GradientSet& gs, double eta) {
  const Vector g_bar = gs.data().colwise().mean().transpose();
  std::vector<double> out(gs.n());
  for (std::size_t i = 0; i < gs.n(); ++i) out[i] = conflict(gs.row(i), g_bar, ConflictParams{eta});
  return out;
}

std::vector<double> fisher_greedy_gains(const GradientSet& gs, const std::vector<std::size_t>& candidates,
                                        std::size_t k, ScalingParams alpha) {
  SelectionConfig cfg;
  cfg.alpha = alpha.alpha();
  cfg.lambda = 0.0;
  cfg.budget_k = k;
  const SelectionResult result = greedy_select(gs, candidates, cfg);
  std::vector<double> gains;
  gains.reserve(result.trace.size());
  for (const auto& step : result.trace) gains.push_back(step.delta);
  return gains;
}

SplitExperiment conflict_split_experiment(const GradientSet& gs, double split_frac, std::size_t k,
                                          ScalingParams alpha) {
  if (!(split_frac > 0.0 && split_frac <= 0.5)) {
    throw Error(ErrorCode::InvalidConfig, "split fraction must lie in (0, 0.5]");
  }
  const auto group = static_cast<std::size_t>(std::floor(split_frac * static_cast<double>(gs.n())));
  if (group < k || k == 0) {
    throw Error(ErrorCode::GroupSmallerThanBudget,
                "group of " + std::to_string(group) + " samples cannot support budget " + std::to_string(k));
  }
  const auto conflicts = population_conflicts(gs);
  std::vector<std::size_t> order = all_indices(gs.n());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return conflicts[a] < conflicts[b]; });

  SplitExperiment out;
  out.low_group.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(group));
  out.high_group.assign(order.end() - static_cast<std::ptrdiff_t>(group), order.end());
  out.low = decay_metrics(fisher_greedy_gains(gs, out.low_group, k, alpha));
  out.high = decay_metrics(fisher_greedy_gains(gs, out.high_group, k, alpha));
  return out;
}

CorrelationExperiment correlation_experiment(const GradientSet& gs, std::size_t k, ScalingParams alpha,
                                             std::uint64_t seed) {
  if (k < 1 || gs.n() < k + 10) {
    throw Error(ErrorCode::InvalidConfig, "correlation experiment needs 1 <= k and n >= k + 10");
  }
  CorrelationExperiment out;
  const auto conflicts = population_conflicts(gs);

  // (1) Step-wise correlation along a Fisher greedy run.
  FisherState state(gs.d(), alpha, Backend::dense);
  std::vector<std::size_t> pool = all_indices(gs.n());
  double rho_sum = 0.0;
  for (std::size_t t = 1; t <= k; ++t) {
    std::vector<double> pool_conflicts, pool_deltas;
    pool_conflicts.reserve(pool.size());
    pool_deltas.reserve(pool.size());
    std::size_t best = 0;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      pool_conflicts.push_back(conflicts[pool[c]]);
      pool_deltas.push_back(state.marginal_gain(gs.row(pool[c])));
      if (pool_deltas[c] > pool_deltas[best]) best = c;
    }
    CorrelationStep step;
    step.step = t;
    step.pool_size = pool.size();
    step.chosen_index = pool[best];
    step.chosen_delta = pool_deltas[best];
    step.mean_conflict = std::accumulate(pool_conflicts.begin(), pool_conflicts.end(), 0.0) /
                         static_cast<double>(pool.size());
    step.mean_delta =
        std::accumulate(pool_deltas.begin(), pool_deltas.end(), 0.0) / static_cast<double>(pool.size());
    step.rho = spearman(pool_conflicts, pool_deltas);
    rho_sum += step.rho;
    out.steps.push_back(step);
    state.add_sample(pool[best], gs.row(pool[best]));
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  out.rho_conflict_delta = rho_sum / static_cast<double>(k);

  // (2) Conflict against |epsilon_x(S0)| for a fixed random S0.
  Rng rng(seed);
  out.s0 = sample_without_replacement(gs.n(), k, rng);
  const FisherState s0_state = FisherState::from_subset(gs, out.s0, alpha, Backend::dense);
  std::vector<bool> in_s0(gs.n(), false);
  for (const std::size_t i : out.s0) in_s0[i] = true;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < gs.n(); ++i) {
    if (in_s0[i]) continue;
    const double eps = epsilon_value(s0_state, gs.row(i));
    out.scatter.push_back({i, conflicts[i], eps});
    xs.push_back(conflicts[i]);
    ys.push_back(std::abs(eps));
  }
  out.rho_conflict_abs_eps = spearman(xs, ys);
  return out;
}

}  // namespace spice
