#include "spice/epsilon_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "spice/conflict.hpp"
#include "spice/error.hpp"
#include "spice/parallel.hpp"

namespace spice {
namespace {

constexpr double kZeroBase = 1e-12;
constexpr double kCurvatureZero = 1e-12;

}  // namespace

double base_value(const VectorRef& g, ScalingParams alpha) {
  return std::log1p(alpha.alpha() * g.squaredNorm());
}

double base_value(const VectorRef& g, ScalingParams alpha, Backend backend) {
  if (backend == Backend::dense) return base_value(g, alpha);
  double base = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) base += std::log1p(alpha.alpha() * g[j] * g[j]);
  return base;
}

double epsilon_value(const FisherState& state, const VectorRef& g) {
  const double a = state.alpha();
  if (state.backend() == Backend::dense) {
    const double q = state.quad_form(g);
    return std::log((1.0 + a * q) / (1.0 + a * g.squaredNorm()));
  }
  if (static_cast<std::size_t>(g.size()) != state.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient dimension does not match state");
  }
  // Per coordinate: ln((D_j + a g_j^2) / (D_j (1 + a g_j^2))).
  const Vector& diag = state.diagonal();
  double eps = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double ag2 = a * g[j] * g[j];
    eps += std::log((diag[j] + ag2) / (diag[j] * (1.0 + ag2)));
  }
  return eps;
}

std::pair<double, double> telescoping_check(const GradientSet& gs, const std::vector<std::size_t>& chain,
                                            std::size_t x, ScalingParams alpha) {
  const auto g = gs.row(x);
  FisherState state(gs.d(), alpha, Backend::dense);
  // Sum of the per-step decays Delta_x(S_{t-1}) - Delta_x(S_t).
  double prev = state.marginal_gain(g);
  double lhs = 0.0;
  for (const std::size_t i : chain) {
    state.add_sample(i, gs.row(i));
    const double gain = state.marginal_gain(g);
    lhs += prev - gain;
    prev = gain;
  }
  const double rhs = -epsilon_value(state, g);
  return {lhs, rhs};
}

std::optional<double> perturbation_constant(double alpha, double rho, double g_max) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw Error(ErrorCode::InvalidRho, "rho must lie in [0, 1), got " + std::to_string(rho));
  }
  const double denom = 1.0 - rho - alpha * g_max * g_max * rho;
  if (!(denom > 0.0)) return std::nullopt;
  return 1.0 / denom;
}

std::optional<double> perturbation_bound(const VectorRef& g_x, const RowMatrix& members, ScalingParams alpha,
                                         double rho, double g_max) {
  const auto constant = perturbation_constant(alpha.alpha(), rho, g_max);
  if (!constant) return std::nullopt;
  if (members.rows() == 0) return 0.0;
  const double a = alpha.alpha();
  return *constant * a * a * interaction_sum(g_x, members) / (1.0 + a * g_x.squaredNorm());
}

CurvatureReport curvature_empirical(const GradientSet& gs, ScalingParams alpha, std::size_t threads) {
  const std::size_t n = gs.n();
  if (n < 2) throw Error(ErrorCode::InvalidGradientSet, "curvature needs at least two samples");
  if (n > kCurvatureMaxSamples) {
    throw Error(ErrorCode::InstanceTooLarge,
                "curvature is limited to n <= " + std::to_string(kCurvatureMaxSamples) + ", got " + std::to_string(n));
  }
  std::vector<double> bases(n);
  for (std::size_t i = 0; i < n; ++i) {
    bases[i] = base_value(gs.row(i), alpha);
    if (bases[i] < kZeroBase) {
      throw Error(ErrorCode::ZeroBaseSample, "sample " + std::to_string(i) + " has zero base gain");
    }
  }

  std::vector<double> ratios(n);
  std::vector<double> normalized(n);
  parallel_for(n, threads, [&](std::size_t x) {
    FisherState rest(gs.d(), alpha, Backend::dense);
    for (std::size_t i = 0; i < n; ++i) {
      if (i != x) rest.add_sample(i, gs.row(i));
    }
    const auto g = gs.row(x);
    ratios[x] = rest.marginal_gain(g) / bases[x];
    normalized[x] = std::abs(epsilon_value(rest, g)) / bases[x];
  });

  CurvatureReport report;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n; ++x) {
    if (ratios[x] < min_ratio) {
      min_ratio = ratios[x];
      report.argmin_sample = x;
    }
    report.c_bound = std::max(report.c_bound, normalized[x]);
  }
  report.c_empirical = std::clamp(1.0 - min_ratio, 0.0, 1.0);
  report.guarantee_factor = guarantee_factor(report.c_empirical);
  return report;
}

double guarantee_factor(double c) {
  if (!(c >= 0.0 && c <= 1.0)) {
    throw Error(ErrorCode::InvalidCurvature, "curvature must lie in [0, 1], got " + std::to_string(c));
  }
  if (c <= kCurvatureZero) return 1.0;
  return -std::expm1(-c) / c;
}

std::vector<EpsilonRecord> epsilon_records(const GradientSet& gs, const std::vector<std::size_t>& subset,
                                           ScalingParams alpha, Backend backend, std::optional<double> rho_override,
                                           BoundCheckSummary* summary) {
  const FisherState state = FisherState::from_subset(gs, subset, alpha, backend);
  const RowMatrix members = gs.gather(subset);
  const double rho = rho_override ? *rho_override : alpha.alpha() * spectral_norm_fs(members);
  const double g_max = gradient_norms(gs).g_max;

  std::vector<bool> in_subset(gs.n(), false);
  for (const std::size_t i : subset) in_subset.at(i) = true;

  BoundCheckSummary local;
  local.rho = rho;
  local.g_max = g_max;
  const bool rho_valid = rho >= 0.0 && rho < 1.0;
  local.in_regime = rho_valid && perturbation_constant(alpha.alpha(), rho, g_max).has_value();

  std::vector<EpsilonRecord> records;
  for (std::size_t x = 0; x < gs.n(); ++x) {
    if (in_subset[x]) continue;
    const auto g = gs.row(x);
    EpsilonRecord rec;
    rec.index = x;
    rec.base = base_value(g, alpha, backend);
    rec.delta = state.marginal_gain(g);
    rec.epsilon = epsilon_value(state, g);
    rec.interaction = interaction_sum(g, members);
    // rho >= 1 is outside the theorem's assumptions, not a caller error here.
    rec.bound = rho_valid ? perturbation_bound(g, members, alpha, rho, g_max) : std::nullopt;
    ++local.checked;
    if (!rec.bound) {
      ++local.undefined;
    } else if (std::abs(rec.epsilon) > *rec.bound) {
      ++local.violations;
    }
    records.push_back(rec);
  }
  if (summary) *summary = local;
  return records;
}

}  // namespace spice
