#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spice {

enum class ErrorCode {
  // gradient_store
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  NonFiniteValue,
  RaggedCsv,
  IoError,
  InvalidGradientSet,
  // fisher_core
  InvalidAlpha,
  DimensionMismatch,
  DuplicateIndex,
  NumericalBreakdown,
  // epsilon_analysis
  InvalidRho,
  ZeroBaseSample,
  InvalidCurvature,
  // selector
  EmptyCandidates,
  BudgetExceedsPool,
  PoolSmallerThanBudget,
  InvalidConfig,
  // oracle
  InstanceTooLarge,
  // empirics
  AllZeroGains,
  LengthMismatch,
  DegenerateConstantInput,
  GroupSmallerThanBudget,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Process exit codes used by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDataError = 3;
inline constexpr int kExitNumericalError = 4;

int exit_code_for(ErrorCode code) noexcept;

}  // namespace spice
