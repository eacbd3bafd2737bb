#include "spice/error.hpp"

namespace spice {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::RaggedCsv: return "RaggedCsv";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidGradientSet: return "InvalidGradientSet";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::InvalidRho: return "InvalidRho";
    case ErrorCode::ZeroBaseSample: return "ZeroBaseSample";
    case ErrorCode::InvalidCurvature: return "InvalidCurvature";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::BudgetExceedsPool: return "BudgetExceedsPool";
    case ErrorCode::PoolSmallerThanBudget: return "PoolSmallerThanBudget";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::AllZeroGains: return "AllZeroGains";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateConstantInput: return "DegenerateConstantInput";
    case ErrorCode::GroupSmallerThanBudget: return "GroupSmallerThanBudget";
  }
  return "UnknownError";
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NumericalBreakdown:
      return kExitNumericalError;
    case ErrorCode::BadMagic:
    case ErrorCode::UnsupportedVersion:
    case ErrorCode::TruncatedPayload:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::RaggedCsv:
    case ErrorCode::IoError:
    case ErrorCode::InvalidGradientSet:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DuplicateIndex:
    case ErrorCode::ZeroBaseSample:
    case ErrorCode::AllZeroGains:
    case ErrorCode::LengthMismatch:
    case ErrorCode::DegenerateConstantInput:
      return kExitDataError;
    case ErrorCode::InvalidAlpha:
    case ErrorCode::InvalidRho:
    case ErrorCode::InvalidCurvature:
    case ErrorCode::EmptyCandidates:
    case ErrorCode::BudgetExceedsPool:
    case ErrorCode::PoolSmallerThanBudget:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InstanceTooLarge:
    case ErrorCode::GroupSmallerThanBudget:
      return kExitConfigError;
  }
  return kExitFailure;
}

}  // namespace spice
