#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "spice/selector.hpp"

namespace spice {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kSelectionReportSchema = "spice.selection_report";
inline constexpr int kSelectionReportVersion = 1;

struct SelectionReport {
  std::string tool_version{kToolVersion};
  SelectionConfig config;
  bool adafisher = false;
  std::string input_path;
  std::string input_checksum;
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<std::size_t> selected;
  std::vector<std::string> selected_ids;
  std::vector<StepRecord> trace;
  std::vector<std::vector<std::size_t>> batches;
  double utility = 0.0;
  std::size_t k_eff = 0;
  bool stopped_early = false;
  std::optional<std::size_t> t_stop;
  double total_conflict_penalty = 0.0;
  // Omitted from deterministic reports.
  std::optional<double> runtime_ms;
};

std::string to_string(Backend backend);
std::string to_string(StoppingMode mode);
Backend parse_backend(std::string_view text);
StoppingMode parse_stopping(std::string_view text);

// Pretty-printed JSON with a trailing newline.
std::string to_json(const SelectionReport& report);

// Reads a report, ignoring unknown fields. Rejects other schemas and newer
// major versions with InvalidConfig.
SelectionReport parse_selection_report(std::string_view json);

// One CSV row per step, with a header.
void write_trace_csv(std::ostream& out, const std::vector<StepRecord>& trace);

// 64-bit FNV-1a of `bytes`, as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

}  // namespace spice
