#include "spice/report.hpp"

#include <array>
#include <charconv>
#include <string>

#include <nlohmann/json.hpp>

#include "spice/error.hpp"

namespace spice {
namespace {

using nlohmann::json;

std::string csv_number(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

json step_to_json(const StepRecord& s) {
  return json{{"step_t", s.step_t},   {"chosen_index", s.chosen_index},
              {"delta", s.delta},     {"base", s.base},
              {"epsilon", s.epsilon}, {"conflict", s.conflict},
              {"score", s.score},     {"cumulative_utility", s.cumulative_utility},
              {"pool_id", s.pool_id}};
}

StepRecord step_from_json(const json& j) {
  StepRecord s;
  s.step_t = j.at("step_t").get<std::size_t>();
  s.chosen_index = j.at("chosen_index").get<std::size_t>();
  s.delta = j.at("delta").get<double>();
  s.base = j.at("base").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  s.conflict = j.at("conflict").get<double>();
  s.score = j.at("score").get<double>();
  s.cumulative_utility = j.at("cumulative_utility").get<double>();
  s.pool_id = j.at("pool_id").get<std::size_t>();
  return s;
}

}  // namespace

std::string to_string(Backend backend) { return backend == Backend::dense ? "dense" : "diagonal"; }
std::string to_string(StoppingMode mode) { return mode == StoppingMode::fixed ? "fixed" : "adaptive"; }

Backend parse_backend(std::string_view text) {
  if (text == "dense") return Backend::dense;
  if (text == "diagonal") return Backend::diagonal;
  throw Error(ErrorCode::InvalidConfig, "unknown backend '" + std::string(text) + "'");
}

StoppingMode parse_stopping(std::string_view text) {
  if (text == "fixed") return StoppingMode::fixed;
  if (text == "adaptive") return StoppingMode::adaptive;
  throw Error(ErrorCode::InvalidConfig, "unknown stopping mode '" + std::string(text) + "'");
}

std::string to_json(const SelectionReport& r) {
  json config{{"alpha", r.config.alpha},
              {"lambda", r.config.lambda},
              {"budget_k", r.config.budget_k},
              {"stopping", to_string(r.config.stopping)},
              {"omega", r.config.omega},
              {"pool_size_m", r.config.pool_size_m ? json(*r.config.pool_size_m) : json(nullptr)},
              {"interval_T", r.config.interval_T},
              {"backend", to_string(r.config.backend)},
              {"adafisher", r.adafisher},
              {"eta", r.config.eta},
              {"seed", r.config.seed},
              {"persist_across_pools", r.config.persist_across_pools}};
  json selected = json::array();
  for (std::size_t i = 0; i < r.selected.size(); ++i) {
    selected.push_back({{"index", r.selected[i]}, {"id", i < r.selected_ids.size() ? r.selected_ids[i] : ""}});
  }
  json trace = json::array();
  for (const auto& s : r.trace) trace.push_back(step_to_json(s));
  json summary{{"utility", r.utility},
               {"k_eff", r.k_eff},
               {"stopped_early", r.stopped_early},
               {"t_stop", r.t_stop ? json(*r.t_stop) : json(nullptr)},
               {"total_conflict_penalty", r.total_conflict_penalty}};
  if (r.runtime_ms) summary["runtime_ms"] = *r.runtime_ms;

  json doc{{"schema", kSelectionReportSchema},
           {"schema_version", kSelectionReportVersion},
           {"tool_version", r.tool_version},
           {"input", {{"path", r.input_path}, {"checksum_fnv1a64", r.input_checksum}, {"n", r.n}, {"d", r.d}}},
           {"config", config},
           {"selected", selected},
           {"batches", r.batches},
           {"trace", trace},
           {"summary", summary}};
  return doc.dump(2) + "\n";
}

SelectionReport parse_selection_report(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed report: ") + e.what());
  }
  try {
    if (doc.value("schema", std::string()) != kSelectionReportSchema) {
      throw Error(ErrorCode::InvalidConfig, "not a selection report");
    }
    if (doc.at("schema_version").get<int>() > kSelectionReportVersion) {
      throw Error(ErrorCode::InvalidConfig, "report schema version is newer than this reader");
    }
    SelectionReport r;
    r.tool_version = doc.value("tool_version", std::string());
    const auto& input = doc.at("input");
    r.input_path = input.value("path", std::string());
    r.input_checksum = input.value("checksum_fnv1a64", std::string());
    r.n = input.at("n").get<std::size_t>();
    r.d = input.at("d").get<std::size_t>();

    const auto& c = doc.at("config");
    r.config.alpha = c.at("alpha").get<double>();
    r.config.lambda = c.at("lambda").get<double>();
    r.config.budget_k = c.at("budget_k").get<std::size_t>();
    r.config.stopping = parse_stopping(c.at("stopping").get<std::string>());
    r.config.omega = c.at("omega").get<double>();
    if (!c.at("pool_size_m").is_null()) r.config.pool_size_m = c.at("pool_size_m").get<std::size_t>();
    r.config.interval_T = c.at("interval_T").get<std::size_t>();
    r.config.backend = parse_backend(c.at("backend").get<std::string>());
    r.adafisher = c.value("adafisher", false);
    r.config.eta = c.at("eta").get<double>();
    r.config.seed = c.at("seed").get<std::uint64_t>();
    r.config.persist_across_pools = c.value("persist_across_pools", false);

    for (const auto& s : doc.at("selected")) {
      r.selected.push_back(s.at("index").get<std::size_t>());
      r.selected_ids.push_back(s.value("id", std::string()));
    }
    r.batches = doc.at("batches").get<std::vector<std::vector<std::size_t>>>();
    for (const auto& s : doc.at("trace")) r.trace.push_back(step_from_json(s));

    const auto& summary = doc.at("summary");
    r.utility = summary.at("utility").get<double>();
    r.k_eff = summary.at("k_eff").get<std::size_t>();
    r.stopped_early = summary.at("stopped_early").get<bool>();
    if (!summary.at("t_stop").is_null()) r.t_stop = summary.at("t_stop").get<std::size_t>();
    r.total_conflict_penalty = summary.at("total_conflict_penalty").get<double>();
    if (summary.contains("runtime_ms")) r.runtime_ms = summary.at("runtime_ms").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed report: ") + e.what());
  }
}

void write_trace_csv(std::ostream& out, const std::vector<StepRecord>& trace) {
  out << "pool_id,step_t,chosen_index,delta,base,epsilon,conflict,score,cumulative_utility\n";
  for (const auto& s : trace) {
    out << s.pool_id << ',' << s.step_t << ',' << s.chosen_index << ',' << csv_number(s.delta) << ','
        << csv_number(s.base) << ',' << csv_number(s.epsilon) << ',' << csv_number(s.conflict) << ','
        << csv_number(s.score) << ',' << csv_number(s.cumulative_utility) << '\n';
  }
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace spice
