#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spice/empirics.hpp"
#include "spice/epsilon_analysis.hpp"
#include "spice/error.hpp"
#include "spice/fisher_core.hpp"
#include "spice/gradient_store.hpp"
#include "spice/oracle.hpp"
#include "spice/report.hpp"
#include "spice/selector.hpp"

using json = nlohmann::json;

namespace {

struct InputOptions {
  std::string path;
  std::string format;
};

void add_input_options(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--input,-i", in.path, "Gradient file (SPGR binary or CSV)")->required();
  cmd->add_option("--format", in.format, "binary or csv; defaults from the file extension")
      ->check(CLI::IsMember({"binary", "csv"}));
}

spice::FileFormat resolve_format(const InputOptions& in) {
  if (in.format == "csv") return spice::FileFormat::csv;
  if (in.format == "binary") return spice::FileFormat::binary;
  const std::string ext = std::filesystem::path(in.path).extension().string();
  return ext == ".csv" ? spice::FileFormat::csv : spice::FileFormat::binary;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw spice::Error(spice::ErrorCode::IoError, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void emit(const std::string& text, const std::string& output) {
  if (output == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream f(output, std::ios::binary);
  if (!f) throw spice::Error(spice::ErrorCode::IoError, "cannot write '" + output + "'");
  f << text;
  if (!f) throw spice::Error(spice::ErrorCode::IoError, "write failed for '" + output + "'");
}

// --threads wins, then SPICE_THREADS, then 1.
std::size_t resolve_threads(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("SPICE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw spice::Error(spice::ErrorCode::InvalidConfig, "SPICE_THREADS must be a positive integer");
  }
  return 1;
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || item[0] == '-') {
      throw spice::Error(spice::ErrorCode::InvalidConfig, "bad index '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size()) throw spice::Error(spice::ErrorCode::InvalidConfig, "bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// The "delta" column of a trace CSV.
std::vector<double> read_trace_deltas(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw spice::Error(spice::ErrorCode::TruncatedPayload, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  const auto it = std::find(header.begin(), header.end(), "delta");
  if (it == header.end()) throw spice::Error(spice::ErrorCode::RaggedCsv, "trace has no 'delta' column");
  const auto col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw spice::Error(spice::ErrorCode::RaggedCsv, "ragged trace row");
    out.push_back(parse_double_list(cells[col]).at(0));
  }
  return out;
}

int run_select(const InputOptions& in, spice::SelectionConfig cfg, bool adafisher, std::size_t threads_flag,
               const std::string& output, const std::string& trace_path, bool deterministic) {
  const auto start = std::chrono::steady_clock::now();
  cfg.threads = resolve_threads(threads_flag);
  cfg.validate();
  const std::string bytes = read_file(in.path);
  spice::GradientSet gs = spice::load_gradients(in.path, resolve_format(in));
  if (adafisher) gs = spice::adafisher_transform(gs);

  const spice::SelectionResult result = spice::streaming_select(gs, cfg);

  spice::SelectionReport report;
  report.config = cfg;
  report.adafisher = adafisher;
  report.input_path = in.path;
  report.input_checksum = spice::fnv1a64_hex(bytes);
  report.n = gs.n();
  report.d = gs.d();
  report.selected = result.selected;
  for (const std::size_t i : result.selected) report.selected_ids.push_back(gs.ids()[i]);
  report.trace = result.trace;
  report.batches = result.batches;
  report.utility =
      spice::FisherState::from_subset(gs, result.selected, spice::ScalingParams(cfg.alpha), cfg.backend).logdet();
  report.k_eff = result.k_eff;
  report.stopped_early = result.stopped_early;
  report.t_stop = result.t_stop;
  for (const auto& s : result.trace) report.total_conflict_penalty += cfg.lambda * s.conflict;
  if (!trace_path.empty()) {
    std::ostringstream csv;
    spice::write_trace_csv(csv, result.trace);
    emit(csv.str(), trace_path);
  }
  if (!deterministic) {
    report.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  emit(spice::to_json(report), output);
  return spice::kExitOk;
}

json curvature_json(const spice::CurvatureReport& c) {
  return {{"c_empirical", c.c_empirical},
          {"c_bound", c.c_bound},
          {"argmin_sample", c.argmin_sample},
          {"guarantee_factor", c.guarantee_factor}};
}

int run_analyze(const InputOptions& in, double alpha_value, const std::string& backend_name,
                const std::string& subset_text, std::optional<double> rho, std::size_t threads_flag,
                const std::string& output) {
  const std::size_t threads = resolve_threads(threads_flag);
  const spice::ScalingParams alpha(alpha_value);
  const spice::Backend backend = spice::parse_backend(backend_name);
  const spice::GradientSet gs = spice::load_gradients(in.path, resolve_format(in));
  const std::vector<std::size_t> subset = parse_index_list(subset_text);

  spice::BoundCheckSummary summary;
  const auto records = spice::epsilon_records(gs, subset, alpha, backend, rho, &summary);
  json recs = json::array();
  double max_abs_eps = 0.0;
  for (const auto& r : records) {
    recs.push_back({{"index", r.index},
                    {"base", r.base},
                    {"delta", r.delta},
                    {"epsilon", r.epsilon},
                    {"interaction", r.interaction},
                    {"bound", r.bound ? json(*r.bound) : json(nullptr)}});
    max_abs_eps = std::max(max_abs_eps, std::abs(r.epsilon));
  }

  json doc{{"tool_version", spice::kToolVersion},
           {"n", gs.n()},
           {"d", gs.d()},
           {"alpha", alpha.alpha()},
           {"backend", spice::to_string(backend)},
           {"subset", subset},
           {"records", recs},
           {"max_abs_epsilon", max_abs_eps},
           {"bound_check",
            {{"checked", summary.checked},
             {"violations", summary.violations},
             {"undefined", summary.undefined},
             {"violation_rate", summary.violation_rate()},
             {"rho", summary.rho},
             {"g_max", summary.g_max},
             {"in_regime", summary.in_regime}}}};
  if (gs.n() < 2 || gs.n() > spice::kCurvatureMaxSamples) {
    doc["curvature"] = nullptr;
    doc["curvature_skipped"] = gs.n() < 2 ? "needs at least two samples" : "n exceeds the curvature cap";
  } else {
    try {
      doc["curvature"] = curvature_json(spice::curvature_empirical(gs, alpha, threads));
    } catch (const spice::Error& e) {
      if (e.code() != spice::ErrorCode::ZeroBaseSample) throw;
      doc["curvature"] = nullptr;
      doc["curvature_skipped"] = e.what();
    }
  }
  emit(doc.dump(2) + "\n", output);
  return spice::kExitOk;
}

int run_oracle(const InputOptions& in, std::size_t k, double alpha_value, double lambda, std::size_t trials,
               std::uint64_t seed, std::size_t threads_flag, const std::string& output) {
  const std::size_t threads = resolve_threads(threads_flag);
  const spice::ScalingParams alpha(alpha_value);
  if (!(lambda >= 0.0)) throw spice::Error(spice::ErrorCode::InvalidConfig, "lambda must be >= 0");
  const spice::GradientSet gs = spice::load_gradients(in.path, resolve_format(in));
  const auto r = spice::certify_approximation(gs, k, alpha, lambda, threads);
  json doc{{"tool_version", spice::kToolVersion},
           {"n", gs.n()},
           {"d", gs.d()},
           {"k", k},
           {"alpha", alpha.alpha()},
           {"lambda", lambda},
           {"optimum_value", r.optimum_value},
           {"optimum_set", r.optimum_set},
           {"greedy_value", r.greedy_value},
           {"greedy_set", r.greedy_set},
           {"ratio", r.ratio},
           {"classical_factor", 1.0 - std::exp(-1.0)},
           {"c_empirical", r.c_empirical},
           {"c_bound", r.c_bound},
           {"curvature_factor", r.guarantee},
           {"classical_bound_ok", r.classical_bound_ok},
           {"curvature_bound_ok", r.curvature_bound_ok}};
  if (trials > 0) {
    const auto sub = spice::verify_submodularity(gs, trials, seed, alpha);
    doc["submodularity"] = {{"trials", sub.trials},
                            {"violations", sub.violations},
                            {"strict", sub.strict},
                            {"min_margin", sub.min_margin}};
    doc["monotonicity_violations"] = spice::verify_monotonicity(gs, trials, seed, alpha);
  }
  emit(doc.dump(2) + "\n", output);
  return spice::kExitOk;
}

int run_synth(const spice::SynthConfig& cfg, const std::string& output, const std::string& format,
              const std::string& dtype) {
  cfg.validate();
  const spice::GradientSet gs = spice::generate_population(cfg);
  if (format == "csv") {
    spice::save_gradients_csv(gs, output);
  } else {
    spice::save_gradients(gs, output, dtype == "f32" ? spice::DType::f32 : spice::DType::f64);
  }
  return spice::kExitOk;
}

json decay_json(const spice::DecayMetrics& m) {
  return {{"half_life_t", m.half_life_t}, {"aumg", m.aumg}, {"steps", m.delta_sequence.size()}};
}

std::string csv_number(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

struct MetricsOptions {
  std::string deltas;
  std::string trace;
  std::string experiment;
  InputOptions in;
  std::size_t k = 32;
  double split_frac = 0.2;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::string csv;
  std::string scatter;
  std::string output = "-";
};

int run_metrics(const MetricsOptions& o) {
  if (o.experiment.empty()) {
    if (o.deltas.empty() == o.trace.empty()) {
      throw spice::Error(spice::ErrorCode::InvalidConfig, "give exactly one of --deltas, --trace or --experiment");
    }
    const auto seq = o.trace.empty() ? parse_double_list(o.deltas) : read_trace_deltas(o.trace);
    emit(decay_json(spice::decay_metrics(seq)).dump(2) + "\n", o.output);
    return spice::kExitOk;
  }
  if (o.in.path.empty()) throw spice::Error(spice::ErrorCode::InvalidConfig, "--experiment needs --input");
  const spice::ScalingParams alpha(o.alpha);
  const spice::GradientSet gs = spice::load_gradients(o.in.path, resolve_format(o.in));
  json doc{{"tool_version", spice::kToolVersion}, {"experiment", o.experiment}, {"n", gs.n()}, {"k", o.k}};

  if (o.experiment == "split") {
    const auto r = spice::conflict_split_experiment(gs, o.split_frac, o.k, alpha);
    doc["split_frac"] = o.split_frac;
    doc["low"] = decay_json(r.low);
    doc["high"] = decay_json(r.high);
    if (!o.csv.empty()) {
      std::string text = "group,step_t,delta\n";
      for (const auto* g : {&r.low, &r.high}) {
        for (std::size_t t = 0; t < g->delta_sequence.size(); ++t) {
          text += (g == &r.low ? "low," : "high,") + std::to_string(t + 1) + ',' + csv_number(g->delta_sequence[t]) +
                  '\n';
        }
      }
      emit(text, o.csv);
    }
  } else {
    const auto r = spice::correlation_experiment(gs, o.k, alpha, o.seed);
    doc["seed"] = o.seed;
    doc["rho_conflict_delta"] = r.rho_conflict_delta;
    doc["rho_conflict_abs_eps"] = r.rho_conflict_abs_eps;
    doc["s0"] = r.s0;
    if (!o.csv.empty()) {
      std::string text = "step,pool_size,chosen_index,chosen_delta,mean_conflict,mean_delta,rho\n";
      for (const auto& s : r.steps) {
        text += std::to_string(s.step) + ',' + std::to_string(s.pool_size) + ',' + std::to_string(s.chosen_index) + ',' +
                csv_number(s.chosen_delta) + ',' + csv_number(s.mean_conflict) + ',' + csv_number(s.mean_delta) +
                ',' + csv_number(s.rho) + '\n';
      }
      emit(text, o.csv);
    }
    if (!o.scatter.empty()) {
      std::string text = "index,conflict,epsilon\n";
      for (const auto& p : r.scatter) {
        text += std::to_string(p.index) + ',' + csv_number(p.conflict) + ',' + csv_number(p.epsilon) + '\n';
      }
      emit(text, o.scatter);
    }
  }
  emit(doc.dump(2) + "\n", o.output);
  return spice::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conflict-aware log-det data selection"};
  app.set_version_flag("--version", std::string(spice::kToolVersion));
  app.require_subcommand(1);

  // select
  InputOptions sel_in;
  spice::SelectionConfig sel_cfg;
  std::string sel_stop = "fixed", sel_backend = "dense", sel_output = "-", sel_trace;
  std::optional<std::size_t> sel_pool;
  bool sel_adafisher = false, sel_deterministic = false;
  std::size_t sel_threads = 0;
  auto* select = app.add_subcommand("select", "Run the conflict-penalized greedy selection");
  add_input_options(select, sel_in);
  select->add_option("--alpha", sel_cfg.alpha, "Fisher scaling")->capture_default_str();
  select->add_option("--lambda", sel_cfg.lambda, "Conflict penalty")->capture_default_str();
  select->add_option("--budget,-k", sel_cfg.budget_k, "Selections per pool")->capture_default_str();
  select->add_option("--stop", sel_stop, "fixed or adaptive")->check(CLI::IsMember({"fixed", "adaptive"}))
      ->capture_default_str();
  select->add_option("--omega", sel_cfg.omega, "Adaptive stopping ratio")->capture_default_str();
  select->add_option("--pool-size", sel_pool, "Streaming pool size m; unset means one global pool");
  select->add_option("--interval-t", sel_cfg.interval_T, "Pools per emitted batch")->capture_default_str();
  select->add_option("--backend", sel_backend, "dense or diagonal")->check(CLI::IsMember({"dense", "diagonal"}))
      ->capture_default_str();
  select->add_flag("--adafisher", sel_adafisher, "Select on effective vectors |g| * g");
  select->add_flag("--persist-across-pools", sel_cfg.persist_across_pools,
                   "Keep the Fisher state across the pools of one batch");
  select->add_option("--seed", sel_cfg.seed, "RNG seed")->capture_default_str();
  select->add_option("--output,-o", sel_output, "Report path, '-' for stdout")->capture_default_str();
  select->add_option("--trace", sel_trace, "Write the step trace CSV here");
  select->add_flag("--deterministic", sel_deterministic, "Omit timing from the report");
  select->add_option("--threads", sel_threads, "Scoring threads (default: SPICE_THREADS or 1)");

  // analyze
  InputOptions an_in;
  double an_alpha = 1.0;
  std::string an_backend = "dense", an_subset, an_output = "-";
  std::optional<double> an_rho;
  std::size_t an_threads = 0;
  bool an_deterministic = false;
  auto* analyze = app.add_subcommand("analyze", "Epsilon decomposition, curvature and bound checks");
  add_input_options(analyze, an_in);
  analyze->add_option("--alpha", an_alpha)->capture_default_str();
  analyze->add_option("--backend", an_backend)->check(CLI::IsMember({"dense", "diagonal"}))->capture_default_str();
  analyze->add_option("--subset", an_subset, "Comma-separated indices of S");
  analyze->add_option("--rho", an_rho, "Override rho (default alpha * ||F_S||)");
  analyze->add_option("--threads", an_threads);
  analyze->add_option("--output,-o", an_output)->capture_default_str();
  analyze->add_flag("--deterministic", an_deterministic, "Accepted for symmetry; output has no timing");

  // oracle
  InputOptions or_in;
  std::size_t or_k = 3, or_trials = 0, or_threads = 0;
  double or_alpha = 1.0, or_lambda = 0.0;
  std::uint64_t or_seed = 0;
  std::string or_output = "-";
  bool or_deterministic = false;
  auto* oracle = app.add_subcommand("oracle", "Greedy against the exhaustive optimum");
  add_input_options(oracle, or_in);
  oracle->add_option("--budget,-k", or_k)->capture_default_str();
  oracle->add_option("--alpha", or_alpha)->capture_default_str();
  oracle->add_option("--lambda", or_lambda)->capture_default_str();
  oracle->add_option("--submodularity-trials", or_trials, "Random chain checks to run")->capture_default_str();
  oracle->add_option("--seed", or_seed)->capture_default_str();
  oracle->add_option("--threads", or_threads);
  oracle->add_option("--output,-o", or_output)->capture_default_str();
  oracle->add_flag("--deterministic", or_deterministic, "Accepted for symmetry; output has no timing");

  // synth
  spice::SynthConfig syn;
  std::string syn_output, syn_format = "binary", syn_dtype = "f64";
  bool syn_deterministic = false;
  std::size_t syn_threads = 0;
  auto* synth = app.add_subcommand("synth", "Generate a two-cluster synthetic gradient population");
  synth->add_option("--n", syn.n)->capture_default_str();
  synth->add_option("--d", syn.d)->capture_default_str();
  synth->add_option("--conflict-frac", syn.conflict_frac)->capture_default_str();
  synth->add_option("--noise-sigma", syn.noise_sigma)->capture_default_str();
  synth->add_option("--norm-max", syn.norm_max)->capture_default_str();
  synth->add_option("--seed", syn.seed)->capture_default_str();
  synth->add_option("--output,-o", syn_output)->required();
  synth->add_option("--format", syn_format)->check(CLI::IsMember({"binary", "csv"}))->capture_default_str();
  synth->add_option("--dtype", syn_dtype)->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  synth->add_flag("--deterministic", syn_deterministic, "Accepted for symmetry; output is always deterministic");
  synth->add_option("--threads", syn_threads, "Accepted for symmetry; generation is sequential");

  // metrics
  MetricsOptions met;
  bool met_deterministic = false;
  std::size_t met_threads = 0;
  auto* metrics = app.add_subcommand("metrics", "Decay metrics and conflict experiments");
  metrics->add_option("--deltas", met.deltas, "Comma-separated marginal gains");
  metrics->add_option("--trace", met.trace, "Trace CSV with a delta column");
  metrics->add_option("--experiment", met.experiment)->check(CLI::IsMember({"split", "correlation"}));
  metrics->add_option("--input,-i", met.in.path);
  metrics->add_option("--format", met.in.format)->check(CLI::IsMember({"binary", "csv"}));
  metrics->add_option("--budget,-k", met.k)->capture_default_str();
  metrics->add_option("--split-frac", met.split_frac)->capture_default_str();
  metrics->add_option("--alpha", met.alpha)->capture_default_str();
  metrics->add_option("--seed", met.seed)->capture_default_str();
  metrics->add_option("--csv", met.csv, "Per-step experiment CSV");
  metrics->add_option("--scatter", met.scatter, "Per-sample scatter CSV (correlation)");
  metrics->add_option("--output,-o", met.output)->capture_default_str();
  metrics->add_flag("--deterministic", met_deterministic, "Accepted for symmetry; output has no timing");
  metrics->add_option("--threads", met_threads, "Accepted for symmetry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return spice::kExitConfigError;
  }

  try {
    if (*select) {
      sel_cfg.stopping = spice::parse_stopping(sel_stop);
      sel_cfg.backend = spice::parse_backend(sel_backend);
      sel_cfg.pool_size_m = sel_pool;
      return run_select(sel_in, sel_cfg, sel_adafisher, sel_threads, sel_output, sel_trace, sel_deterministic);
    }
    if (*analyze) return run_analyze(an_in, an_alpha, an_backend, an_subset, an_rho, an_threads, an_output);
    if (*oracle) return run_oracle(or_in, or_k, or_alpha, or_lambda, or_trials, or_seed, or_threads, or_output);
    if (*synth) return run_synth(syn, syn_output, syn_format, syn_dtype);
    if (*metrics) return run_metrics(met);
  } catch (const spice::Error& e) {
    std::cerr << "spice: " << e.what() << '\n';
    return spice::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "spice: " << e.what() << '\n';
    return spice::kExitFailure;
  }
  return spice::kExitFailure;
}
