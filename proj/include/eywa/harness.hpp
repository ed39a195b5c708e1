#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eywa/agent.hpp"
#include "eywa/backend.hpp"
#include "eywa/bench.hpp"
#include "eywa/metrics.hpp"
#include "eywa/orchestra.hpp"

namespace eywa {

struct RegistryDefaults {
  std::string chat;
  std::string ts_fm;
  std::string tab_fm;
  std::string planner;
  std::string control_policy = "always-invoke";
  std::size_t eywa_agents = 1;  // Eywa nodes in mas:<topology> systems
};

struct LoadedRegistry {
  std::shared_ptr<BackendRegistry> registry;
  RegistryDefaults defaults;
};

// Registry file:
//   {"backends": [{"backend_id", "kind", "mock" | "endpoint" | "openai", ...}],
//    "defaults": {"chat", "ts_fm", "tab_fm", "planner", "control_policy", "eywa_agents"}}
// Throws eywa::Error("config") / ("io").
LoadedRegistry parse_registry(const nlohmann::json& j);
LoadedRegistry load_registry(const std::filesystem::path& path);

struct RunConfig {
  std::filesystem::path bench_path;
  std::string system = "llm";  // llm | eywa-agent | mas:<topology> | orchestra
  std::filesystem::path registry_path;
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::filesystem::path out_path;
  std::size_t repeats = 1;
  std::optional<std::size_t> eywa_agents;
};

struct InstanceRecord {
  std::size_t index = 0;
  std::size_t repeat = 0;
  std::string domain;
  std::string parent_domain;
  std::string task;
  std::string system;
  std::string final_answer;
  metrics::UtilityScore score;
  std::string status;
  std::string cause;
  int attempts = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t llm_tokens = 0;
  std::int64_t payload_tokens = 0;
  std::int64_t calls = 0;
  std::int64_t wall_clock_ms = 0;
  std::optional<nlohmann::ordered_json> config;  // orchestra only

  std::int64_t total_tokens() const { return input_tokens + output_tokens; }
};

struct SliceRow {
  metrics::SliceSummary utility;
  double mean_wall_clock_ms = 0;
  double mean_tokens = 0;
};

struct RunReport {
  std::string system;
  std::string bench_path;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t repeats = 1;
  std::vector<InstanceRecord> records;
  std::map<std::string, SliceRow> sub_domains;
  std::map<std::string, SliceRow> parent_domains;
  SliceRow overall;
  std::vector<double> repeat_means;
  std::int64_t total_tokens = 0;

  nlohmann::ordered_json to_json(bool include_timing = true) const;
  static RunReport from_json(const nlohmann::json& j);
};

struct RunOutput {
  RunReport report;
  std::vector<SystemTrace> traces;  // parallel to report.records
};

// Core loop used by the CLI: runs `system` on every instance (times repeats),
// scores, aggregates. Per-instance failures are recorded, never thrown.
RunOutput run_system(const BenchmarkSet& bench, const std::string& system, const LoadedRegistry& registry,
                     std::size_t workers = 1, std::uint64_t seed = 0, std::size_t repeats = 1);

// Loads files, runs, writes the report (and <out>.traces.jsonl).
RunReport run(const RunConfig& config);

// One episode of the selected system on one task.
struct SystemResult {
  EpisodeOutcome outcome;
  std::optional<OrchestraConfig> config;
};
SystemResult execute_system(const TaskInstance& task, const std::string& system, const LoadedRegistry& registry);

// Fills slice summaries, totals and repeat means from the records.
void summarize(RunReport& report);

// Rows = systems, columns = the nine sub-domains + overall, three lines per
// system (utility, time, tokens). Empty slices render as an em dash.
std::string report_table(const std::vector<RunReport>& reports);
std::string report_csv(const std::vector<RunReport>& reports);

// predictions: JSON-Lines {"index": i, "prediction": text}.
nlohmann::ordered_json score_predictions(const BenchmarkSet& bench, std::string_view predictions_jsonl);

}  // namespace eywa
