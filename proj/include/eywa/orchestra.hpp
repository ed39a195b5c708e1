#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eywa/agent.hpp"
#include "eywa/mas.hpp"

namespace eywa {

// Agent entry of a multi-agent configuration.
struct ConfigAgent {
  std::string agent_id;
  std::string role_prompt;
  std::string model;
  bool eywa = false;
  std::optional<std::string> foundation_model;

  bool operator==(const ConfigAgent&) const = default;
};

struct OrchestraConfig {
  bool eywa = false;
  std::string setting = "single-agent";  // single-agent | multi-agent
  std::optional<std::string> model;
  std::optional<std::string> multi_agent_type;
  std::optional<std::string> foundation_model;
  std::vector<ConfigAgent> agents;

  nlohmann::ordered_json to_json() const;
  bool operator==(const OrchestraConfig&) const = default;
};

struct ConfigSpace {
  std::vector<std::string> llm_pool;
  std::vector<std::string> fm_pool;
  std::vector<std::string> topology_pool = eywa::topology_pool();

  // Single-agent configs (LLM-only per model, then Eywa per model x FM),
  // followed by homogeneous multi-agent configs per topology at default size.
  std::vector<OrchestraConfig> enumerate() const;
};

struct ConductorDecision {
  std::string raw_planner_reply;
  OrchestraConfig config;
  UsageRecord planner_usage;
};

// Throws eywa::Error("empty_pool"). Descriptions come from the registry when given.
std::string render_planner_prompt(const TaskInstance& task, const ConfigSpace& space,
                                  const BackendRegistry* registry = nullptr);

// Throws eywa::Error("invalid_config") whose message names the violated rule.
// `fenced` reports whether a single code fence had to be stripped.
OrchestraConfig parse_and_validate_config(std::string_view reply, const ConfigSpace& space, bool* fenced = nullptr);

struct ExecutionOptions {
  std::string control_policy = "always-invoke";  // for Eywa agents
};

// A configured system ready to run on a task.
struct ExecutableSystem {
  TopologySpec topology;
  std::vector<AgentSpec> agents;
  std::vector<TraceEvent> notes;  // instantiation remarks copied into the trace

  EpisodeOutcome run(const TaskInstance& task, const BackendRegistry& registry) const;
};

ExecutableSystem instantiate(const OrchestraConfig& config, const BackendRegistry& registry,
                             const ExecutionOptions& options = {});

struct OrchestraOutcome {
  EpisodeOutcome outcome;
  OrchestraConfig config;
  std::string raw_planner_reply;
  bool fallback = false;
};

// Plans (with the parse-retry budget on the planner's JSON), instantiates and
// executes. Planner calls land in the outcome's trace ahead of execution calls.
OrchestraOutcome run_orchestra(const TaskInstance& task, const ConfigSpace& space, const std::string& planner_backend,
                               const BackendRegistry& registry, const ExecutionOptions& options = {});

using Scorer = std::function<double(const TaskInstance&, const EpisodeOutcome&)>;
// Utility of an outcome: 0 unless the episode finished ok.
double default_scorer(const TaskInstance& task, const EpisodeOutcome& outcome);

struct OracleReport {
  std::vector<OrchestraConfig> configs;
  std::vector<std::vector<double>> losses;  // [task][config], loss = 1 - utility
  std::vector<std::size_t> best_config;      // per task, first minimizer
  double oracle_mean_loss = 0;
  std::vector<double> fixed_mean_losses;     // per config
};

// Runs every config on every task twice. Throws eywa::Error("nondeterministic")
// when the two runs disagree.
OracleReport oracle_conductor(const std::vector<TaskInstance>& tasks, const std::vector<OrchestraConfig>& configs,
                              const BackendRegistry& registry, const Scorer& scorer = default_scorer,
                              const ExecutionOptions& options = {});
OracleReport oracle_conductor(const std::vector<TaskInstance>& tasks, const ConfigSpace& space,
                              const BackendRegistry& registry, const Scorer& scorer = default_scorer,
                              const ExecutionOptions& options = {});

}  // namespace eywa
