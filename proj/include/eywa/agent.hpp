#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eywa/backend.hpp"
#include "eywa/bench.hpp"

namespace eywa {

inline constexpr int kMaxRetries = 2;            // 3 attempts in total
inline constexpr int kMaxStepsPerAttempt = 8;
inline constexpr std::string_view kRetryNotice =
    "Your previous output could not be parsed. Reply with only the required format.";

// One entry of z^(0..t). Roles: system, user, assistant, tool.
struct ContextEntry {
  std::string role;
  std::string content;
  std::string provenance;  // tool entries only

  bool operator==(const ContextEntry&) const = default;
};

enum class Action { kSkip, kInvoke };

struct ControlDecision {
  Action action = Action::kSkip;
  std::optional<std::string> target;
  // llm-induced decisions already hold the model's reply; step() reuses it
  // instead of asking again.
  std::optional<std::string> reply;

  static ControlDecision skip() { return {}; }
  static ControlDecision invoke(std::string target) { return {Action::kInvoke, std::move(target), std::nullopt}; }
  bool operator==(const ControlDecision&) const = default;
};

enum class PolicyKind { kAlwaysSkip, kAlwaysInvoke, kScripted, kLlmInduced };

struct ControlPolicy {
  PolicyKind kind = PolicyKind::kAlwaysSkip;
  std::vector<ControlDecision> script;  // kScripted only; exhausted => skip

  // "always-skip" | "always-invoke" | "llm-induced". Scripted policies are built in code.
  static ControlPolicy parse(std::string_view name);
  std::string_view name() const;
  bool can_invoke() const;
};

struct AgentSpec {
  std::string agent_id = "agent";
  std::string role_prompt;
  std::string chat_backend;
  bool eywa = false;
  std::optional<std::string> fm_backend;
  ControlPolicy policy;

  // eywa <=> fm_backend present; policy other than always-skip needs eywa.
  // Throws eywa::Error("config").
  void check() const;
};

struct AgentState {
  const TaskInstance* task = nullptr;
  std::vector<ContextEntry> context_entries;
  int attempt = 1;
  ParsedPayload parsed_payload;
  std::size_t decisions = 0;
  std::size_t invocations = 0;
  std::int64_t input_tokens = 0;  // tokens of the input block (payload or handle)
  const BackendDescriptor* fm = nullptr;  // set when the FM can serve this task
};

// One backend call as seen by the episode. payload_tokens counts the
// language tokens attributable to the task payload: serialized input or data
// handle, CALL markers, adapted tool blocks and the reply itself.
struct CallRecord {
  std::string agent_id;
  std::string backend_id;
  std::string task_type;
  UsageRecord usage;
  bool ok = true;
  std::string error_code;
  std::int64_t payload_tokens = 0;
};

struct MessageEnvelope {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t round = 0;
  std::string body;

  bool operator==(const MessageEnvelope&) const = default;
};

struct TraceEvent {
  std::string kind;
  std::string detail;
};

struct SystemTrace {
  std::vector<std::vector<std::vector<ContextEntry>>> round_states;  // [round][agent]
  std::vector<MessageEnvelope> envelopes;
  std::vector<CallRecord> calls;
  std::vector<TraceEvent> events;
  std::vector<ContextEntry> pre_answer_state;
  std::map<std::string, int> attempts;
  std::string final_answer;

  std::int64_t total_tokens() const;
  std::int64_t llm_tokens() const;       // chat backends only
  std::int64_t payload_tokens() const;   // summed CallRecord::payload_tokens
  nlohmann::ordered_json to_json(bool include_timing = true) const;
};

enum class EpisodeStatus { kOk, kParseFailed, kBackendFailed };
std::string_view status_label(EpisodeStatus s);

struct EpisodeOutcome {
  std::string final_answer;
  SystemTrace trace;
  EpisodeStatus status = EpisodeStatus::kOk;
  int attempts = 0;
  std::string failure_cause;
  std::vector<ContextEntry> transcript;  // answering agent's context
};

struct PromptBundle {
  std::string task_label;
  std::string mcp_server_description;
  std::string additional_instructions;
  std::string input_tag;
  std::string input_data;
  std::string output_size;
  std::string output_format;
};

std::string render_prompt(const PromptBundle& bundle);

// The full payload as prompt text (LLM-only path).
std::string serialize_input(const TaskInstance& task);

// Size summary shown instead of the payload when a foundation model holds the data.
std::string data_handle(const TaskInstance& task, const ParsedPayload& payload);

// Builds the bundle for a task. With `fm` set the agent sees the data handle and
// the tool description; otherwise the full serialized input.
PromptBundle make_prompt_bundle(const TaskInstance& task, const BackendDescriptor* fm);

// Runs one agent over one task. Calls are appended to the shared trace.
class Agent {
 public:
  Agent(AgentSpec spec, const BackendRegistry& registry, SystemTrace& trace);

  const AgentSpec& spec() const { return spec_; }

  // Initial state: optional role prompt (system) and the rendered task prompt (user).
  AgentState start(const TaskInstance& task) const;

  // Throws eywa::Error("unknown_backend") for an invoke naming an unregistered backend.
  ControlDecision decide(AgentState& state) const;

  // Skip appends the chat reply; invoke appends the CALL marker and the adapted
  // tool block. Throws eywa::Error("backend_failed") leaving the state untouched.
  void step(AgentState& state, const ControlDecision& decision) const;

  // decide/step until a reply without a tool call; nullopt when the step
  // bound is hit.
  std::optional<std::string> think(AgentState& state) const;

  // Answer loop with the parse-retry budget, starting from `state`.
  EpisodeOutcome answer(AgentState& state) const;

  EpisodeOutcome run_episode(const TaskInstance& task) const;

 private:
  std::string chat(AgentState& state) const;
  std::string call_marker(const std::string& target) const { return "CALL " + target; }

  AgentSpec spec_;
  const BackendRegistry& registry_;
  SystemTrace& trace_;
};

// Convenience wrapper: fresh trace, one episode.
EpisodeOutcome run_episode(const TaskInstance& task, const AgentSpec& spec, const BackendRegistry& registry);

// The `CALL <id>` line of a reply, if any.
std::optional<std::string> parse_call_marker(std::string_view reply);

}  // namespace eywa
