#include "eywa/agent.hpp"

#include "eywa/answer.hpp"
#include "eywa/error.hpp"
#include "eywa/text.hpp"

namespace eywa {

// ---------------------------------------------------------------- policy / spec

ControlPolicy ControlPolicy::parse(std::string_view name) {
  ControlPolicy p;
  if (name == "always-skip")
    p.kind = PolicyKind::kAlwaysSkip;
  else if (name == "always-invoke")
    p.kind = PolicyKind::kAlwaysInvoke;
  else if (name == "llm-induced")
    p.kind = PolicyKind::kLlmInduced;
  else if (name == "scripted")
    p.kind = PolicyKind::kScripted;
  else
    throw Error("config", "unknown control policy '" + std::string(name) + "'");
  return p;
}

std::string_view ControlPolicy::name() const {
  switch (kind) {
    case PolicyKind::kAlwaysSkip: return "always-skip";
    case PolicyKind::kAlwaysInvoke: return "always-invoke";
    case PolicyKind::kScripted: return "scripted";
    case PolicyKind::kLlmInduced: return "llm-induced";
  }
  return "";
}

bool ControlPolicy::can_invoke() const {
  if (kind == PolicyKind::kAlwaysSkip) return false;
  if (kind == PolicyKind::kScripted) {
    for (const auto& d : script)
      if (d.action == Action::kInvoke) return true;
    return false;
  }
  return true;
}

void AgentSpec::check() const {
  if (chat_backend.empty()) throw Error("config", "agent '" + agent_id + "' names no chat backend");
  if (eywa && !fm_backend) throw Error("config", "eywa agent '" + agent_id + "' needs a foundation model");
  if (!eywa && fm_backend) throw Error("config", "agent '" + agent_id + "' is not an eywa agent but names a foundation model");
  if (!eywa && policy.kind != PolicyKind::kAlwaysSkip)
    throw Error("config", "agent '" + agent_id + "' cannot invoke without a foundation model");
}

// ---------------------------------------------------------------- trace

std::string_view status_label(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::kOk: return "ok";
    case EpisodeStatus::kParseFailed: return "parse_failed";
    case EpisodeStatus::kBackendFailed: return "backend_failed";
  }
  return "";
}

std::int64_t SystemTrace::total_tokens() const {
  std::int64_t n = 0;
  for (const auto& c : calls) n += c.usage.total();
  return n;
}

std::int64_t SystemTrace::llm_tokens() const {
  std::int64_t n = 0;
  for (const auto& c : calls)
    if (c.task_type == "chat") n += c.usage.total();
  return n;
}

std::int64_t SystemTrace::payload_tokens() const {
  std::int64_t n = 0;
  for (const auto& c : calls) n += c.payload_tokens;
  return n;
}

namespace {

nlohmann::ordered_json entries_json(const std::vector<ContextEntry>& entries) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["role"] = e.role;
    j["content"] = e.content;
    if (!e.provenance.empty()) j["provenance"] = e.provenance;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

nlohmann::ordered_json SystemTrace::to_json(bool include_timing) const {
  nlohmann::ordered_json j;
  auto rounds = nlohmann::ordered_json::array();
  for (const auto& round : round_states) {
    auto agents = nlohmann::ordered_json::array();
    for (const auto& state : round) agents.push_back(entries_json(state));
    rounds.push_back(std::move(agents));
  }
  j["round_states"] = std::move(rounds);
  auto env = nlohmann::ordered_json::array();
  for (const auto& e : envelopes) env.push_back({{"from", e.from}, {"to", e.to}, {"round", e.round}, {"body", e.body}});
  j["envelopes"] = std::move(env);
  auto calls_json = nlohmann::ordered_json::array();
  for (const auto& c : calls) {
    nlohmann::ordered_json cj;
    cj["agent_id"] = c.agent_id;
    cj["backend_id"] = c.backend_id;
    cj["task_type"] = c.task_type;
    cj["ok"] = c.ok;
    if (!c.ok) cj["error_code"] = c.error_code;
    cj["input_tokens"] = c.usage.input_tokens;
    cj["output_tokens"] = c.usage.output_tokens;
    cj["payload_tokens"] = c.payload_tokens;
    if (include_timing) cj["wall_clock_ms"] = c.usage.wall_clock_ms;
    calls_json.push_back(std::move(cj));
  }
  j["calls"] = std::move(calls_json);
  auto ev = nlohmann::ordered_json::array();
  for (const auto& e : events) ev.push_back({{"kind", e.kind}, {"detail", e.detail}});
  j["events"] = std::move(ev);
  j["pre_answer_state"] = entries_json(pre_answer_state);
  j["attempts"] = attempts;
  j["final_answer"] = final_answer;
  return j;
}

// ---------------------------------------------------------------- prompts

std::string render_prompt(const PromptBundle& b) {
  std::string out = "You are an expert in " + b.task_label + ".";
  if (!b.mcp_server_description.empty()) out += " " + b.mcp_server_description + ".";
  if (!b.additional_instructions.empty()) out += " " + b.additional_instructions;
  out += "\n\n<" + b.input_tag + ">\n" + b.input_data + "\n</" + b.input_tag + ">\n\n";
  out += "<output_size>\n" + b.output_size + "\n</output_size>\n\n";
  out += b.output_format;
  return out;
}

std::string serialize_input(const TaskInstance& task) {
  switch (task.kind()) {
    case TaskKind::kForecast: return serialize_series_csv(parse_series_csv(task.input));
    case TaskKind::kTabularClassification:
    case TaskKind::kTabularRegression:
      return serialize_table_csv(parse_table_csv(task.input, infer_target_column(task.input)));
    case TaskKind::kNaturalLanguage: break;
  }
  return task.input;
}

std::string data_handle(const TaskInstance& task, const ParsedPayload& payload) {
  if (const auto* s = std::get_if<Series>(&payload))
    return "[time series held by the tool server: " + std::to_string(s->size()) + " points, columns timestamp,value]";
  if (const auto* t = std::get_if<Table>(&payload))
    return "[table held by the tool server: " + std::to_string(t->rows.size()) + " rows, " +
           std::to_string(t->columns.size()) + " columns, target " + t->target_column + ", " +
           std::to_string(t->masked_rows.size()) + " masked rows]";
  return task.input;
}

namespace {

std::string task_phrase(TaskKind kind) {
  switch (kind) {
    case TaskKind::kNaturalLanguage: return "scientific question answering";
    case TaskKind::kForecast: return "time series forecasting";
    case TaskKind::kTabularClassification: return "tabular classification";
    case TaskKind::kTabularRegression: return "tabular regression";
  }
  return "";
}

std::string input_tag(TaskKind kind) {
  switch (kind) {
    case TaskKind::kNaturalLanguage: return "question";
    case TaskKind::kForecast: return "time_series";
    default: return "table";
  }
}

}  // namespace

PromptBundle make_prompt_bundle(const TaskInstance& task, const BackendDescriptor* fm) {
  TaskKind kind = task.kind();
  PromptBundle b;
  b.task_label = task_phrase(kind) + " for the " + task.domain + " domain";
  b.input_tag = input_tag(kind);
  b.output_size = std::to_string(task.output_size);

  std::string target;
  ParsedPayload payload = parse_payload(task);
  if (const auto* t = std::get_if<Table>(&payload)) target = t->target_column;

  b.additional_instructions = std::string(text::trim(task.description));
  if (!target.empty()) {
    if (!b.additional_instructions.empty()) b.additional_instructions += " ";
    b.additional_instructions += "Rows whose " + target + " cell is " + std::string(kMaskToken) + " are the rows to predict.";
  }

  if (fm) {
    b.mcp_server_description = "The foundation model " + fm->backend_id + " is available through the tool server (" +
                               fm->description + "); reply with the single line CALL " + fm->backend_id +
                               " to run it on the input data";
    b.input_data = data_handle(task, payload);
  } else {
    b.input_data = serialize_input(task);
  }

  switch (kind) {
    case TaskKind::kForecast:
      b.output_format = "Return the forecast as CSV: the header line timestamp,value followed by exactly " +
                        b.output_size + " rows, one per future timestamp, and nothing else.";
      break;
    case TaskKind::kTabularClassification:
    case TaskKind::kTabularRegression:
      b.output_format = "Return exactly " + b.output_size + " predicted " + target +
                        " values, one per line in masked-row order, and nothing else.";
      break;
    case TaskKind::kNaturalLanguage:
      b.output_format = task.output_size > 0
                            ? "Reply with the final answer only, at most " + b.output_size + " characters."
                            : "Reply with the final answer only.";
      break;
  }
  return b;
}

std::optional<std::string> parse_call_marker(std::string_view reply) {
  for (const auto& line : text::split_lines(reply)) {
    auto t = text::trim(line);
    if (t.size() > 5 && t.substr(0, 5) == "CALL ") {
      auto id = text::trim(t.substr(5));
      if (!id.empty() && id.find_first_of(" \t") == std::string_view::npos) return std::string(id);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- agent

Agent::Agent(AgentSpec spec, const BackendRegistry& registry, SystemTrace& trace)
    : spec_(std::move(spec)), registry_(registry), trace_(trace) {
  spec_.check();
}

AgentState Agent::start(const TaskInstance& task) const {
  const Backend* chat_backend = registry_.find(spec_.chat_backend);
  if (!chat_backend) throw Error("unknown_backend", "no backend registered as '" + spec_.chat_backend + "'");
  if (chat_backend->descriptor().kind != BackendKind::kChatLlm)
    throw Error("config", "'" + spec_.chat_backend + "' is not a chat backend");

  AgentState state;
  state.task = &task;
  state.parsed_payload = parse_payload(task);
  if (spec_.eywa) {
    const Backend* fm = registry_.find(*spec_.fm_backend);
    if (!fm) throw Error("unknown_backend", "no backend registered as '" + *spec_.fm_backend + "'");
    if (fm->descriptor().supports(task.kind()) && fm->descriptor().kind != BackendKind::kChatLlm)
      state.fm = &fm->descriptor();
    else
      trace_.events.push_back({"fm_unsupported", spec_.agent_id + ": " + *spec_.fm_backend + " cannot serve " +
                                                     std::string(canonical_task_label(task.kind()))});
  }
  // Only a policy that can actually call the model changes what the agent sees;
  // an always-skip Eywa agent is prompted exactly like the LLM-only baseline.
  const BackendDescriptor* shown = spec_.policy.can_invoke() ? state.fm : nullptr;
  PromptBundle bundle = make_prompt_bundle(task, shown);
  state.input_tokens = count_tokens_mock(bundle.input_data);
  if (!spec_.role_prompt.empty()) state.context_entries.push_back({"system", spec_.role_prompt, {}});
  state.context_entries.push_back({"user", render_prompt(bundle), {}});
  return state;
}

std::string Agent::chat(AgentState& state) const {
  InvocationRequest req;
  req.backend_id = spec_.chat_backend;
  req.task_type = InvocationType::kChat;
  ChatPayload payload;
  std::int64_t payload_tokens = state.input_tokens;
  for (const auto& e : state.context_entries) {
    payload.messages.push_back({e.role, e.content});
    if (e.role == "tool" || (e.role == "assistant" && parse_call_marker(e.content)))
      payload_tokens += count_tokens_mock(e.content);
  }
  req.payload = std::move(payload);
  InvocationResult res = invoke(req, registry_);
  CallRecord rec{spec_.agent_id, spec_.chat_backend, "chat", res.usage, res.ok(), {}, 0};
  const std::string* reply = res.ok() && res.output ? std::get_if<std::string>(&*res.output) : nullptr;
  if (!res.ok() || !reply) {
    rec.ok = false;
    rec.error_code = res.error ? res.error->code : "backend";
    trace_.calls.push_back(rec);
    throw Error("backend_failed", spec_.chat_backend + ": " + (res.error ? res.error->message : "non-text chat output"));
  }
  rec.payload_tokens = payload_tokens + count_tokens_mock(*reply);
  trace_.calls.push_back(rec);
  return *reply;
}

ControlDecision Agent::decide(AgentState& state) const {
  ControlDecision d;
  switch (spec_.policy.kind) {
    case PolicyKind::kAlwaysSkip: break;
    case PolicyKind::kAlwaysInvoke:
      if (state.invocations == 0 && state.fm) d = ControlDecision::invoke(state.fm->backend_id);
      break;
    case PolicyKind::kScripted:
      if (state.decisions < spec_.policy.script.size()) d = spec_.policy.script[state.decisions];
      break;
    case PolicyKind::kLlmInduced: {
      std::string reply = chat(state);
      if (auto target = parse_call_marker(reply)) d = ControlDecision::invoke(*target);
      d.reply = std::move(reply);
      break;
    }
  }
  ++state.decisions;
  if (d.action == Action::kInvoke) {
    if (!d.target || !registry_.contains(*d.target))
      throw Error("unknown_backend", "invoke names unregistered backend '" + d.target.value_or("") + "'");
  }
  return d;
}

void Agent::step(AgentState& state, const ControlDecision& decision) const {
  if (decision.action == Action::kSkip) {
    std::string reply = decision.reply ? *decision.reply : chat(state);
    state.context_entries.push_back({"assistant", std::move(reply), {}});
    return;
  }
  const Backend* target = registry_.find(*decision.target);
  if (!target) throw Error("unknown_backend", "invoke names unregistered backend '" + *decision.target + "'");

  InvocationRequest req;
  try {
    req = compile_query(*state.task, state.parsed_payload, target->descriptor());
  } catch (const Error& e) {
    trace_.events.push_back({"compile_failed", spec_.agent_id + ": " + e.what()});
    throw Error("backend_failed", e.what());
  }
  InvocationResult res = invoke(req, registry_);
  CallRecord rec{spec_.agent_id, req.backend_id, std::string(invocation_type_label(req.task_type)), res.usage,
                 res.ok(), res.error ? res.error->code : "", 0};
  trace_.calls.push_back(rec);
  if (!res.ok()) throw Error("backend_failed", req.backend_id + ": " + res.error->code + ": " + res.error->message);

  AdaptedContext ctx = adapt_response(res, kDefaultAdapterBudget, request_digest(req));
  state.context_entries.push_back({"assistant", decision.reply ? *decision.reply : call_marker(req.backend_id), {}});
  state.context_entries.push_back({"tool", std::move(ctx.text_block), std::move(ctx.provenance)});
  ++state.invocations;
}

std::optional<std::string> Agent::think(AgentState& state) const {
  for (int s = 0; s < kMaxStepsPerAttempt; ++s) {
    ControlDecision d = decide(state);
    step(state, d);
    if (d.action == Action::kSkip && !parse_call_marker(state.context_entries.back().content))
      return state.context_entries.back().content;
  }
  trace_.events.push_back({"step_limit", spec_.agent_id + ": no final answer within " +
                                             std::to_string(kMaxStepsPerAttempt) + " steps"});
  return std::nullopt;
}

EpisodeOutcome Agent::answer(AgentState& state) const {
  EpisodeOutcome out;
  trace_.pre_answer_state = state.context_entries;
  for (state.attempt = 1;; ++state.attempt) {
    trace_.attempts[spec_.agent_id] = state.attempt;
    out.attempts = state.attempt;
    std::optional<std::string> candidate;
    try {
      candidate = think(state);
    } catch (const Error& e) {
      out.status = EpisodeStatus::kBackendFailed;
      out.failure_cause = e.what();
      trace_.events.push_back({"backend_failed", spec_.agent_id + ": " + e.what()});
      break;
    }
    std::string why = "step limit reached";
    if (candidate) {
      try {
        check_answer(*candidate, *state.task);
        out.status = EpisodeStatus::kOk;
        out.final_answer = *candidate;
        break;
      } catch (const Error& e) {
        why = e.what();
      }
    }
    trace_.events.push_back({"parse_failed", spec_.agent_id + " attempt " + std::to_string(state.attempt) + ": " + why});
    if (state.attempt > kMaxRetries) {
      out.status = EpisodeStatus::kParseFailed;
      out.failure_cause = why;
      break;
    }
    state.context_entries.push_back({"user", std::string(kRetryNotice), {}});
  }
  trace_.final_answer = out.final_answer;
  out.transcript = state.context_entries;
  return out;
}

EpisodeOutcome Agent::run_episode(const TaskInstance& task) const {
  AgentState state = start(task);
  return answer(state);
}

EpisodeOutcome run_episode(const TaskInstance& task, const AgentSpec& spec, const BackendRegistry& registry) {
  SystemTrace trace;
  Agent agent(spec, registry, trace);
  EpisodeOutcome out = agent.run_episode(task);
  out.trace = std::move(trace);
  return out;
}

}  // namespace eywa
