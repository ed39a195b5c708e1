#include "eywa/orchestra.hpp"

#include <algorithm>
#include <set>

#include "eywa/error.hpp"
#include "eywa/metrics.hpp"
#include "eywa/text.hpp"

namespace eywa {
namespace {

using nlohmann::json;

[[noreturn]] void reject(const std::string& rule) { throw Error("invalid_config", rule); }

bool in_pool(const std::vector<std::string>& pool, const std::string& id) {
  return std::find(pool.begin(), pool.end(), id) != pool.end();
}

std::optional<std::string> nullable_string(const json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) reject(std::string("\"") + key + "\" must be a string or null");
  return v.get<std::string>();
}

// Minimum/maximum agent count each pool topology accepts.
bool size_fits(const std::string& topology, std::size_t n) {
  if (topology == "single") return n == 1;
  if (topology == "refine") return n == 2;
  if (topology == "star") return n >= 2;
  return n >= 1;
}

std::size_t default_rounds(const std::string& topology) { return default_topology(topology).rounds; }

std::string describe(const std::string& id, const BackendRegistry* registry) {
  if (registry)
    if (const Backend* b = registry->find(id); b && !b->descriptor().description.empty())
      return "- " + id + ": " + b->descriptor().description;
  return "- " + id;
}

std::string topology_line(const std::string& name) {
  if (name == "single") return "- single: one agent answers alone";
  if (name == "refine") return "- refine: an author and a critic exchange drafts; the author answers";
  if (name == "debate") return "- debate: every agent sees every other agent's messages; the first agent answers";
  if (name == "star") return "- star: workers report to an aggregator (the last agent), which answers";
  return "- " + name;
}

ConfigAgent parse_agent(const json& a, const ConfigSpace& space, std::size_t index) {
  std::string where = "agents[" + std::to_string(index) + "]";
  if (!a.is_object()) reject(where + " must be an agent spec object");
  for (const char* key : {"agent_id", "role_prompt", "model", "eywa", "foundation_model"})
    if (!a.contains(key)) reject(where + " is missing \"" + key + "\"");
  ConfigAgent out;
  if (!a.at("agent_id").is_string() || a.at("agent_id").get<std::string>().empty())
    reject(where + ".agent_id must be a non-empty string");
  out.agent_id = a.at("agent_id").get<std::string>();
  if (!a.at("role_prompt").is_string()) reject(where + ".role_prompt must be a string");
  out.role_prompt = a.at("role_prompt").get<std::string>();
  if (!a.at("model").is_string() || !in_pool(space.llm_pool, a.at("model").get<std::string>()))
    reject(where + ".model must be a valid model string");
  out.model = a.at("model").get<std::string>();
  if (!a.at("eywa").is_boolean()) reject(where + ".eywa must be a boolean");
  out.eywa = a.at("eywa").get<bool>();
  const auto& fm = a.at("foundation_model");
  if (!fm.is_null()) {
    if (!fm.is_string() || !in_pool(space.fm_pool, fm.get<std::string>()))
      reject(where + ".foundation_model should be in the available foundation models or null");
    out.foundation_model = fm.get<std::string>();
  }
  return out;
}

}  // namespace

nlohmann::ordered_json OrchestraConfig::to_json() const {
  auto opt = [](const std::optional<std::string>& s) { return s ? nlohmann::ordered_json(*s) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["eywa"] = eywa;
  j["setting"] = setting;
  j["model"] = opt(model);
  j["multi_agent_type"] = opt(multi_agent_type);
  j["foundation_model"] = opt(foundation_model);
  j["agents"] = nlohmann::ordered_json::array();
  for (const auto& a : agents) {
    nlohmann::ordered_json aj;
    aj["agent_id"] = a.agent_id;
    aj["role_prompt"] = a.role_prompt;
    aj["model"] = a.model;
    aj["eywa"] = a.eywa;
    aj["foundation_model"] = opt(a.foundation_model);
    j["agents"].push_back(std::move(aj));
  }
  return j;
}

std::vector<OrchestraConfig> ConfigSpace::enumerate() const {
  std::vector<OrchestraConfig> out;
  for (const auto& m : llm_pool) {
    OrchestraConfig c;
    c.model = m;
    out.push_back(c);
    for (const auto& fm : fm_pool) {
      c.eywa = true;
      c.foundation_model = fm;
      out.push_back(c);
    }
  }
  for (const auto& topo : topology_pool) {
    std::size_t n = default_topology(topo).n_agents;
    for (const auto& m : llm_pool) {
      std::vector<std::optional<std::string>> fms = {std::nullopt};
      for (const auto& fm : fm_pool) fms.emplace_back(fm);
      for (const auto& fm : fms) {
        OrchestraConfig c;
        c.setting = "multi-agent";
        c.multi_agent_type = topo;
        c.eywa = fm.has_value();
        c.foundation_model = fm;
        for (std::size_t i = 0; i < n; ++i)
          c.agents.push_back({"agent" + std::to_string(i), "", m, fm.has_value(), fm});
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

std::string render_planner_prompt(const TaskInstance& task, const ConfigSpace& space, const BackendRegistry* registry) {
  if (space.llm_pool.empty()) throw Error("empty_pool", "LLM pool is empty");
  if (space.fm_pool.empty()) throw Error("empty_pool", "foundation model pool is empty");
  if (space.topology_pool.empty()) throw Error("empty_pool", "topology pool is empty");

  std::string p;
  p += "You are an orchestration planner for a heterogeneous agent system.\n\n";
  p += "Your job is to choose an execution configuration for a single task.\n\n";
  p += "Available LLM models and descriptions:\n";
  for (const auto& id : space.llm_pool) p += describe(id, registry) + "\n";
  p += "\nAvailable foundation models and descriptions:\n";
  for (const auto& id : space.fm_pool) p += describe(id, registry) + "\n";
  p += "\nSupported multi-agent topology pool:\n";
  for (const auto& t : space.topology_pool) p += topology_line(t) + "\n";
  p += "\nInput task:\n";
  p += "- Task Description: " + task.description + "\n";
  p += "- Domain: " + task.domain + "\n";
  p += "- Task Type: " + task.task + "\n\n";
  p += "Hard constraints:\n"
       "- Output must be valid JSON only (no markdown, no code fence, no extra text).\n"
       "- The object has exactly the keys shown in the output format.\n"
       "- \"eywa\" is true when a foundation model should be attached to the agents.\n"
       "- If \"setting\" is \"single-agent\":\n"
       "  - \"model\" must be a valid model string.\n"
       "  - \"multi_agent_type\" must be null.\n"
       "  - \"foundation_model\" should be in the available foundation models or null.\n"
       "  - \"agents\" must be an empty list [].\n"
       "- If \"setting\" is \"multi-agent\":\n"
       "  - \"model\" must be null.\n"
       "  - \"multi_agent_type\" must be in the topology pool.\n"
       "  - \"foundation_model\" should be in the available foundation models or null.\n"
       "  - \"agents\" must be a non-empty list of valid agent specs.\n"
       "- An agent spec is {\"agent_id\": <text>, \"role_prompt\": <text>, \"model\": <llm_model>, "
       "\"eywa\": true or false, \"foundation_model\": <foundation_model> or null}.\n\n";
  p += "Output format:\n"
       "{\n"
       "  \"eywa\": true or false,\n"
       "  \"setting\": \"single-agent\" or \"multi-agent\",\n"
       "  \"model\": <llm_model> or null,\n"
       "  \"multi_agent_type\": <multi_agent_topology> or null,\n"
       "  \"foundation_model\": <foundation_model> or null,\n"
       "  \"agents\": [<agent_spec_1>, <agent_spec_2>, ...] or []\n"
       "}";
  return p;
}

OrchestraConfig parse_and_validate_config(std::string_view reply, const ConfigSpace& space, bool* fenced) {
  std::string body(text::trim(reply));
  if (fenced) *fenced = false;
  if (body.rfind("```", 0) == 0) {
    auto first_nl = body.find('\n');
    auto close = body.rfind("```");
    // Only a bare fenced block is tolerated; prose after the fence is not.
    if (first_nl == std::string::npos || close <= first_nl || close + 3 != body.size())
      reject("output must be valid JSON only");
    body = std::string(text::trim(std::string_view(body).substr(first_nl + 1, close - first_nl - 1)));
    if (fenced) *fenced = true;
  }
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error&) {
    reject("output must be valid JSON only");
  }
  if (!j.is_object()) reject("output must be a JSON object");
  for (const char* key : {"eywa", "setting", "model", "multi_agent_type", "foundation_model", "agents"})
    if (!j.contains(key)) reject(std::string("missing field \"") + key + "\"");
  if (j.size() != 6) reject("unexpected extra fields");

  OrchestraConfig c;
  if (!j.at("eywa").is_boolean()) reject("\"eywa\" must be true or false");
  c.eywa = j.at("eywa").get<bool>();
  if (!j.at("setting").is_string()) reject("\"setting\" must be \"single-agent\" or \"multi-agent\"");
  c.setting = j.at("setting").get<std::string>();
  if (c.setting != "single-agent" && c.setting != "multi-agent")
    reject("\"setting\" must be \"single-agent\" or \"multi-agent\"");
  c.model = nullable_string(j, "model");
  c.multi_agent_type = nullable_string(j, "multi_agent_type");
  c.foundation_model = nullable_string(j, "foundation_model");
  if (!j.at("agents").is_array()) reject("\"agents\" must be a list");
  const auto& agents = j.at("agents");

  if (c.foundation_model && !in_pool(space.fm_pool, *c.foundation_model))
    reject("foundation_model should be in the available foundation models or null");

  if (c.setting == "single-agent") {
    if (!c.model || !in_pool(space.llm_pool, *c.model)) reject("model must be a valid model string");
    if (c.multi_agent_type) reject("multi_agent_type must be null");
    if (!agents.empty()) reject("agents must be an empty list");
    return c;
  }

  if (c.model) reject("model must be null");
  if (!c.multi_agent_type || !in_pool(space.topology_pool, *c.multi_agent_type))
    reject("multi_agent_type must be in the topology pool");
  if (agents.empty()) reject("agents must be a non-empty list of valid agent specs");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    c.agents.push_back(parse_agent(agents[i], space, i));
    if (!ids.insert(c.agents.back().agent_id).second) reject("agent ids must be unique");
  }
  if (!size_fits(*c.multi_agent_type, c.agents.size()))
    reject("agents must fit the size of multi_agent_type '" + *c.multi_agent_type + "'");
  return c;
}

// ---------------------------------------------------------------- execution

EpisodeOutcome ExecutableSystem::run(const TaskInstance& task, const BackendRegistry& registry) const {
  EpisodeOutcome out = run_mas(task, topology, agents, registry);
  out.trace.events.insert(out.trace.events.begin(), notes.begin(), notes.end());
  return out;
}

ExecutableSystem instantiate(const OrchestraConfig& config, const BackendRegistry& registry,
                             const ExecutionOptions& options) {
  ExecutableSystem sys;
  auto make_agent = [&](std::string id, std::string role, std::string model, bool eywa,
                        std::optional<std::string> fm) {
    AgentSpec spec;
    spec.agent_id = std::move(id);
    spec.role_prompt = std::move(role);
    spec.chat_backend = std::move(model);
    if (eywa && !fm) {
      sys.notes.push_back({"eywa_without_fm", spec.agent_id + " runs language-only: no foundation model named"});
      eywa = false;
    }
    if (eywa) {
      spec.eywa = true;
      spec.fm_backend = std::move(fm);
      spec.policy = ControlPolicy::parse(options.control_policy);
    }
    if (!registry.contains(spec.chat_backend))
      throw Error("unknown_backend", "no backend registered as '" + spec.chat_backend + "'");
    if (spec.fm_backend && !registry.contains(*spec.fm_backend))
      throw Error("unknown_backend", "no backend registered as '" + *spec.fm_backend + "'");
    return spec;
  };

  if (config.setting == "single-agent") {
    sys.topology = build_topology("single", 1, 1);
    sys.agents.push_back(make_agent("agent", "", config.model.value_or(""), config.eywa, config.foundation_model));
    return sys;
  }
  const std::string& topo = *config.multi_agent_type;
  sys.topology = build_topology(topo, config.agents.size(), default_rounds(topo));
  for (const auto& a : config.agents) {
    // An Eywa agent without its own model inherits the configuration-level one.
    auto fm = a.foundation_model ? a.foundation_model : config.foundation_model;
    sys.agents.push_back(make_agent(a.agent_id, a.role_prompt, a.model, a.eywa, fm));
  }
  return sys;
}

OrchestraOutcome run_orchestra(const TaskInstance& task, const ConfigSpace& space, const std::string& planner_backend,
                               const BackendRegistry& registry, const ExecutionOptions& options) {
  const Backend* planner = registry.find(planner_backend);
  if (!planner) throw Error("unknown_backend", "no backend registered as '" + planner_backend + "'");
  if (planner->descriptor().kind != BackendKind::kChatLlm)
    throw Error("config", "planner '" + planner_backend + "' is not a chat backend");

  OrchestraOutcome result;
  std::vector<CallRecord> planner_calls;
  std::vector<TraceEvent> planner_events;
  ChatPayload conversation{{{"user", render_planner_prompt(task, space, &registry)}}};
  std::optional<OrchestraConfig> chosen;

  for (int attempt = 1; attempt <= kMaxRetries + 1 && !chosen; ++attempt) {
    InvocationRequest req{planner_backend, InvocationType::kChat, conversation, json::object()};
    InvocationResult res = invoke(req, registry);
    CallRecord rec{"planner", planner_backend, "chat", res.usage, res.ok(), res.error ? res.error->code : "", 0};
    planner_calls.push_back(rec);
    const std::string* reply = res.ok() && res.output ? std::get_if<std::string>(&*res.output) : nullptr;
    if (!reply) {
      planner_events.push_back({"planner_failed", res.error ? res.error->code + ": " + res.error->message : "no text"});
      break;
    }
    result.raw_planner_reply = *reply;
    try {
      bool fenced = false;
      chosen = parse_and_validate_config(*reply, space, &fenced);
      if (fenced) planner_events.push_back({"planner_fence_stripped", "attempt " + std::to_string(attempt)});
    } catch (const Error& e) {
      planner_events.push_back({"planner_invalid", "attempt " + std::to_string(attempt) + ": " + e.what()});
      conversation.messages.push_back({"assistant", *reply});
      conversation.messages.push_back({"user", std::string(kRetryNotice)});
    }
  }

  if (!chosen) {
    OrchestraConfig fallback;
    fallback.model = space.llm_pool.front();
    chosen = fallback;
    result.fallback = true;
    planner_events.push_back({"planner_fallback", "language-only single agent on " + space.llm_pool.front()});
  }
  result.config = *chosen;
  planner_events.push_back({"config", result.config.to_json().dump()});

  ExecutableSystem sys = instantiate(result.config, registry, options);
  result.outcome = sys.run(task, registry);
  auto& trace = result.outcome.trace;
  trace.calls.insert(trace.calls.begin(), planner_calls.begin(), planner_calls.end());
  trace.events.insert(trace.events.begin(), planner_events.begin(), planner_events.end());
  return result;
}

double default_scorer(const TaskInstance& task, const EpisodeOutcome& outcome) {
  if (outcome.status != EpisodeStatus::kOk) return 0.0;
  try {
    return metrics::score_instance(task, outcome.final_answer).value;
  } catch (const Error&) {
    return 0.0;
  }
}

OracleReport oracle_conductor(const std::vector<TaskInstance>& tasks, const std::vector<OrchestraConfig>& configs,
                              const BackendRegistry& registry, const Scorer& scorer, const ExecutionOptions& options) {
  if (tasks.empty()) throw Error("empty", "oracle conductor needs at least one task");
  if (configs.empty()) throw Error("empty", "oracle conductor needs at least one config");
  OracleReport report;
  report.configs = configs;
  report.fixed_mean_losses.assign(configs.size(), 0.0);
  std::vector<ExecutableSystem> systems;
  for (const auto& c : configs) systems.push_back(instantiate(c, registry, options));

  for (const auto& task : tasks) {
    std::vector<double> row;
    for (std::size_t k = 0; k < systems.size(); ++k) {
      EpisodeOutcome first = systems[k].run(task, registry);
      EpisodeOutcome second = systems[k].run(task, registry);
      double u1 = scorer(task, first), u2 = scorer(task, second);
      if (first.final_answer != second.final_answer || first.status != second.status || u1 != u2 ||
          first.trace.to_json(false) != second.trace.to_json(false))
        throw Error("nondeterministic", "config " + std::to_string(k) + " gave different results on a rerun");
      row.push_back(1.0 - u1);
    }
    std::size_t best = static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin());
    report.best_config.push_back(best);
    report.oracle_mean_loss += row[best];
    for (std::size_t k = 0; k < row.size(); ++k) report.fixed_mean_losses[k] += row[k];
    report.losses.push_back(std::move(row));
  }
  double n = static_cast<double>(tasks.size());
  report.oracle_mean_loss /= n;
  for (auto& l : report.fixed_mean_losses) l /= n;
  return report;
}

OracleReport oracle_conductor(const std::vector<TaskInstance>& tasks, const ConfigSpace& space,
                              const BackendRegistry& registry, const Scorer& scorer, const ExecutionOptions& options) {
  return oracle_conductor(tasks, space.enumerate(), registry, scorer, options);
}

}  // namespace eywa
