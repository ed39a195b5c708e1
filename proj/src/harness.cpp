#include "eywa/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "eywa/csv.hpp"
#include "eywa/error.hpp"
#include "eywa/http.hpp"
#include "eywa/mas.hpp"
#include "eywa/mocks.hpp"
#include "eywa/text.hpp"
#include "eywa/wire.hpp"

namespace eywa {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw Error("io", "write failed for '" + path.string() + "'");
}

std::string get_string(const json& obj, const char* key, const std::string& fallback = {}) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  if (!obj.at(key).is_string()) throw Error("config", std::string("'") + key + "' must be a string");
  return obj.at(key).get<std::string>();
}

std::shared_ptr<const Backend> build_backend(const json& b) {
  if (!b.is_object()) throw Error("config", "backend entry must be an object");
  std::string id = get_string(b, "backend_id");
  if (id.empty()) throw Error("config", "backend entry needs a backend_id");
  BackendKind kind = parse_backend_kind(get_string(b, "kind"));
  auto where = "backend '" + id + "': ";

  if (b.contains("mock")) {
    std::string mock = get_string(b, "mock");
    if (mock == "scripted") {
      if (kind != BackendKind::kChatLlm) throw Error("config", where + "scripted mock must be chat-llm");
      ChatScript script = b.contains("script") ? ChatScript::from_json(b.at("script")) : ChatScript::replies({"{{echo}}"});
      return std::make_shared<ScriptedChatBackend>(id, std::move(script), get_string(b, "description"));
    }
    if (mock == "last-value") {
      if (kind != BackendKind::kTsFm) throw Error("config", where + "last-value mock must be ts-fm");
      return std::make_shared<LastValueForecaster>(id);
    }
    if (mock == "seasonal-naive") {
      if (kind != BackendKind::kTsFm) throw Error("config", where + "seasonal-naive mock must be ts-fm");
      std::size_t period = 2;
      if (b.contains("period")) {
        if (!b.at("period").is_number_integer() || b.at("period").get<std::int64_t>() < 1)
          throw Error("config", where + "period must be an integer >= 1");
        period = b.at("period").get<std::size_t>();
      }
      return std::make_shared<SeasonalNaiveForecaster>(id, period);
    }
    if (mock == "lookup") {
      if (kind != BackendKind::kTabFm) throw Error("config", where + "lookup mock must be tab-fm");
      return std::make_shared<LookupTabularPredictor>(id);
    }
    throw Error("config", where + "unknown mock '" + mock + "'");
  }

  std::chrono::milliseconds timeout = kDefaultTransportTimeout;
  if (b.contains("timeout_ms")) {
    if (!b.at("timeout_ms").is_number_integer()) throw Error("config", where + "timeout_ms must be an integer");
    timeout = std::chrono::milliseconds(b.at("timeout_ms").get<std::int64_t>());
  }
  if (b.contains("openai")) {
    if (kind != BackendKind::kChatLlm) throw Error("config", where + "openai backends are chat-llm");
    const auto& o = b.at("openai");
    std::string model = get_string(o, "model");
    if (model.empty()) throw Error("config", where + "openai.model is required");
    std::string base = get_string(o, "base_url");
    if (base.empty()) {
      auto from_env = OpenAiChatBackend::from_env(id, model);
      if (!from_env) throw Error("config", where + "EYWA_LLM_BASE_URL is not set");
      return from_env;
    }
    const char* key = std::getenv("EYWA_LLM_API_KEY");
    return std::make_shared<OpenAiChatBackend>(id, base, key ? key : "", model, timeout);
  }
  if (b.contains("endpoint")) {
    BackendDescriptor d;
    d.backend_id = id;
    d.kind = kind;
    d.capabilities = default_capabilities(kind);
    d.endpoint = get_string(b, "endpoint");
    d.description = get_string(b, "description", "remote " + std::string(kind_label(kind)) + " backend");
    const char* token = std::getenv("EYWA_BACKEND_TOKEN");
    return std::make_shared<RemoteBackend>(std::move(d), timeout, token ? token : "");
  }
  throw Error("config", where + "needs one of 'mock', 'endpoint' or 'openai'");
}

std::string require_kind(const BackendRegistry& reg, const std::string& id, BackendKind kind, const char* role) {
  if (id.empty()) return id;
  const Backend* b = reg.find(id);
  if (!b) throw Error("config", std::string("default ") + role + " '" + id + "' is not registered");
  if (b->descriptor().kind != kind)
    throw Error("config", std::string("default ") + role + " '" + id + "' is not " + std::string(kind_label(kind)));
  return id;
}

std::string first_of(const BackendRegistry& reg, BackendKind kind) {
  auto ids = reg.ids(kind);
  return ids.empty() ? std::string() : ids.front();
}

}  // namespace

LoadedRegistry parse_registry(const json& j) {
  if (!j.is_object() || !j.contains("backends") || !j.at("backends").is_array())
    throw Error("config", "registry needs a 'backends' array");
  LoadedRegistry out;
  out.registry = std::make_shared<BackendRegistry>();
  for (const auto& b : j.at("backends")) {
    try {
      out.registry->add(build_backend(b));
    } catch (const Error& e) {
      if (e.code() == "config") throw;
      throw Error("config", e.what());
    }
  }
  json d = j.value("defaults", json::object());
  auto& reg = *out.registry;
  out.defaults.chat = require_kind(reg, get_string(d, "chat", first_of(reg, BackendKind::kChatLlm)), BackendKind::kChatLlm, "chat");
  out.defaults.ts_fm = require_kind(reg, get_string(d, "ts_fm", first_of(reg, BackendKind::kTsFm)), BackendKind::kTsFm, "ts_fm");
  out.defaults.tab_fm = require_kind(reg, get_string(d, "tab_fm", first_of(reg, BackendKind::kTabFm)), BackendKind::kTabFm, "tab_fm");
  out.defaults.planner = require_kind(reg, get_string(d, "planner", out.defaults.chat), BackendKind::kChatLlm, "planner");
  out.defaults.control_policy = get_string(d, "control_policy", "always-invoke");
  ControlPolicy::parse(out.defaults.control_policy);
  if (d.contains("eywa_agents")) {
    if (!d.at("eywa_agents").is_number_unsigned()) throw Error("config", "eywa_agents must be a non-negative integer");
    out.defaults.eywa_agents = d.at("eywa_agents").get<std::size_t>();
  }
  if (out.defaults.chat.empty()) throw Error("config", "registry has no chat backend");
  return out;
}

LoadedRegistry load_registry(const std::filesystem::path& path) {
  std::string content = read_text(path);
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    throw Error("config", "registry '" + path.string() + "' is not JSON: " + e.what());
  }
  return parse_registry(j);
}

// ---------------------------------------------------------------- systems

namespace {

std::optional<std::string> fm_for(const TaskInstance& task, const RegistryDefaults& d) {
  switch (task.kind()) {
    case TaskKind::kForecast:
      if (!d.ts_fm.empty()) return d.ts_fm;
      break;
    case TaskKind::kTabularClassification:
    case TaskKind::kTabularRegression:
      if (!d.tab_fm.empty()) return d.tab_fm;
      break;
    case TaskKind::kNaturalLanguage: break;
  }
  return std::nullopt;
}

AgentSpec agent_spec(std::string id, std::string role, const TaskInstance& task, const LoadedRegistry& reg, bool eywa) {
  AgentSpec spec;
  spec.agent_id = std::move(id);
  spec.role_prompt = std::move(role);
  spec.chat_backend = reg.defaults.chat;
  if (eywa) {
    if (auto fm = fm_for(task, reg.defaults)) {
      spec.eywa = true;
      spec.fm_backend = fm;
      spec.policy = ControlPolicy::parse(reg.defaults.control_policy);
    }
  }
  return spec;
}

std::string role_for(const std::string& topology, std::size_t i, std::size_t n) {
  if (topology == "refine") return i == 0 ? "You are the author. Draft the answer and revise it using the critic's notes."
                                          : "You are the critic. Point out errors in the author's draft.";
  if (topology == "debate") return "You are debater " + std::to_string(i + 1) + " of " + std::to_string(n) + ".";
  if (topology == "star")
    return i + 1 == n ? "You are the aggregator. Combine the workers' answers."
                      : "You are worker " + std::to_string(i + 1) + ". Solve the task and report to the aggregator.";
  return {};
}

}  // namespace

SystemResult execute_system(const TaskInstance& task, const std::string& system, const LoadedRegistry& reg) {
  SystemResult r;
  if (system == "llm") {
    r.outcome = run_episode(task, agent_spec("agent", "", task, reg, false), *reg.registry);
  } else if (system == "eywa-agent") {
    AgentSpec spec = agent_spec("agent", "", task, reg, true);
    r.outcome = run_episode(task, spec, *reg.registry);
    if (!spec.eywa) r.outcome.trace.events.insert(r.outcome.trace.events.begin(), {"no_fm_for_task", "language-only"});
  } else if (system.rfind("mas:", 0) == 0) {
    std::string name = system.substr(4);
    TopologySpec topo = default_topology(name);
    std::vector<AgentSpec> specs;
    for (std::size_t i = 0; i < topo.n_agents; ++i)
      specs.push_back(agent_spec("agent" + std::to_string(i), role_for(name, i, topo.n_agents), task, reg,
                                 i < reg.defaults.eywa_agents));
    r.outcome = run_mas(task, topo, specs, *reg.registry);
  } else if (system == "orchestra") {
    ConfigSpace space;
    for (const auto& id : reg.registry->ids(BackendKind::kChatLlm))
      if (id != reg.defaults.planner || reg.registry->ids(BackendKind::kChatLlm).size() == 1) space.llm_pool.push_back(id);
    for (auto k : {BackendKind::kTsFm, BackendKind::kTabFm})
      for (const auto& id : reg.registry->ids(k)) space.fm_pool.push_back(id);
    ExecutionOptions opts;
    opts.control_policy = reg.defaults.control_policy;
    auto o = run_orchestra(task, space, reg.defaults.planner, *reg.registry, opts);
    r.outcome = std::move(o.outcome);
    r.config = std::move(o.config);
  } else {
    throw Error("config", "unknown system '" + system + "' (llm | eywa-agent | mas:<topology> | orchestra)");
  }
  return r;
}

namespace {

void check_system(const std::string& system) {
  if (system == "llm" || system == "eywa-agent" || system == "orchestra") return;
  if (system.rfind("mas:", 0) == 0) {
    default_topology(system.substr(4));
    return;
  }
  throw Error("config", "unknown system '" + system + "' (llm | eywa-agent | mas:<topology> | orchestra)");
}

InstanceRecord record_for(std::size_t index, std::size_t repeat, const TaskInstance& task, const std::string& system,
                          const SystemResult& result, std::int64_t wall_ms) {
  InstanceRecord rec;
  rec.index = index;
  rec.repeat = repeat;
  rec.domain = task.domain;
  rec.parent_domain = task.parent_domain();
  rec.task = std::string(canonical_task_label(task.kind()));
  rec.system = system;
  rec.final_answer = result.outcome.final_answer;
  rec.status = std::string(status_label(result.outcome.status));
  rec.cause = result.outcome.failure_cause;
  rec.attempts = result.outcome.attempts;
  rec.wall_clock_ms = wall_ms;
  for (const auto& c : result.outcome.trace.calls) {
    rec.input_tokens += c.usage.input_tokens;
    rec.output_tokens += c.usage.output_tokens;
    rec.payload_tokens += c.payload_tokens;
    if (c.task_type == "chat") rec.llm_tokens += c.usage.total();
    ++rec.calls;
  }
  if (result.config) rec.config = result.config->to_json();
  if (result.outcome.status == EpisodeStatus::kOk) {
    try {
      rec.score = metrics::score_instance(task, result.outcome.final_answer);
    } catch (const Error& e) {
      rec.score = {};
      rec.score.value = 0;
      rec.status = "score_failed";
      rec.cause = e.what();
    }
  } else {
    rec.score.value = 0;
  }
  return rec;
}

SliceRow slice_of(const std::vector<const InstanceRecord*>& recs) {
  SliceRow row;
  std::vector<double> u;
  double ms = 0, tok = 0;
  for (const auto* r : recs) {
    u.push_back(r->score.value);
    ms += static_cast<double>(r->wall_clock_ms);
    tok += static_cast<double>(r->total_tokens());
  }
  row.utility = metrics::aggregate(u);
  row.mean_wall_clock_ms = ms / static_cast<double>(recs.size());
  row.mean_tokens = tok / static_cast<double>(recs.size());
  return row;
}

ordered_json slice_json(const SliceRow& s, bool timing) {
  ordered_json j;
  j["n"] = s.utility.n;
  j["mean_utility"] = s.utility.mean_utility;
  j["sample_std"] = s.utility.sample_std;
  j["mean_tokens"] = s.mean_tokens;
  if (timing) j["mean_wall_clock_ms"] = s.mean_wall_clock_ms;
  return j;
}

}  // namespace

void summarize(RunReport& report) {
  report.sub_domains.clear();
  report.parent_domains.clear();
  report.repeat_means.clear();
  report.total_tokens = 0;
  if (report.records.empty()) return;
  std::map<std::string, std::vector<const InstanceRecord*>> by_sub, by_parent;
  std::vector<const InstanceRecord*> all;
  std::map<std::size_t, std::vector<double>> by_repeat;
  for (const auto& r : report.records) {
    std::string sub = r.domain == "materials" ? "material" : r.domain;
    by_sub[sub].push_back(&r);
    by_parent[r.parent_domain].push_back(&r);
    all.push_back(&r);
    by_repeat[r.repeat].push_back(r.score.value);
    report.total_tokens += r.total_tokens();
  }
  for (const auto& [k, v] : by_sub) report.sub_domains[k] = slice_of(v);
  for (const auto& [k, v] : by_parent) report.parent_domains[k] = slice_of(v);
  report.overall = slice_of(all);
  for (const auto& [rep, u] : by_repeat) report.repeat_means.push_back(metrics::aggregate(u).mean_utility);
}

RunOutput run_system(const BenchmarkSet& bench, const std::string& system, const LoadedRegistry& registry,
                     std::size_t workers, std::uint64_t seed, std::size_t repeats) {
  check_system(system);
  if (workers < 1) throw Error("config", "worker count must be >= 1");
  if (repeats < 1) throw Error("config", "repeats must be >= 1");
  std::size_t n = bench.instances.size();
  std::size_t jobs = n * repeats;

  // The seed only permutes dispatch order; results land in fixed slots.
  std::vector<std::size_t> order(jobs);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<InstanceRecord> records(jobs);
  std::vector<SystemTrace> traces(jobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < jobs;) {
      std::size_t job = order[k];
      std::size_t idx = job % n, rep = job / n;
      const auto& task = bench.instances[idx];
      auto start = std::chrono::steady_clock::now();
      SystemResult result;
      try {
        result = execute_system(task, system, registry);
      } catch (const Error& e) {
        result.outcome.status = EpisodeStatus::kBackendFailed;
        result.outcome.failure_cause = e.what();
      }
      auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
      records[job] = record_for(idx, rep, task, system, result, ms);
      traces[job] = std::move(result.outcome.trace);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(workers, jobs); ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  RunOutput out;
  out.report.system = system;
  out.report.bench_path = bench.source_path;
  out.report.seed = seed;
  out.report.workers = workers;
  out.report.repeats = repeats;
  out.report.records = std::move(records);
  summarize(out.report);
  out.traces = std::move(traces);
  return out;
}

RunReport run(const RunConfig& config) {
  BenchmarkSet bench = load_benchmark(config.bench_path);
  LoadedRegistry registry = load_registry(config.registry_path);
  if (config.eywa_agents) registry.defaults.eywa_agents = *config.eywa_agents;
  RunOutput out = run_system(bench, config.system, registry, config.workers, config.seed, config.repeats);
  if (!config.out_path.empty()) {
    write_text(config.out_path, out.report.to_json().dump(2) + "\n");
    std::string traces;
    for (std::size_t i = 0; i < out.traces.size(); ++i) {
      ordered_json line;
      line["index"] = out.report.records[i].index;
      line["repeat"] = out.report.records[i].repeat;
      line["trace"] = out.traces[i].to_json();
      traces += line.dump() + "\n";
    }
    write_text(config.out_path.string() + ".traces.jsonl", traces);
  }
  return out.report;
}

// ---------------------------------------------------------------- report JSON

ordered_json RunReport::to_json(bool timing) const {
  ordered_json j;
  j["system"] = system;
  j["bench"] = bench_path;
  j["seed"] = seed;
  j["workers"] = workers;
  j["repeats"] = repeats;
  auto recs = ordered_json::array();
  for (const auto& r : records) {
    ordered_json rj;
    rj["index"] = r.index;
    rj["repeat"] = r.repeat;
    rj["domain"] = r.domain;
    rj["parent_domain"] = r.parent_domain;
    rj["task"] = r.task;
    rj["system"] = r.system;
    rj["final_answer"] = r.final_answer;
    rj["utility"] = r.score.value;
    rj["stage"] = r.status == "ok" ? std::string(metrics::stage_label(r.score.stage)) : "";
    rj["terms"] = r.score.terms;
    rj["status"] = r.status;
    rj["cause"] = r.cause;
    rj["attempts"] = r.attempts;
    rj["retries"] = std::max(0, r.attempts - 1);
    rj["usage"] = {{"input_tokens", r.input_tokens},  {"output_tokens", r.output_tokens},
                   {"total_tokens", r.total_tokens()}, {"llm_tokens", r.llm_tokens},
                   {"payload_tokens", r.payload_tokens}, {"calls", r.calls}};
    if (timing) rj["wall_clock_ms"] = r.wall_clock_ms;
    rj["config"] = r.config ? *r.config : ordered_json();
    recs.push_back(std::move(rj));
  }
  j["records"] = std::move(recs);
  ordered_json subs, parents;
  for (const auto& [k, v] : sub_domains) subs[k] = slice_json(v, timing);
  for (const auto& [k, v] : parent_domains) parents[k] = slice_json(v, timing);
  j["slices"] = {{"sub_domain", subs.is_null() ? ordered_json::object() : subs},
                 {"parent_domain", parents.is_null() ? ordered_json::object() : parents}};
  j["overall"] = slice_json(overall, timing);
  j["overall"]["total_tokens"] = total_tokens;
  j["repeat_means"] = repeat_means;
  return j;
}

RunReport RunReport::from_json(const json& j) {
  try {
    RunReport r;
    r.system = j.at("system").get<std::string>();
    r.bench_path = j.value("bench", "");
    r.seed = j.value("seed", std::uint64_t{0});
    r.workers = j.value("workers", std::size_t{1});
    r.repeats = j.value("repeats", std::size_t{1});
    for (const auto& rj : j.at("records")) {
      InstanceRecord rec;
      rec.index = rj.at("index").get<std::size_t>();
      rec.repeat = rj.value("repeat", std::size_t{0});
      rec.domain = rj.at("domain").get<std::string>();
      rec.parent_domain = rj.at("parent_domain").get<std::string>();
      rec.task = rj.at("task").get<std::string>();
      rec.system = rj.value("system", r.system);
      rec.final_answer = rj.value("final_answer", "");
      rec.score.value = rj.at("utility").get<double>();
      for (auto st : {metrics::Stage::kExact, metrics::Stage::kNumeric, metrics::Stage::kLexical,
                      metrics::Stage::kTimeSeries, metrics::Stage::kAccuracy, metrics::Stage::kRegression})
        if (rj.value("stage", "") == metrics::stage_label(st)) rec.score.stage = st;
      if (rj.contains("terms")) rec.score.terms = rj.at("terms").get<std::map<std::string, double>>();
      rec.status = rj.at("status").get<std::string>();
      rec.cause = rj.value("cause", "");
      rec.attempts = rj.value("attempts", 0);
      const auto& u = rj.at("usage");
      rec.input_tokens = u.at("input_tokens").get<std::int64_t>();
      rec.output_tokens = u.at("output_tokens").get<std::int64_t>();
      rec.llm_tokens = u.value("llm_tokens", std::int64_t{0});
      rec.payload_tokens = u.value("payload_tokens", std::int64_t{0});
      rec.calls = u.value("calls", std::int64_t{0});
      rec.wall_clock_ms = rj.value("wall_clock_ms", std::int64_t{0});
      if (rj.contains("config") && !rj.at("config").is_null()) rec.config = ordered_json(rj.at("config"));
      r.records.push_back(std::move(rec));
    }
    summarize(r);
    return r;
  } catch (const json::exception& e) {
    throw Error("config", std::string("malformed run report: ") + e.what());
  }
}

// ---------------------------------------------------------------- tables

namespace {

struct Column {
  std::string label;
  const SliceRow* slice;
};

std::vector<Column> columns_of(const RunReport& r) {
  std::vector<Column> cols;
  for (const auto& sub : sub_domains()) {
    auto it = r.sub_domains.find(sub);
    cols.push_back({sub, it == r.sub_domains.end() ? nullptr : &it->second});
  }
  cols.push_back({"overall", r.records.empty() ? nullptr : &r.overall});
  return cols;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

double metric_value(const SliceRow& s, int metric) {
  switch (metric) {
    case 0: return s.utility.mean_utility;
    case 1: return s.mean_wall_clock_ms / 1000.0;
    default: return s.mean_tokens;
  }
}

constexpr const char* kMetricNames[] = {"utility", "time_s", "tokens"};

std::string pad(const std::string& s, std::size_t width, bool left) {
  // Count code points so the em dash lines up.
  std::size_t len = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++len;
  if (len >= width) return s;
  return left ? s + std::string(width - len, ' ') : std::string(width - len, ' ') + s;
}

}  // namespace

std::string report_table(const std::vector<RunReport>& reports) {
  std::size_t sys_w = 6;
  for (const auto& r : reports) sys_w = std::max(sys_w, r.system.size());
  const std::size_t col_w = 16;
  std::string out = pad("system", sys_w, true) + "  " + pad("metric", 8, true);
  for (const auto& sub : sub_domains()) out += pad(sub, col_w, false);
  out += pad("overall", col_w, false) + "\n";
  for (const auto& r : reports) {
    auto cols = columns_of(r);
    for (int m = 0; m < 3; ++m) {
      out += pad(m == 0 ? r.system : "", sys_w, true) + "  " + pad(kMetricNames[m], 8, true);
      for (const auto& c : cols) {
        std::string cell = c.slice ? fixed(metric_value(*c.slice, m), m == 2 ? 1 : (m == 1 ? 3 : 4)) : "—";
        out += pad(cell, col_w, false);
      }
      out += "\n";
    }
  }
  return out;
}

std::string report_csv(const std::vector<RunReport>& reports) {
  std::string out = "system,metric";
  for (const auto& sub : sub_domains()) out += "," + sub;
  out += ",overall\n";
  for (const auto& r : reports) {
    auto cols = columns_of(r);
    for (int m = 0; m < 3; ++m) {
      out += csv::quote_field(r.system) + "," + kMetricNames[m];
      for (const auto& c : cols) out += "," + (c.slice ? fixed(metric_value(*c.slice, m), 4) : std::string());
      out += "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------- score

ordered_json score_predictions(const BenchmarkSet& bench, std::string_view predictions_jsonl) {
  std::map<std::size_t, std::string> preds;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(predictions_jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("malformed", "predictions line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("index") || !j.at("index").is_number_unsigned() || !j.contains("prediction") ||
        !j.at("prediction").is_string())
      throw Error("malformed", "predictions line " + std::to_string(line_no) + ": need {\"index\", \"prediction\"}");
    auto idx = j.at("index").get<std::size_t>();
    if (idx >= bench.instances.size())
      throw Error("malformed", "predictions line " + std::to_string(line_no) + ": index out of range");
    preds[idx] = j.at("prediction").get<std::string>();
  }

  RunReport report;
  report.system = "predictions";
  report.bench_path = bench.source_path;
  ordered_json per = ordered_json::array();
  for (std::size_t i = 0; i < bench.instances.size(); ++i) {
    const auto& task = bench.instances[i];
    InstanceRecord rec;
    rec.index = i;
    rec.domain = task.domain;
    rec.parent_domain = task.parent_domain();
    rec.task = std::string(canonical_task_label(task.kind()));
    ordered_json pj;
    pj["index"] = i;
    auto it = preds.find(i);
    if (it == preds.end()) {
      rec.status = "missing";
      rec.cause = "no prediction";
    } else {
      try {
        rec.score = metrics::score_instance(task, it->second);
        rec.status = "ok";
      } catch (const Error& e) {
        rec.status = "unparseable";
        rec.cause = e.what();
        rec.score.value = 0;
      }
    }
    pj["domain"] = rec.domain;
    pj["task"] = rec.task;
    pj["utility"] = rec.score.value;
    pj["stage"] = rec.status == "ok" ? std::string(metrics::stage_label(rec.score.stage)) : "";
    pj["terms"] = rec.score.terms;
    pj["status"] = rec.status;
    if (!rec.cause.empty()) pj["cause"] = rec.cause;
    per.push_back(std::move(pj));
    report.records.push_back(std::move(rec));
  }
  summarize(report);
  ordered_json full = report.to_json(false);
  ordered_json out;
  out["instances"] = std::move(per);
  out["slices"] = full["slices"];
  out["overall"] = full["overall"];
  return out;
}

}  // namespace eywa
