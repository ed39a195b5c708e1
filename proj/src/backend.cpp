#include "eywa/backend.hpp"

#include <algorithm>
#include <charconv>

#include "eywa/error.hpp"
#include "eywa/text.hpp"
#include "eywa/wire.hpp"

namespace eywa {

std::string_view kind_label(BackendKind k) {
  switch (k) {
    case BackendKind::kChatLlm: return "chat-llm";
    case BackendKind::kTsFm: return "ts-fm";
    case BackendKind::kTabFm: return "tab-fm";
  }
  return "";
}

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "chat-llm") return BackendKind::kChatLlm;
  if (s == "ts-fm") return BackendKind::kTsFm;
  if (s == "tab-fm") return BackendKind::kTabFm;
  throw Error("unknown_kind", "unknown backend kind '" + std::string(s) + "'");
}

std::string_view invocation_type_label(InvocationType t) {
  switch (t) {
    case InvocationType::kForecast: return "forecast";
    case InvocationType::kTabular: return "tabular";
    case InvocationType::kChat: return "chat";
  }
  return "";
}

InvocationType parse_invocation_type(std::string_view s) {
  if (s == "forecast") return InvocationType::kForecast;
  if (s == "tabular") return InvocationType::kTabular;
  if (s == "chat") return InvocationType::kChat;
  throw Error("unknown_task_type", "unknown task_type '" + std::string(s) + "'");
}

std::set<std::string> default_capabilities(BackendKind kind) {
  switch (kind) {
    case BackendKind::kTsFm: return {"time_series_forecast"};
    case BackendKind::kTabFm: return {"tabular_classification", "tabular_regression"};
    case BackendKind::kChatLlm:
      return {"natural_language_qa", "time_series_forecast", "tabular_classification", "tabular_regression"};
  }
  return {};
}

bool BackendDescriptor::supports(TaskKind task) const {
  return capabilities.count(std::string(canonical_task_label(task))) > 0;
}

InvocationResult InvocationResult::success(InvocationOutput out, UsageRecord usage) {
  InvocationResult r;
  r.status = InvocationStatus::kOk;
  r.output = std::move(out);
  r.usage = std::move(usage);
  return r;
}

InvocationResult InvocationResult::failure(std::string code, std::string message, UsageRecord usage) {
  InvocationResult r;
  r.status = InvocationStatus::kError;
  r.usage = std::move(usage);
  r.error = InvocationError{std::move(code), std::move(message)};
  return r;
}

// ---------------------------------------------------------------- registry

void BackendRegistry::add(std::shared_ptr<const Backend> backend) {
  const auto& id = backend->descriptor().backend_id;
  if (backends_.count(id)) throw Error("duplicate_backend", "backend '" + id + "' registered twice");
  order_.push_back(id);
  backends_.emplace(id, std::move(backend));
}

const Backend* BackendRegistry::find(std::string_view backend_id) const {
  auto it = backends_.find(backend_id);
  return it == backends_.end() ? nullptr : it->second.get();
}

std::vector<BackendDescriptor> BackendRegistry::descriptors() const {
  std::vector<BackendDescriptor> out;
  for (const auto& id : order_) out.push_back(backends_.at(id)->descriptor());
  return out;
}

std::vector<std::string> BackendRegistry::ids(std::optional<BackendKind> kind) const {
  std::vector<std::string> out;
  for (const auto& id : order_)
    if (!kind || backends_.at(id)->descriptor().kind == *kind) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------- invoke

std::int64_t count_tokens_mock(std::string_view text) {
  std::int64_t n = 0;
  bool in_run = false;
  for (char c : text) {
    bool space = text::is_space(c);
    if (!space && !in_run) ++n;
    in_run = !space;
  }
  return n;
}

namespace {

std::optional<std::int64_t> config_int(const nlohmann::json& config, const char* key) {
  if (!config.is_object() || !config.contains(key)) return std::nullopt;
  const auto& v = config.at(key);
  if (!v.is_number_integer()) return std::nullopt;
  return v.get<std::int64_t>();
}

}  // namespace

std::string request_problem(const InvocationRequest& request) {
  if (!request.config.is_object()) return "config must be an object";
  switch (request.task_type) {
    case InvocationType::kForecast: {
      const auto* p = std::get_if<ForecastPayload>(&request.payload);
      if (!p) return "payload does not match task_type 'forecast'";
      if (p->series.points.empty()) return "forecast payload has an empty series";
      auto horizon = config_int(request.config, "horizon");
      if (!horizon || *horizon < 1) return "config.horizon must be an integer >= 1";
      break;
    }
    case InvocationType::kTabular: {
      const auto* p = std::get_if<TabularPayload>(&request.payload);
      if (!p) return "payload does not match task_type 'tabular'";
      const auto& t = p->table;
      if (std::find(t.columns.begin(), t.columns.end(), t.target_column) == t.columns.end())
        return "target column '" + t.target_column + "' not in table";
      for (const auto& row : t.rows)
        if (row.size() != t.columns.size()) return "ragged table row";
      for (auto m : t.masked_rows)
        if (m >= t.rows.size()) return "masked row index out of range";
      break;
    }
    case InvocationType::kChat: {
      const auto* p = std::get_if<ChatPayload>(&request.payload);
      if (!p) return "payload does not match task_type 'chat'";
      if (p->messages.empty()) return "chat payload needs at least one message";
      break;
    }
  }
  return {};
}

InvocationResult invoke(const InvocationRequest& request, const BackendRegistry& registry) {
  auto started = std::chrono::steady_clock::now();
  InvocationResult result;
  const Backend* backend = registry.find(request.backend_id);
  if (!backend) {
    result = InvocationResult::failure("unknown_backend", "no backend registered as '" + request.backend_id + "'");
  } else if (auto problem = request_problem(request); !problem.empty()) {
    result = InvocationResult::failure("bad_request", problem);
  } else {
    try {
      result = backend->call(request);
    } catch (const Error& e) {
      result = InvocationResult::failure(e.code() == "transport" ? "transport" : "backend", e.what());
    } catch (const std::exception& e) {
      result = InvocationResult::failure("backend", e.what());
    }
    if (result.ok() && request.task_type == InvocationType::kForecast) {
      const auto* series = result.output ? std::get_if<Series>(&*result.output) : nullptr;
      auto horizon = *config_int(request.config, "horizon");
      if (!series || static_cast<std::int64_t>(series->size()) != horizon)
        result = InvocationResult::failure("backend", "forecast output does not match the requested horizon",
                                           result.usage);
    }
  }
  auto elapsed = std::chrono::steady_clock::now() - started;
  result.usage.wall_clock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
  result.usage.backend_id = request.backend_id;
  return result;
}

std::string request_digest(const InvocationRequest& request) {
  return text::digest_hex(wire::encode(request).dump());
}

// ---------------------------------------------------------------- phi / psi

ParsedPayload parse_payload(const TaskInstance& task) {
  switch (task.kind()) {
    case TaskKind::kForecast: return parse_series_csv(task.input);
    case TaskKind::kTabularClassification:
    case TaskKind::kTabularRegression: return parse_table_csv(task.input, infer_target_column(task.input));
    case TaskKind::kNaturalLanguage: break;
  }
  return std::monostate{};
}

InvocationRequest compile_query(const TaskInstance& task, const ParsedPayload& payload,
                                const BackendDescriptor& target) {
  InvocationRequest req;
  req.backend_id = target.backend_id;
  TaskKind kind = task.kind();
  if (target.kind == BackendKind::kChatLlm) {
    req.task_type = InvocationType::kChat;
    req.payload = ChatPayload{{{"user", task.input}}};
    return req;
  }
  if (!target.supports(kind)) throw Error("no_compatible_payload", "no compatible payload for '" + target.backend_id + "'");
  if (target.kind == BackendKind::kTsFm) {
    const auto* series = std::get_if<Series>(&payload);
    if (!series) throw Error("no_compatible_payload", "no compatible payload: state holds no series");
    if (task.output_size < 1) throw Error("missing_config", "forecast horizon not derivable from output_size");
    req.task_type = InvocationType::kForecast;
    req.payload = ForecastPayload{*series};
    req.config = {{"horizon", task.output_size}};
    return req;
  }
  const auto* table = std::get_if<Table>(&payload);
  if (!table) throw Error("no_compatible_payload", "no compatible payload: state holds no table");
  if (table->target_column.empty()) throw Error("missing_config", "table has no target column");
  req.task_type = InvocationType::kTabular;
  req.payload = TabularPayload{*table};
  req.config = {{"target_column", table->target_column},
                {"problem", kind == TaskKind::kTabularRegression ? "regression" : "classification"}};
  return req;
}

AdaptedContext adapt_response(const InvocationResult& result, std::size_t budget, std::string_view digest) {
  if (!result.ok() || !result.output) throw Error("adapt_failed", "cannot adapt failed invocation");
  std::string block = std::visit(
      [](const auto& o) -> std::string {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, Series>)
          return serialize_series_csv(o);
        else if constexpr (std::is_same_v<T, std::vector<std::string>>)
          return text::join(o, "\n");
        else
          return o;
      },
      *result.output);

  if (block.size() > budget) {
    // The marker length depends on k, which depends on how much the marker
    // displaces; iterate until the digit count settles.
    std::size_t keep = budget;
    std::string marker;
    for (int i = 0; i < 4; ++i) {
      marker = "…[truncated " + std::to_string(block.size() - keep) + " chars]";
      keep = marker.size() >= budget ? 0 : text::utf8_safe_prefix(block, budget - marker.size());
    }
    marker = "…[truncated " + std::to_string(block.size() - keep) + " chars]";
    if (marker.size() > budget)
      block.resize(text::utf8_safe_prefix(block, budget));
    else
      block = block.substr(0, keep) + marker;
  }
  AdaptedContext ctx;
  ctx.text_block = std::move(block);
  ctx.provenance = result.usage.backend_id;
  if (!digest.empty()) ctx.provenance += "@" + std::string(digest);
  return ctx;
}

std::vector<std::string> next_timestamps(const Series& series, std::size_t horizon) {
  auto as_int = [](const std::string& s) -> std::optional<long long> {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
  };
  std::vector<std::string> out;
  out.reserve(horizon);
  if (series.points.empty()) {
    for (std::size_t k = 1; k <= horizon; ++k) out.push_back(std::to_string(k - 1));
    return out;
  }
  const auto& last = series.points.back().timestamp;
  auto last_int = as_int(last);
  if (last_int) {
    long long step = 1;
    if (series.size() >= 2)
      if (auto prev = as_int(series.points[series.size() - 2].timestamp); prev && *last_int > *prev)
        step = *last_int - *prev;
    for (std::size_t k = 1; k <= horizon; ++k)
      out.push_back(std::to_string(*last_int + step * static_cast<long long>(k)));
    return out;
  }
  for (std::size_t k = 1; k <= horizon; ++k) out.push_back(last + "+" + std::to_string(k));
  return out;
}

}  // namespace eywa
