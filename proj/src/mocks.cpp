#include "eywa/mocks.hpp"

#include <algorithm>
#include <map>

#include "eywa/error.hpp"
#include "eywa/text.hpp"

namespace eywa {
namespace {

BackendDescriptor make_descriptor(std::string id, BackendKind kind, std::string description) {
  BackendDescriptor d;
  d.backend_id = std::move(id);
  d.kind = kind;
  d.capabilities = default_capabilities(kind);
  d.description = std::move(description);
  return d;
}

std::vector<std::string> json_strings(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw Error("config", std::string(what) + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& s : j) {
    if (!s.is_string()) throw Error("config", std::string(what) + " must be an array of strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

}  // namespace

ChatScript ChatScript::from_json(const nlohmann::json& j) {
  ChatScript script;
  if (j.is_array()) {
    script.default_replies = json_strings(j, "script");
    return script;
  }
  if (!j.is_object()) throw Error("config", "chat script must be an object or an array of replies");
  if (j.contains("rules")) {
    if (!j.at("rules").is_array()) throw Error("config", "script rules must be an array");
    for (const auto& r : j.at("rules")) {
      if (!r.is_object() || !r.contains("when") || !r.at("when").is_string() || !r.contains("replies"))
        throw Error("config", "script rule needs 'when' and 'replies'");
      script.rules.push_back({r.at("when").get<std::string>(), json_strings(r.at("replies"), "replies")});
      if (script.rules.back().replies.empty()) throw Error("config", "script rule has no replies");
    }
  }
  if (j.contains("default")) script.default_replies = json_strings(j.at("default"), "default");
  return script;
}

ChatScript ChatScript::replies(std::vector<std::string> replies) {
  ChatScript s;
  s.default_replies = std::move(replies);
  return s;
}

nlohmann::json ChatScript::to_json() const {
  nlohmann::json rules_json = nlohmann::json::array();
  for (const auto& r : rules) rules_json.push_back({{"when", r.when}, {"replies", r.replies}});
  return {{"rules", rules_json}, {"default", default_replies}};
}

// ---------------------------------------------------------------- chat

ScriptedChatBackend::ScriptedChatBackend(std::string backend_id, ChatScript script, std::string description)
    : descriptor_(make_descriptor(std::move(backend_id), BackendKind::kChatLlm,
                                  description.empty() ? "scripted chat model for deterministic runs" : description)),
      script_(std::move(script)) {}

std::string ScriptedChatBackend::reply_for(const std::vector<ChatMessage>& messages) const {
  std::string haystack;
  std::string last_input;
  std::string last_tool;
  std::size_t assistant_turns = 0;
  for (const auto& m : messages) {
    if (m.role == "tool") last_tool = m.content;
    if (m.role == "assistant") {
      ++assistant_turns;
      continue;
    }
    haystack += m.content;
    haystack += '\n';
    last_input = m.content;
  }
  const std::vector<std::string>* replies = &script_.default_replies;
  for (const auto& rule : script_.rules) {
    if (haystack.find(rule.when) != std::string::npos) {
      replies = &rule.replies;
      break;
    }
  }
  if (replies->empty()) return {};
  const std::string& picked = (*replies)[std::min(assistant_turns, replies->size() - 1)];
  return replace_all(replace_all(picked, "{{echo}}", last_input), "{{tool}}", last_tool);
}

InvocationResult ScriptedChatBackend::call(const InvocationRequest& request) const {
  const auto* chat = std::get_if<ChatPayload>(&request.payload);
  if (!chat) throw Error("backend", "scripted chat model only serves chat requests");
  std::string reply = reply_for(chat->messages);
  UsageRecord usage;
  for (const auto& m : chat->messages) usage.input_tokens += count_tokens_mock(m.content);
  usage.output_tokens = count_tokens_mock(reply);
  return InvocationResult::success(std::move(reply), usage);
}

// ---------------------------------------------------------------- forecasters

LastValueForecaster::LastValueForecaster(std::string backend_id)
    : descriptor_(make_descriptor(std::move(backend_id), BackendKind::kTsFm,
                                  "persistence forecaster: repeats the last observed value")) {}

InvocationResult LastValueForecaster::call(const InvocationRequest& request) const {
  const auto* p = std::get_if<ForecastPayload>(&request.payload);
  if (!p || p->series.points.empty()) throw Error("backend", "last-value forecaster needs a non-empty series");
  auto horizon = request.config.at("horizon").get<std::size_t>();
  Series out;
  double last = p->series.points.back().value;
  for (auto& ts : next_timestamps(p->series, horizon)) out.points.push_back({ts, last});
  return InvocationResult::success(std::move(out));
}

SeasonalNaiveForecaster::SeasonalNaiveForecaster(std::string backend_id, std::size_t period)
    : descriptor_(make_descriptor(std::move(backend_id), BackendKind::kTsFm,
                                  "seasonal-naive forecaster: repeats the last full period")),
      period_(period) {}

InvocationResult SeasonalNaiveForecaster::call(const InvocationRequest& request) const {
  const auto* p = std::get_if<ForecastPayload>(&request.payload);
  if (!p || p->series.points.empty()) throw Error("backend", "seasonal-naive forecaster needs a non-empty series");
  std::size_t period = period_;
  if (request.config.contains("period")) {
    const auto& v = request.config.at("period");
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1) throw Error("backend", "period must be an integer >= 1");
    period = v.get<std::size_t>();
  }
  const auto& pts = p->series.points;
  period = std::min(period, pts.size());
  auto horizon = request.config.at("horizon").get<std::size_t>();
  std::size_t start = pts.size() - period;
  Series out;
  auto stamps = next_timestamps(p->series, horizon);
  for (std::size_t k = 0; k < horizon; ++k) out.points.push_back({stamps[k], pts[start + k % period].value});
  return InvocationResult::success(std::move(out));
}

// ---------------------------------------------------------------- tabular

LookupTabularPredictor::LookupTabularPredictor(std::string backend_id)
    : descriptor_(make_descriptor(std::move(backend_id), BackendKind::kTabFm,
                                  "lookup predictor: exact feature match, else mean or majority of observed targets")) {}

InvocationResult LookupTabularPredictor::call(const InvocationRequest& request) const {
  const auto* p = std::get_if<TabularPayload>(&request.payload);
  if (!p) throw Error("backend", "lookup predictor only serves tabular requests");
  const Table& t = p->table;
  std::size_t target = t.target_index();
  std::string problem = "classification";
  if (request.config.contains("problem") && request.config.at("problem").is_string())
    problem = request.config.at("problem").get<std::string>();
  if (problem != "classification" && problem != "regression")
    throw Error("backend", "unknown problem '" + problem + "'");

  std::vector<bool> masked(t.rows.size(), false);
  for (auto m : t.masked_rows) masked[m] = true;

  auto features = [&](std::size_t r) {
    std::vector<std::string> key;
    for (std::size_t c = 0; c < t.columns.size(); ++c)
      if (c != target) key.emplace_back(text::trim(t.rows[r][c].text));
    return key;
  };

  std::vector<std::size_t> observed;
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (!masked[r]) observed.push_back(r);
  if (observed.empty()) throw Error("backend", "no observed target rows");

  std::string fallback;
  if (problem == "regression") {
    double sum = 0;
    for (auto r : observed) {
      const auto& cell = t.rows[r][target];
      if (!cell.number) throw Error("backend", "non-numeric observed target '" + cell.text + "'");
      sum += *cell.number;
    }
    fallback = text::format_number(sum / static_cast<double>(observed.size()));
  } else {
    // Mode; ties go to the label seen first.
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> order;
    for (auto r : observed) {
      std::string label(text::trim(t.rows[r][target].text));
      if (counts[label]++ == 0) order.push_back(label);
    }
    std::size_t best = 0;
    for (const auto& label : order)
      if (counts[label] > best) {
        best = counts[label];
        fallback = label;
      }
  }

  std::vector<std::string> out;
  for (auto m : t.masked_rows) {
    auto key = features(m);
    std::string value = fallback;
    for (auto r : observed)
      if (features(r) == key) {
        value = std::string(text::trim(t.rows[r][target].text));
        break;
      }
    out.push_back(std::move(value));
  }
  return InvocationResult::success(std::move(out));
}

std::vector<std::shared_ptr<const Backend>> default_mocks(ChatScript script) {
  return {std::make_shared<ScriptedChatBackend>("scripted-llm", std::move(script)),
          std::make_shared<LastValueForecaster>("last-value"),
          std::make_shared<SeasonalNaiveForecaster>("seasonal-naive"),
          std::make_shared<LookupTabularPredictor>("lookup-tab")};
}

}  // namespace eywa
