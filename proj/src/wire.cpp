#include "eywa/wire.hpp"

#include "eywa/error.hpp"
#include "eywa/text.hpp"

namespace eywa::wire {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& why) { throw Error("bad_request", why); }

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) bad(std::string("missing field '") + key + "'");
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_string()) bad(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<std::string> string_array(const json& v, const char* what) {
  if (!v.is_array()) bad(std::string(what) + " must be an array");
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.is_string()) bad(std::string(what) + " must hold strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

json encode(const Series& series) {
  json ts = json::array(), vs = json::array();
  for (const auto& p : series.points) {
    ts.push_back(p.timestamp);
    vs.push_back(p.value);
  }
  return {{"timestamps", ts}, {"values", vs}};
}

Series decode_series(const json& body) {
  auto ts = string_array(require(body, "timestamps"), "timestamps");
  const auto& vs = require(body, "values");
  if (!vs.is_array() || vs.size() != ts.size()) bad("'values' must be an array as long as 'timestamps'");
  Series s;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!vs[i].is_number()) bad("series values must be numbers");
    s.points.push_back({ts[i], vs[i].get<double>()});
  }
  return s;
}

json encode(const Table& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json cells = json::array();
    for (const auto& c : row) cells.push_back(c.text);
    rows.push_back(cells);
  }
  return {{"columns", table.columns},
          {"rows", rows},
          {"target_column", table.target_column},
          {"masked_rows", table.masked_rows}};
}

Table decode_table(const json& body) {
  Table t;
  t.columns = string_array(require(body, "columns"), "columns");
  const auto& rows = require(body, "rows");
  if (!rows.is_array()) bad("'rows' must be an array");
  for (const auto& row : rows) {
    auto cells = string_array(row, "row");
    if (cells.size() != t.columns.size()) bad("ragged table row");
    std::vector<Cell> parsed;
    for (auto& c : cells) parsed.push_back({c, text::parse_decimal(text::trim(c))});
    t.rows.push_back(std::move(parsed));
  }
  t.target_column = require_string(body, "target_column");
  const auto& masked = require(body, "masked_rows");
  if (!masked.is_array()) bad("'masked_rows' must be an array");
  for (const auto& m : masked) {
    if (!m.is_number_unsigned() || m.get<std::size_t>() >= t.rows.size()) bad("invalid masked row index");
    t.masked_rows.push_back(m.get<std::size_t>());
  }
  return t;
}

json encode(const InvocationRequest& request) {
  json payload;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ForecastPayload>) {
          payload = {{"series", encode(p.series)}};
        } else if constexpr (std::is_same_v<T, TabularPayload>) {
          payload = {{"table", encode(p.table)}};
        } else {
          json msgs = json::array();
          for (const auto& m : p.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
          payload = {{"messages", msgs}};
        }
      },
      request.payload);
  return {{"backend_id", request.backend_id},
          {"task_type", std::string(invocation_type_label(request.task_type))},
          {"payload", payload},
          {"config", request.config}};
}

InvocationRequest decode_request(const json& body) {
  if (!body.is_object()) bad("request body must be a JSON object");
  InvocationRequest r;
  r.backend_id = require_string(body, "backend_id");
  try {
    r.task_type = parse_invocation_type(require_string(body, "task_type"));
  } catch (const Error& e) {
    bad(e.what());
  }
  // The payload is decoded by its own shape; whether it fits task_type is
  // request_problem's call, so local and served invokes report the same error.
  const auto& payload = require(body, "payload");
  if (!payload.is_object() || payload.size() != 1) bad("'payload' must hold exactly one of series, table, messages");
  if (payload.contains("series")) {
    r.payload = ForecastPayload{decode_series(payload.at("series"))};
  } else if (payload.contains("table")) {
    r.payload = TabularPayload{decode_table(payload.at("table"))};
  } else if (payload.contains("messages")) {
    ChatPayload chat;
    const auto& msgs = payload.at("messages");
    if (!msgs.is_array()) bad("'messages' must be an array");
    for (const auto& m : msgs) chat.messages.push_back({require_string(m, "role"), require_string(m, "content")});
    r.payload = std::move(chat);
  } else {
    bad("'payload' must hold exactly one of series, table, messages");
  }
  if (body.contains("config")) {
    if (!body.at("config").is_object()) bad("'config' must be an object");
    r.config = body.at("config");
  }
  return r;
}

json encode(const InvocationResult& result) {
  json out = {{"status", result.ok() ? "ok" : "error"}};
  if (result.output) {
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, Series>) {
            out["output"] = {{"kind", "series"}, {"series", encode(o)}};
          } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            out["output"] = {{"kind", "values"}, {"values", o}};
          } else {
            out["output"] = {{"kind", "text"}, {"text", o}};
          }
        },
        *result.output);
  } else {
    out["output"] = nullptr;
  }
  out["usage"] = {{"input_tokens", result.usage.input_tokens}, {"output_tokens", result.usage.output_tokens}};
  if (result.error)
    out["error"] = {{"code", result.error->code}, {"message", result.error->message}};
  else
    out["error"] = nullptr;
  return out;
}

InvocationResult decode_result(const json& body) {
  if (!body.is_object()) bad("response body must be a JSON object");
  InvocationResult r;
  auto status = require_string(body, "status");
  if (status == "ok")
    r.status = InvocationStatus::kOk;
  else if (status == "error")
    r.status = InvocationStatus::kError;
  else
    bad("unknown status '" + status + "'");
  const auto& output = require(body, "output");
  if (!output.is_null()) {
    auto kind = require_string(output, "kind");
    if (kind == "series")
      r.output = decode_series(require(output, "series"));
    else if (kind == "values")
      r.output = string_array(require(output, "values"), "values");
    else if (kind == "text")
      r.output = require_string(output, "text");
    else
      bad("unknown output kind '" + kind + "'");
  }
  const auto& usage = require(body, "usage");
  const auto& in = require(usage, "input_tokens");
  const auto& out = require(usage, "output_tokens");
  if (!in.is_number_integer() || !out.is_number_integer()) bad("usage counts must be integers");
  r.usage.input_tokens = in.get<std::int64_t>();
  r.usage.output_tokens = out.get<std::int64_t>();
  const auto& err = require(body, "error");
  if (!err.is_null()) r.error = InvocationError{require_string(err, "code"), require_string(err, "message")};
  if (r.ok() && (!r.output || r.error)) bad("ok status requires output and no error");
  if (!r.ok() && !r.error) bad("error status requires an error object");
  return r;
}

json encode(const BackendDescriptor& d) {
  json out = {{"backend_id", d.backend_id},
              {"kind", std::string(kind_label(d.kind))},
              {"capabilities", d.capabilities},
              {"description", d.description}};
  out["endpoint"] = d.endpoint ? json(*d.endpoint) : json(nullptr);
  return out;
}

BackendDescriptor decode_descriptor(const json& body) {
  BackendDescriptor d;
  d.backend_id = require_string(body, "backend_id");
  try {
    d.kind = parse_backend_kind(require_string(body, "kind"));
  } catch (const Error& e) {
    bad(e.what());
  }
  if (body.contains("capabilities")) {
    auto caps = string_array(body.at("capabilities"), "capabilities");
    d.capabilities = {caps.begin(), caps.end()};
  } else {
    d.capabilities = default_capabilities(d.kind);
  }
  if (body.contains("description") && body.at("description").is_string())
    d.description = body.at("description").get<std::string>();
  if (body.contains("endpoint") && body.at("endpoint").is_string()) d.endpoint = body.at("endpoint").get<std::string>();
  return d;
}

}  // namespace eywa::wire
