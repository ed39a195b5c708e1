#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "eywa/http.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "eywa/error.hpp"
#include "eywa/wire.hpp"

namespace eywa {
namespace {

using nlohmann::json;

std::unique_ptr<httplib::Client> make_client(const Endpoint& ep, std::chrono::milliseconds timeout) {
  auto client = std::make_unique<httplib::Client>(ep.origin);
  client->set_connection_timeout(timeout);
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  return client;
}

std::string transport_message(httplib::Error err) { return "transport failure: " + httplib::to_string(err); }

}  // namespace

Endpoint parse_endpoint(std::string_view url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw Error("config", "endpoint '" + std::string(url) + "' has no scheme");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw Error("config", "endpoint scheme must be http or https: '" + std::string(url) + "'");
  auto rest = url.substr(scheme_end + 3);
  auto slash = rest.find('/');
  Endpoint ep;
  ep.origin = std::string(url.substr(0, scheme_end + 3)) + std::string(rest.substr(0, slash));
  if (rest.substr(0, slash).empty()) throw Error("config", "endpoint '" + std::string(url) + "' has no host");
  if (slash != std::string_view::npos) {
    ep.path = std::string(rest.substr(slash));
    while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
  }
  return ep;
}

// ---------------------------------------------------------------- remote

RemoteBackend::RemoteBackend(BackendDescriptor descriptor, std::chrono::milliseconds timeout, std::string bearer_token)
    : descriptor_(std::move(descriptor)), timeout_(timeout), bearer_token_(std::move(bearer_token)) {
  if (!descriptor_.endpoint) throw Error("config", "remote backend '" + descriptor_.backend_id + "' has no endpoint");
  endpoint_ = parse_endpoint(*descriptor_.endpoint);
}

InvocationResult RemoteBackend::call(const InvocationRequest& request) const {
  auto client = make_client(endpoint_, timeout_);
  httplib::Headers headers;
  if (!bearer_token_.empty()) headers.emplace("Authorization", "Bearer " + bearer_token_);
  auto res = client->Post(endpoint_.path + "/v1/invoke", headers, wire::encode(request).dump(), "application/json");
  if (!res) return InvocationResult::failure("transport", transport_message(res.error()));
  json body;
  try {
    body = json::parse(res->body);
    return wire::decode_result(body);
  } catch (const std::exception& e) {
    return InvocationResult::failure("backend", "HTTP " + std::to_string(res->status) +
                                                    " with an unreadable body: " + e.what());
  }
}

std::vector<BackendDescriptor> fetch_descriptors(std::string_view url, std::chrono::milliseconds timeout) {
  auto ep = parse_endpoint(url);
  auto client = make_client(ep, timeout);
  auto res = client->Get(ep.path + "/v1/describe");
  if (!res) throw Error("transport", transport_message(res.error()));
  if (res->status != 200) throw Error("transport", "describe returned HTTP " + std::to_string(res->status));
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw Error("bad_request", std::string("describe body is not JSON: ") + e.what());
  }
  if (!body.is_array()) throw Error("bad_request", "describe body must be an array");
  std::vector<BackendDescriptor> out;
  for (const auto& d : body) out.push_back(wire::decode_descriptor(d));
  return out;
}

// ---------------------------------------------------------------- OpenAI-style chat

OpenAiChatBackend::OpenAiChatBackend(std::string backend_id, std::string base_url, std::string api_key,
                                     std::string model, std::chrono::milliseconds timeout)
    : endpoint_(parse_endpoint(base_url)), api_key_(std::move(api_key)), model_(std::move(model)), timeout_(timeout) {
  descriptor_.backend_id = std::move(backend_id);
  descriptor_.kind = BackendKind::kChatLlm;
  descriptor_.capabilities = default_capabilities(BackendKind::kChatLlm);
  descriptor_.endpoint = std::move(base_url);
  descriptor_.description = "chat-completions model '" + model_ + "'";
}

std::shared_ptr<OpenAiChatBackend> OpenAiChatBackend::from_env(std::string backend_id, std::string model) {
  const char* base = std::getenv("EYWA_LLM_BASE_URL");
  if (!base || !*base) return nullptr;
  const char* key = std::getenv("EYWA_LLM_API_KEY");
  return std::make_shared<OpenAiChatBackend>(std::move(backend_id), base, key ? key : "", std::move(model));
}

InvocationResult OpenAiChatBackend::call(const InvocationRequest& request) const {
  const auto* chat = std::get_if<ChatPayload>(&request.payload);
  if (!chat) return InvocationResult::failure("bad_request", "chat backend only serves chat requests");
  json messages = json::array();
  for (const auto& m : chat->messages) {
    // Tool output has no tool_call_id here, so it travels as a user turn.
    std::string role = m.role == "tool" ? "user" : m.role;
    messages.push_back({{"role", role}, {"content", m.content}});
  }
  json body = {{"model", model_}, {"messages", messages}};
  for (const auto& [k, v] : request.config.items()) body[k] = v;

  auto client = make_client(endpoint_, timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client->Post(endpoint_.path + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) return InvocationResult::failure("transport", transport_message(res.error()));
  if (res->status != 200)
    return InvocationResult::failure("backend", "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512));
  try {
    auto reply = json::parse(res->body);
    std::string content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    UsageRecord usage;
    if (reply.contains("usage") && reply.at("usage").is_object()) {
      usage.input_tokens = reply["usage"].value("prompt_tokens", std::int64_t{0});
      usage.output_tokens = reply["usage"].value("completion_tokens", std::int64_t{0});
    } else {
      for (const auto& m : chat->messages) usage.input_tokens += count_tokens_mock(m.content);
      usage.output_tokens = count_tokens_mock(content);
    }
    return InvocationResult::success(std::move(content), usage);
  } catch (const std::exception& e) {
    return InvocationResult::failure("backend", std::string("unreadable chat completion: ") + e.what());
  }
}

// ---------------------------------------------------------------- server

ProtocolServer::ProtocolServer(std::shared_ptr<const BackendRegistry> registry)
    : registry_(std::move(registry)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ProtocolServer::~ProtocolServer() { stop(); }

void ProtocolServer::install_routes() {
  server_->Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  server_->Get("/v1/describe", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& d : registry_->descriptors()) out.push_back(wire::encode(d));
    res.set_content(out.dump(), "application/json");
  });

  server_->Post("/v1/invoke", [this](const httplib::Request& req, httplib::Response& res) {
    InvocationResult result;
    try {
      auto request = wire::decode_request(json::parse(req.body));
      result = invoke(request, *registry_);
    } catch (const json::parse_error& e) {
      result = InvocationResult::failure("bad_request", std::string("body is not JSON: ") + e.what());
    } catch (const Error& e) {
      result = InvocationResult::failure("bad_request", e.what());
    }
    if (!result.ok() && result.error && result.error->code == "bad_request") res.status = 400;
    res.set_content(wire::encode(result).dump(), "application/json");
  });
}

int ProtocolServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw Error("port_in_use", "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void ProtocolServer::serve_forever(const std::string& host, int port) {
  host_ = host;
  if (!server_->bind_to_port(host, port)) throw Error("port_in_use", "cannot bind " + host + ":" + std::to_string(port));
  port_ = port;
  server_->listen_after_bind();
}

void ProtocolServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string ProtocolServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace eywa
