#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "eywa/backend.hpp"

namespace httplib {
class Server;
}

namespace eywa {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // prefix without trailing slash, may be empty
};

// Throws eywa::Error("config") for anything that is not http(s)://host[:port][/path].
Endpoint parse_endpoint(std::string_view url);

// Speaks the /v1/invoke protocol to a remote backend server. Connection
// failures and timeouts come back as `transport` errors; remote error results
// are passed through unchanged.
class RemoteBackend final : public Backend {
 public:
  RemoteBackend(BackendDescriptor descriptor, std::chrono::milliseconds timeout = kDefaultTransportTimeout,
                std::string bearer_token = {});
  const BackendDescriptor& descriptor() const override { return descriptor_; }
  InvocationResult call(const InvocationRequest& request) const override;

 private:
  BackendDescriptor descriptor_;
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
  std::string bearer_token_;
};

// GET <url>/v1/describe. Throws eywa::Error("transport") / ("bad_request").
std::vector<BackendDescriptor> fetch_descriptors(std::string_view url,
                                                 std::chrono::milliseconds timeout = kDefaultTransportTimeout);

// Chat backend for OpenAI-style `/chat/completions` servers.
class OpenAiChatBackend final : public Backend {
 public:
  OpenAiChatBackend(std::string backend_id, std::string base_url, std::string api_key, std::string model,
                    std::chrono::milliseconds timeout = kDefaultTransportTimeout);
  // Reads EYWA_LLM_BASE_URL / EYWA_LLM_API_KEY; nullptr when the base URL is unset.
  static std::shared_ptr<OpenAiChatBackend> from_env(std::string backend_id, std::string model);

  const BackendDescriptor& descriptor() const override { return descriptor_; }
  InvocationResult call(const InvocationRequest& request) const override;

 private:
  BackendDescriptor descriptor_;
  Endpoint endpoint_;
  std::string api_key_;
  std::string model_;
  std::chrono::milliseconds timeout_;
};

// Hosts a registry behind /v1/describe, /v1/invoke and /healthz.
class ProtocolServer {
 public:
  explicit ProtocolServer(std::shared_ptr<const BackendRegistry> registry);
  ~ProtocolServer();
  ProtocolServer(const ProtocolServer&) = delete;
  ProtocolServer& operator=(const ProtocolServer&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port. Throws eywa::Error("port_in_use").
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Blocks the calling thread until stop() is called from elsewhere.
  void serve_forever(const std::string& host, int port);
  void stop();
  int port() const { return port_; }
  std::string url() const;

 private:
  void install_routes();

  std::shared_ptr<const BackendRegistry> registry_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = -1;
};

}  // namespace eywa
