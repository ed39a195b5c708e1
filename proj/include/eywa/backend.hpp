#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "eywa/bench.hpp"

namespace eywa {

inline constexpr std::size_t kDefaultAdapterBudget = 4096;
inline constexpr std::chrono::milliseconds kDefaultTransportTimeout{60'000};

enum class BackendKind { kChatLlm, kTsFm, kTabFm };
enum class InvocationType { kForecast, kTabular, kChat };
enum class InvocationStatus { kOk, kError };

std::string_view kind_label(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);
std::string_view invocation_type_label(InvocationType t);
InvocationType parse_invocation_type(std::string_view s);

struct BackendDescriptor {
  std::string backend_id;
  BackendKind kind = BackendKind::kChatLlm;
  std::set<std::string> capabilities;  // canonical task labels
  std::optional<std::string> endpoint;
  std::string description;

  bool supports(TaskKind task) const;
  bool operator==(const BackendDescriptor&) const = default;
};

// Capabilities implied by a backend kind.
std::set<std::string> default_capabilities(BackendKind kind);

struct ChatMessage {
  std::string role;  // system | user | assistant | tool
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct ForecastPayload {
  Series series;
  bool operator==(const ForecastPayload&) const = default;
};
struct TabularPayload {
  Table table;
  bool operator==(const TabularPayload&) const = default;
};
struct ChatPayload {
  std::vector<ChatMessage> messages;
  bool operator==(const ChatPayload&) const = default;
};
using Payload = std::variant<ForecastPayload, TabularPayload, ChatPayload>;

/// u_k: a structured call into one backend. `config` holds named parameters
/// such as `horizon`, `target_column` or `problem`.
struct InvocationRequest {
  std::string backend_id;
  InvocationType task_type = InvocationType::kChat;
  Payload payload;
  nlohmann::json config = nlohmann::json::object();

  bool operator==(const InvocationRequest&) const = default;
};

// Series for forecasts, one value per masked row for tables, text for chat.
using InvocationOutput = std::variant<Series, std::vector<std::string>, std::string>;

struct UsageRecord {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  std::int64_t wall_clock_ms = 0;
  std::string backend_id;

  std::int64_t total() const { return input_tokens + output_tokens; }
  bool operator==(const UsageRecord&) const = default;
};

struct InvocationError {
  std::string code;
  std::string message;
  bool operator==(const InvocationError&) const = default;
};

struct InvocationResult {
  InvocationStatus status = InvocationStatus::kOk;
  std::optional<InvocationOutput> output;
  UsageRecord usage;
  std::optional<InvocationError> error;

  bool ok() const { return status == InvocationStatus::kOk; }
  static InvocationResult success(InvocationOutput out, UsageRecord usage = {});
  static InvocationResult failure(std::string code, std::string message, UsageRecord usage = {});
  bool operator==(const InvocationResult&) const = default;
};

/// z_k: bounded text rendering of a successful invocation.
struct AdaptedContext {
  std::string text_block;
  std::string provenance;  // backend_id@request-digest
};

/// A backend executes one request. Implementations must be safe to call
/// concurrently from several threads.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual const BackendDescriptor& descriptor() const = 0;
  virtual InvocationResult call(const InvocationRequest& request) const = 0;
};

class BackendRegistry {
 public:
  // Throws eywa::Error("duplicate_backend").
  void add(std::shared_ptr<const Backend> backend);
  const Backend* find(std::string_view backend_id) const;
  bool contains(std::string_view backend_id) const { return find(backend_id) != nullptr; }
  std::vector<BackendDescriptor> descriptors() const;
  std::vector<std::string> ids(std::optional<BackendKind> kind = std::nullopt) const;

 private:
  std::map<std::string, std::shared_ptr<const Backend>, std::less<>> backends_;
  std::vector<std::string> order_;
};

// Number of maximal non-whitespace runs.
std::int64_t count_tokens_mock(std::string_view text);

// Structural checks shared by invoke and the protocol server.
// Returns an error description, empty when the request is well-formed.
std::string request_problem(const InvocationRequest& request);

// Dispatches to the registered backend. Never throws for backend-side
// problems: every call returns exactly one result carrying a UsageRecord.
InvocationResult invoke(const InvocationRequest& request, const BackendRegistry& registry);

std::string request_digest(const InvocationRequest& request);

// phi: builds a schema-valid request from a parsed modality payload.
// Throws eywa::Error("no_compatible_payload") / ("missing_config").
using ParsedPayload = std::variant<std::monostate, Series, Table>;
ParsedPayload parse_payload(const TaskInstance& task);
InvocationRequest compile_query(const TaskInstance& task, const ParsedPayload& payload,
                                const BackendDescriptor& target);

// psi: CSV block for forecasts, one value per line for tables, verbatim chat.
// Throws eywa::Error("adapt_failed") for error-status results.
AdaptedContext adapt_response(const InvocationResult& result, std::size_t budget = kDefaultAdapterBudget,
                              std::string_view request_digest = {});

// Timestamps following the series: integer steps when the last two stamps are
// integers, otherwise `<last>+k`.
std::vector<std::string> next_timestamps(const Series& series, std::size_t horizon);

}  // namespace eywa
