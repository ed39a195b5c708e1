#pragma once

// Deterministic in-process backends. All of them are pure: the same request
// always yields the same result and the same token counts.

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eywa/backend.hpp"

namespace eywa {

// Replies of the scripted chat model. A rule fires when its `when` substring
// occurs in the concatenated non-assistant messages; the first matching rule
// wins, otherwise `default_replies` is used. The reply picked from the list is
// indexed by the number of assistant turns already in the conversation (the
// last reply repeats). `{{echo}}` expands to the latest non-assistant message,
// `{{tool}}` to the latest tool block (empty when there is none).
struct ChatScript {
  struct Rule {
    std::string when;
    std::vector<std::string> replies;
  };
  std::vector<Rule> rules;
  std::vector<std::string> default_replies;

  static ChatScript from_json(const nlohmann::json& j);
  static ChatScript replies(std::vector<std::string> replies);
  nlohmann::json to_json() const;
};

class ScriptedChatBackend final : public Backend {
 public:
  ScriptedChatBackend(std::string backend_id, ChatScript script, std::string description = {});
  const BackendDescriptor& descriptor() const override { return descriptor_; }
  InvocationResult call(const InvocationRequest& request) const override;

  std::string reply_for(const std::vector<ChatMessage>& messages) const;

 private:
  BackendDescriptor descriptor_;
  ChatScript script_;
};

// Repeats the final observed value over the horizon.
class LastValueForecaster final : public Backend {
 public:
  explicit LastValueForecaster(std::string backend_id);
  const BackendDescriptor& descriptor() const override { return descriptor_; }
  InvocationResult call(const InvocationRequest& request) const override;

 private:
  BackendDescriptor descriptor_;
};

// Repeats the last full period; config "period" overrides the default.
class SeasonalNaiveForecaster final : public Backend {
 public:
  SeasonalNaiveForecaster(std::string backend_id, std::size_t period = 2);
  const BackendDescriptor& descriptor() const override { return descriptor_; }
  InvocationResult call(const InvocationRequest& request) const override;

 private:
  BackendDescriptor descriptor_;
  std::size_t period_;
};

// Exact feature-row match against observed rows, else mean (regression) or
// mode (classification) of the observed targets. Config "problem" selects.
class LookupTabularPredictor final : public Backend {
 public:
  explicit LookupTabularPredictor(std::string backend_id);
  const BackendDescriptor& descriptor() const override { return descriptor_; }
  InvocationResult call(const InvocationRequest& request) const override;

 private:
  BackendDescriptor descriptor_;
};

// The four bundled mocks under their default ids:
// scripted-llm, last-value, seasonal-naive, lookup-tab.
std::vector<std::shared_ptr<const Backend>> default_mocks(ChatScript script = ChatScript::replies({"{{echo}}"}));

}  // namespace eywa
