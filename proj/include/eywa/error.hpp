#pragma once

#include <stdexcept>
#include <string>

namespace eywa {

// Every failure surfaced by the library carries a short machine-readable code
// (e.g. "no_records", "transport", "unknown_backend") next to the message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace eywa
