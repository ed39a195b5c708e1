#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eywa::text {

// Plain decimal with optional sign and exponent; rejects inf/nan/hex and
// anything with surrounding characters.
std::optional<double> parse_decimal(std::string_view s);

// Shortest representation that parses back to the same double.
std::string format_number(double v);

std::string_view trim(std::string_view s);
bool is_space(char c);

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// FNV-1a, rendered as 16 hex digits.
std::string digest_hex(std::string_view s);

// Largest prefix length <= max_bytes that does not cut a UTF-8 sequence.
std::size_t utf8_safe_prefix(std::string_view s, std::size_t max_bytes);

}  // namespace eywa::text
