#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace eywa::csv {

using Row = std::vector<std::string>;

// RFC 4180 records: quoted fields may hold commas, doubled quotes and
// newlines. CRLF and LF terminators are both accepted; a trailing empty
// line is not a record. Throws eywa::Error("csv_syntax") on an unterminated quote.
std::vector<Row> read(std::string_view text);

std::string quote_field(std::string_view field);
std::string write_row(const Row& row);

}  // namespace eywa::csv
