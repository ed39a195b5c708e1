#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "eywa/bench.hpp"

namespace eywa {

// Output contracts for final answers. Each parser throws
// eywa::Error("unparseable") when the answer does not satisfy the task's contract.

// Last `timestamp,value` block in the reply; exactly output_size rows.
Series parse_forecast_answer(std::string_view answer, const TaskInstance& task);

// `[v1, v2, ...]` or one value per line; exactly output_size values, numeric
// for regression tasks.
std::vector<std::string> parse_tabular_answer(std::string_view answer, const TaskInstance& task);

// Text after the last "Final answer:" marker (or the whole reply), trimmed,
// non-empty and at most output_size characters when output_size > 0.
std::string parse_text_answer(std::string_view answer, const TaskInstance& task);

// Dispatches on task kind; returns normally when the answer is acceptable.
void check_answer(std::string_view answer, const TaskInstance& task);

}  // namespace eywa
