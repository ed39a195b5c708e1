#include "eywa/answer.hpp"

#include <algorithm>
#include <cctype>

#include "eywa/error.hpp"
#include "eywa/text.hpp"

namespace eywa {
namespace {

std::vector<std::string> content_lines(std::string_view answer) {
  std::vector<std::string> lines;
  for (auto& line : text::split_lines(answer)) {
    auto t = text::trim(line);
    if (t.rfind("```", 0) == 0) continue;
    lines.emplace_back(t);
  }
  return lines;
}

[[noreturn]] void unparseable(const std::string& why) { throw Error("unparseable", why); }

}  // namespace

Series parse_forecast_answer(std::string_view answer, const TaskInstance& task) {
  auto lines = content_lines(answer);
  auto header = std::find(lines.rbegin(), lines.rend(), "timestamp,value");
  if (header == lines.rend()) unparseable("no 'timestamp,value' block in answer");
  Series series;
  for (auto it = header.base(); it != lines.end(); ++it) {
    auto comma = it->find(',');
    if (comma == std::string::npos || it->find(',', comma + 1) != std::string::npos) break;
    auto value = text::parse_decimal(text::trim(std::string_view(*it).substr(comma + 1)));
    if (!value) break;
    series.points.push_back({std::string(text::trim(std::string_view(*it).substr(0, comma))), *value});
  }
  if (static_cast<std::int64_t>(series.size()) != task.output_size)
    unparseable("forecast has " + std::to_string(series.size()) + " rows, expected " +
                std::to_string(task.output_size));
  return series;
}

std::vector<std::string> parse_tabular_answer(std::string_view answer, const TaskInstance& task) {
  std::string body = text::join(content_lines(answer), "\n");
  auto open = body.find('[');
  auto close = body.rfind(']');
  std::vector<std::string> values;
  if (open != std::string::npos && close != std::string::npos && close > open) {
    values = parse_value_list(std::string_view(body).substr(open, close - open + 1));
  } else {
    std::string target;
    try {
      target = infer_target_column(task.input);
    } catch (const Error&) {
    }
    values = parse_value_list(body, target);
  }
  if (static_cast<std::int64_t>(values.size()) != task.output_size)
    unparseable("answer has " + std::to_string(values.size()) + " values, expected " +
                std::to_string(task.output_size));
  if (task.kind() == TaskKind::kTabularRegression)
    for (const auto& v : values)
      if (!text::parse_decimal(text::trim(v))) unparseable("non-numeric regression value '" + v + "'");
  return values;
}

std::string parse_text_answer(std::string_view answer, const TaskInstance& task) {
  std::string lowered(answer);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(), [](unsigned char c) { return std::tolower(c); });
  constexpr std::string_view kMarker = "final answer:";
  std::string_view body = answer;
  if (auto pos = lowered.rfind(kMarker); pos != std::string::npos) body = answer.substr(pos + kMarker.size());
  body = text::trim(body);
  if (body.empty()) unparseable("empty answer");
  std::int64_t chars = 0;
  for (unsigned char c : body)
    if ((c & 0xC0) != 0x80) ++chars;
  if (task.output_size > 0 && chars > task.output_size)
    unparseable("answer longer than output_size (" + std::to_string(task.output_size) + ")");
  return std::string(body);
}

void check_answer(std::string_view answer, const TaskInstance& task) {
  switch (task.kind()) {
    case TaskKind::kNaturalLanguage: parse_text_answer(answer, task); break;
    case TaskKind::kForecast: parse_forecast_answer(answer, task); break;
    default: parse_tabular_answer(answer, task); break;
  }
}

}  // namespace eywa
