#include "eywa/bench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eywa/csv.hpp"
#include "eywa/error.hpp"
#include "eywa/text.hpp"

namespace eywa {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kFields[] = {"domain", "task", "description", "output_size", "input", "label"};

struct DomainRow {
  const char* sub;
  const char* parent;
};

constexpr DomainRow kTaxonomy[] = {
    {"material", "physical"}, {"energy", "physical"},  {"space", "physical"},
    {"biology", "life"},      {"clinic", "life"},      {"drug", "life"},
    {"economy", "social"},    {"business", "social"},  {"infrastructure", "social"},
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string canonical_sub_domain(std::string_view label) {
  std::string key = lower(text::trim(label));
  if (key == "materials") key = "material";
  for (const auto& row : kTaxonomy)
    if (key == row.sub) return key;
  throw Error("unknown_domain", "unknown sub-domain '" + std::string(label) + "'");
}

[[noreturn]] void field_error(std::string_view field, const std::string& why) {
  throw Error("validation", "field '" + std::string(field) + "': " + why);
}

}  // namespace

const std::vector<std::string>& sub_domains() {
  static const std::vector<std::string> labels = [] {
    std::vector<std::string> v;
    for (const auto& row : kTaxonomy) v.emplace_back(row.sub);
    return v;
  }();
  return labels;
}

const std::vector<std::string>& parent_domains() {
  static const std::vector<std::string> labels = {"physical", "life", "social"};
  return labels;
}

std::string parent_domain_of(std::string_view sub_domain) {
  std::string key = canonical_sub_domain(sub_domain);
  for (const auto& row : kTaxonomy)
    if (key == row.sub) return row.parent;
  throw Error("unknown_domain", "unknown sub-domain '" + std::string(sub_domain) + "'");
}

TaskKind parse_task_kind(std::string_view task) {
  std::string key = lower(text::trim(task));
  std::replace(key.begin(), key.end(), ' ', '_');
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "natural_language_qa" || key == "natural_language" || key == "qa" || key == "nl" ||
      key == "question_answering")
    return TaskKind::kNaturalLanguage;
  if (key == "time_series_forecast" || key == "time_series" || key == "forecast" ||
      key == "time_series_forecasting")
    return TaskKind::kForecast;
  if (key == "tabular_classification" || key == "classification") return TaskKind::kTabularClassification;
  if (key == "tabular_regression" || key == "regression") return TaskKind::kTabularRegression;
  throw Error("unknown_task", "unknown task type '" + std::string(task) + "'");
}

std::string_view canonical_task_label(TaskKind kind) {
  switch (kind) {
    case TaskKind::kNaturalLanguage: return "natural_language_qa";
    case TaskKind::kForecast: return "time_series_forecast";
    case TaskKind::kTabularClassification: return "tabular_classification";
    case TaskKind::kTabularRegression: return "tabular_regression";
  }
  return "";
}

Modality modality_of(TaskKind kind) {
  switch (kind) {
    case TaskKind::kNaturalLanguage: return Modality::kNaturalLanguage;
    case TaskKind::kForecast: return Modality::kTimeSeries;
    default: return Modality::kTabular;
  }
}

std::string_view modality_label(Modality m) {
  switch (m) {
    case Modality::kNaturalLanguage: return "natural_language";
    case Modality::kTimeSeries: return "time_series";
    case Modality::kTabular: return "tabular";
  }
  return "";
}

TaskKind TaskInstance::kind() const { return parse_task_kind(task); }
Modality TaskInstance::modality() const { return modality_of(kind()); }
std::string TaskInstance::parent_domain() const { return parent_domain_of(domain); }

std::vector<double> Series::values() const {
  std::vector<double> v;
  v.reserve(points.size());
  for (const auto& p : points) v.push_back(p.value);
  return v;
}

std::size_t Table::target_index() const {
  auto it = std::find(columns.begin(), columns.end(), target_column);
  if (it == columns.end()) throw Error("parse", "target column '" + target_column + "' not in header");
  return static_cast<std::size_t>(it - columns.begin());
}

// ---------------------------------------------------------------- series

Series parse_series_csv(std::string_view text) {
  auto lines = text::split_lines(text);
  while (!lines.empty() && text::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty() || text::trim(lines.front()) != "timestamp,value")
    throw Error("parse", "missing header 'timestamp,value'");
  Series series;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw Error("parse", "line " + std::to_string(i + 1) + ": expected 'timestamp,value'");
    auto value = text::parse_decimal(text::trim(std::string_view(line).substr(comma + 1)));
    if (!value) throw Error("parse", "line " + std::to_string(i + 1) + ": non-numeric value");
    series.points.push_back({std::string(text::trim(std::string_view(line).substr(0, comma))), *value});
  }
  if (series.points.empty()) throw Error("parse", "empty series");
  return series;
}

std::string serialize_series_csv(const Series& series) {
  std::string out = "timestamp,value";
  for (const auto& p : series.points) {
    out += '\n';
    out += p.timestamp;
    out += ',';
    out += text::format_number(p.value);
  }
  return out;
}

// ---------------------------------------------------------------- tables

Table parse_table_csv(std::string_view text, std::string_view target_column, std::string_view mask_token) {
  auto records = csv::read(text);
  while (!records.empty() && records.back().size() == 1 && text::trim(records.back()[0]).empty())
    records.pop_back();
  if (records.empty()) throw Error("parse", "missing header line");
  Table table;
  table.columns = records.front();
  table.target_column = std::string(target_column);
  std::size_t target = table.target_index();
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    std::size_t row_index = r - 1;
    if (rec.size() != table.columns.size())
      throw Error("parse", "row " + std::to_string(row_index) + ": expected " +
                               std::to_string(table.columns.size()) + " cells, got " + std::to_string(rec.size()));
    std::vector<Cell> cells;
    cells.reserve(rec.size());
    for (const auto& raw : rec) cells.push_back({raw, text::parse_decimal(text::trim(raw))});
    if (text::trim(rec[target]) == mask_token) table.masked_rows.push_back(row_index);
    table.rows.push_back(std::move(cells));
  }
  return table;
}

std::string serialize_table_csv(const Table& table) {
  std::string out = csv::write_row(table.columns);
  for (const auto& row : table.rows) {
    csv::Row raw;
    raw.reserve(row.size());
    for (const auto& cell : row) raw.push_back(cell.text);
    out += '\n';
    out += csv::write_row(raw);
  }
  return out;
}

std::string infer_target_column(std::string_view text, std::string_view mask_token) {
  auto records = csv::read(text);
  if (records.empty()) throw Error("parse", "missing header line");
  const auto& header = records.front();
  std::vector<bool> hit(header.size(), false);
  for (std::size_t r = 1; r < records.size(); ++r)
    for (std::size_t c = 0; c < records[r].size() && c < header.size(); ++c)
      if (text::trim(records[r][c]) == mask_token) hit[c] = true;
  std::optional<std::size_t> found;
  for (std::size_t c = 0; c < hit.size(); ++c) {
    if (!hit[c]) continue;
    if (found) throw Error("parse", "mask token appears in more than one column");
    found = c;
  }
  if (!found) throw Error("parse", "no column holds the mask token");
  return header[*found];
}

std::vector<std::string> parse_value_list(std::string_view raw, std::string_view header) {
  std::string_view body = text::trim(raw);
  std::vector<std::string> out;
  auto push_item = [&](std::string_view item) {
    item = text::trim(item);
    if (item.size() >= 2 && (item.front() == '"' || item.front() == '\'') && item.back() == item.front())
      item = item.substr(1, item.size() - 2);
    out.emplace_back(item);
  };
  if (!body.empty() && body.front() == '[') {
    std::string item;
    char quote = 0;
    bool any = false;
    for (char c : body) {
      if (quote) {
        item.push_back(c);
        if (c == quote) quote = 0;
        continue;
      }
      if (c == '"' || c == '\'') {
        quote = c;
        item.push_back(c);
      } else if (c == '[' || c == ']') {
        continue;
      } else if (c == ',') {
        push_item(item);
        item.clear();
        any = true;
      } else {
        item.push_back(c);
      }
    }
    if (any || !text::trim(item).empty()) push_item(item);
    return out;
  }
  std::vector<std::string> lines;
  for (auto& line : text::split_lines(body))
    if (!text::trim(line).empty()) lines.push_back(line);
  std::size_t start = 0;
  if (!header.empty() && !lines.empty() && text::trim(lines.front()) == header) start = 1;
  for (std::size_t i = start; i < lines.size(); ++i) {
    auto records = csv::read(lines[i]);
    for (auto& cell : records.front()) push_item(cell);
  }
  return out;
}

// ---------------------------------------------------------------- instances

void validate(const TaskInstance& task) {
  try {
    canonical_sub_domain(task.domain);
  } catch (const Error& e) {
    field_error("domain", e.what());
  }
  TaskKind kind;
  try {
    kind = task.kind();
  } catch (const Error& e) {
    field_error("task", e.what());
  }
  if (task.input.empty()) field_error("input", "must be non-empty");
  if (task.label.empty()) field_error("label", "must be non-empty");
  if (task.output_size < 0) field_error("output_size", "must be non-negative");
  if (kind != TaskKind::kNaturalLanguage && task.output_size < 1)
    field_error("output_size", "must be >= 1 for forecast and tabular tasks");

  if (kind == TaskKind::kForecast) {
    try {
      parse_series_csv(task.input);
    } catch (const Error& e) {
      field_error("input", e.what());
    }
    Series gold;
    try {
      gold = parse_series_csv(task.label);
    } catch (const Error& e) {
      field_error("label", e.what());
    }
    if (static_cast<std::int64_t>(gold.size()) != task.output_size)
      field_error("label", "gold continuation has " + std::to_string(gold.size()) + " points, output_size is " +
                               std::to_string(task.output_size));
  } else if (kind == TaskKind::kTabularClassification || kind == TaskKind::kTabularRegression) {
    Table table;
    try {
      table = parse_table_csv(task.input, infer_target_column(task.input));
    } catch (const Error& e) {
      field_error("input", e.what());
    }
    if (static_cast<std::int64_t>(table.masked_rows.size()) != task.output_size)
      field_error("output_size", "table has " + std::to_string(table.masked_rows.size()) + " masked rows");
    auto gold = parse_value_list(task.label, table.target_column);
    if (static_cast<std::int64_t>(gold.size()) != task.output_size)
      field_error("label", "expected " + std::to_string(task.output_size) + " targets, got " +
                               std::to_string(gold.size()));
    if (kind == TaskKind::kTabularRegression)
      for (const auto& v : gold)
        if (!text::parse_decimal(v)) field_error("label", "non-numeric regression target '" + v + "'");
  }
}

namespace {

TaskInstance instance_from_json(const nlohmann::json& obj, std::size_t index) {
  auto where = [&](std::string_view field) { return "record " + std::to_string(index) + ": field '" + std::string(field) + "'"; };
  if (!obj.is_object()) throw Error("malformed", "record " + std::to_string(index) + ": not a JSON object");
  if (obj.size() != 6)
    throw Error("malformed", "record " + std::to_string(index) + ": expected 6 fields, got " + std::to_string(obj.size()));
  for (const char* f : kFields)
    if (!obj.contains(f)) throw Error("malformed", where(f) + " missing");
  TaskInstance t;
  auto get_string = [&](const char* f) {
    const auto& v = obj.at(f);
    if (!v.is_string()) throw Error("malformed", where(f) + " must be a string");
    return v.get<std::string>();
  };
  t.domain = get_string("domain");
  t.task = get_string("task");
  t.description = get_string("description");
  const auto& size = obj.at("output_size");
  if (!size.is_number_integer()) throw Error("malformed", where("output_size") + " must be an integer");
  t.output_size = size.get<std::int64_t>();
  t.input = get_string("input");
  t.label = get_string("label");
  try {
    validate(t);
  } catch (const Error& e) {
    throw Error("validation", "record " + std::to_string(index) + ": " + e.what());
  }
  return t;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

BenchmarkSet parse_benchmark(std::string_view jsonl, std::string source_path) {
  BenchmarkSet set;
  set.source_path = std::move(source_path);
  std::size_t index = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    if (text::trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("malformed", "record " + std::to_string(index) + ": invalid JSON (" + e.what() + ")");
    }
    set.instances.push_back(instance_from_json(obj, index));
    ++index;
  }
  if (set.instances.empty()) throw Error("no_records", "no records");
  return set;
}

BenchmarkSet load_benchmark(const std::filesystem::path& path) {
  return parse_benchmark(read_file(path), path.string());
}

std::string serialize_benchmark(const BenchmarkSet& set) {
  std::string out;
  for (const auto& t : set.instances) {
    ordered_json obj;
    obj["domain"] = t.domain;
    obj["task"] = t.task;
    obj["description"] = t.description;
    obj["output_size"] = t.output_size;
    obj["input"] = t.input;
    obj["label"] = t.label;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void save_benchmark(const BenchmarkSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write '" + path.string() + "'");
  out << serialize_benchmark(set);
  if (!out) throw Error("io", "write failed for '" + path.string() + "'");
}

BenchmarkSet convert_csv(std::string_view csv_text, std::string source_path) {
  auto records = csv::read(csv_text);
  if (records.empty()) throw Error("no_records", "no records");
  const auto& header = records.front();
  if (header.size() != 6 || !std::equal(header.begin(), header.end(), std::begin(kFields)))
    throw Error("malformed", "header must be domain,task,description,output_size,input,label");
  BenchmarkSet set;
  set.source_path = std::move(source_path);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    std::size_t index = r - 1;
    if (rec.size() == 1 && text::trim(rec[0]).empty()) continue;
    if (rec.size() != 6)
      throw Error("malformed", "record " + std::to_string(index) + ": expected 6 fields, got " + std::to_string(rec.size()));
    nlohmann::json obj;
    obj["domain"] = rec[0];
    obj["task"] = rec[1];
    obj["description"] = rec[2];
    auto size = text::parse_decimal(text::trim(rec[3]));
    if (!size || *size != std::floor(*size))
      throw Error("malformed", "record " + std::to_string(index) + ": field 'output_size' must be an integer");
    obj["output_size"] = static_cast<std::int64_t>(*size);
    obj["input"] = rec[4];
    obj["label"] = rec[5];
    set.instances.push_back(instance_from_json(obj, index));
  }
  if (set.instances.empty()) throw Error("no_records", "no records");
  return set;
}

// ---------------------------------------------------------------- composition

CompositionStats composition_stats(const std::map<std::string, std::int64_t>& counts) {
  CompositionStats stats;
  std::int64_t total = 0;
  std::size_t nonzero = 0;
  for (const auto& [label, n] : counts) {
    if (n < 0) throw Error("invalid", "negative count for '" + label + "'");
    stats.counts[label] = n;
    total += n;
    if (n > 0) ++nonzero;
  }
  if (total == 0) throw Error("empty", "composition over an empty distribution");
  if (nonzero <= 1) return stats;
  double h = 0;
  for (const auto& [label, n] : counts) {
    if (n == 0) continue;
    double p = static_cast<double>(n) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  stats.normalized_entropy = std::clamp(h / std::log(static_cast<double>(nonzero)), 0.0, 1.0);
  return stats;
}

CompositionStats composition_stats(const std::vector<TaskInstance>& instances, CompositionAxis axis) {
  if (instances.empty()) throw Error("empty", "composition over no instances");
  std::map<std::string, std::int64_t> counts;
  for (const auto& t : instances) {
    switch (axis) {
      case CompositionAxis::kParentDomain: counts[t.parent_domain()]++; break;
      case CompositionAxis::kSubDomain: counts[canonical_sub_domain(t.domain)]++; break;
      case CompositionAxis::kModality: counts[std::string(modality_label(t.modality()))]++; break;
    }
  }
  return composition_stats(counts);
}

}  // namespace eywa
