#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eywa {

// Literal placed in a table's target column for rows the solver must predict.
inline constexpr std::string_view kMaskToken = "__MASK__";

enum class TaskKind { kNaturalLanguage, kForecast, kTabularClassification, kTabularRegression };
enum class Modality { kNaturalLanguage, kTimeSeries, kTabular };
enum class CompositionAxis { kParentDomain, kSubDomain, kModality };

/// One benchmark row. Field names and meaning follow the six-column schema:
/// `domain` is one of the nine sub-domain labels, `task` a task-type label,
/// `output_size` the answer budget (characters for QA, horizon for forecasts,
/// masked-row count for tables).
struct TaskInstance {
  std::string domain;
  std::string task;
  std::string description;
  std::int64_t output_size = 0;
  std::string input;
  std::string label;

  TaskKind kind() const;
  Modality modality() const;
  std::string parent_domain() const;

  bool operator==(const TaskInstance&) const = default;
};

struct BenchmarkSet {
  std::vector<TaskInstance> instances;
  std::string source_path;

  bool operator==(const BenchmarkSet&) const = default;
};

struct SeriesPoint {
  std::string timestamp;
  double value = 0;

  bool operator==(const SeriesPoint&) const = default;
};

struct Series {
  std::vector<SeriesPoint> points;

  std::size_t size() const { return points.size(); }
  std::vector<double> values() const;
  bool operator==(const Series&) const = default;
};

struct Cell {
  std::string text;
  std::optional<double> number;  // set when text is a plain decimal

  bool operator==(const Cell&) const = default;
};

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::string target_column;
  std::vector<std::size_t> masked_rows;

  std::size_t target_index() const;
  bool operator==(const Table&) const = default;
};

struct CompositionStats {
  std::map<std::string, std::int64_t> counts;
  double normalized_entropy = 0;
};

// Taxonomy lookups. Throw eywa::Error("unknown_domain"/"unknown_task").
std::string parent_domain_of(std::string_view sub_domain);
TaskKind parse_task_kind(std::string_view task);
std::string_view canonical_task_label(TaskKind kind);
std::string_view modality_label(Modality m);
Modality modality_of(TaskKind kind);
const std::vector<std::string>& sub_domains();
const std::vector<std::string>& parent_domains();

// Throws eywa::Error with code "validation" naming the failing field.
void validate(const TaskInstance& task);

BenchmarkSet load_benchmark(const std::filesystem::path& path);
BenchmarkSet parse_benchmark(std::string_view jsonl, std::string source_path = {});
std::string serialize_benchmark(const BenchmarkSet& set);
void save_benchmark(const BenchmarkSet& set, const std::filesystem::path& path);

// CSV with header `domain,task,description,output_size,input,label` -> instances.
BenchmarkSet convert_csv(std::string_view csv_text, std::string source_path = {});

Series parse_series_csv(std::string_view text);
std::string serialize_series_csv(const Series& series);

Table parse_table_csv(std::string_view text, std::string_view target_column,
                      std::string_view mask_token = kMaskToken);
std::string serialize_table_csv(const Table& table);
// The unique column holding mask tokens; throws when none or several do.
std::string infer_target_column(std::string_view text, std::string_view mask_token = kMaskToken);

// `[a, b]` list syntax or one value per line (a leading header line equal to
// `header` is skipped). Comma-separated lines are flattened row-wise.
std::vector<std::string> parse_value_list(std::string_view text, std::string_view header = {});

CompositionStats composition_stats(const std::vector<TaskInstance>& instances, CompositionAxis axis);
CompositionStats composition_stats(const std::map<std::string, std::int64_t>& counts);

}  // namespace eywa
