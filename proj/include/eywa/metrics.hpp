#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eywa/bench.hpp"

namespace eywa::metrics {

inline constexpr double kLexicalCap = 0.8;      // tau
inline constexpr double kTokenF1Weight = 0.6;   // alpha
inline constexpr double kCharSimWeight = 0.4;   // beta
inline constexpr double kRelErrorFloor = 1e-12;
inline constexpr double kSeriesFloor = 1e-2;    // epsilon in sMAPE / MAAPE

enum class Stage { kExact, kNumeric, kLexical, kTimeSeries, kAccuracy, kRegression };

std::string_view stage_label(Stage s);

struct UtilityScore {
  double value = 0;
  Stage stage = Stage::kExact;
  std::map<std::string, double> terms;
};

struct SliceSummary {
  double mean_utility = 0;
  double sample_std = 0;
  std::size_t n = 0;
};

// pi: Unicode map, then strip outer whitespace and ASCII quotes, then collapse
// inner whitespace runs to one space.
std::string normalize_text(std::string_view s);

// Class order: \command, alphabetic word, number, single non-space symbol.
// A leading +/- joins a number only at string start or after whitespace.
std::vector<std::string> tokenize_answer(std::string_view s);

double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold);

// Ratcliff/Obershelp 2M/T with no junk heuristic (byte-wise).
double char_similarity(std::string_view a, std::string_view b);

UtilityScore score_natural_language(std::string_view pred, std::string_view gold);

// Throws eywa::Error("length_mismatch") / ("non_finite") / ("empty").
UtilityScore score_time_series(std::span<const double> pred, std::span<const double> gold);
UtilityScore score_time_series(const Series& pred, const Series& gold);

enum class TabularKind { kClassification, kRegression };
UtilityScore score_tabular(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                           TabularKind kind);

SliceSummary aggregate(std::span<const double> utilities);
SliceSummary aggregate(const std::vector<UtilityScore>& scores);

// Scores a final answer against an instance's gold label, dispatching on the
// task type. Throws eywa::Error when the answer does not fit the output contract.
UtilityScore score_instance(const TaskInstance& task, std::string_view answer);

}  // namespace eywa::metrics
