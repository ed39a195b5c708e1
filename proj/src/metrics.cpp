#include "eywa/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "eywa/answer.hpp"
#include "eywa/error.hpp"
#include "eywa/text.hpp"

namespace eywa::metrics {
namespace {

struct UnicodeFold {
  std::string_view from;
  std::string_view to;
};

constexpr UnicodeFold kFolds[] = {
    {"‘", "'"}, {"’", "'"}, {"“", "\""}, {"”", "\""}, {"–", "-"},
    {"—", "-"}, {"−", "-"}, {" ", " "},  {"×", "x"},
};

bool is_quote(char c) { return c == '"' || c == '\''; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::size_t utf8_length(unsigned char lead) {
  if (lead >= 0xF0) return 4;
  if (lead >= 0xE0) return 3;
  if (lead >= 0xC0) return 2;
  return 1;
}

// Digits with at most one interior decimal point; returns the match length.
std::size_t match_number(std::string_view s, std::size_t i) {
  std::size_t j = i;
  while (j < s.size() && is_digit(s[j])) ++j;
  if (j == i) return 0;
  if (j + 1 < s.size() && s[j] == '.' && is_digit(s[j + 1])) {
    j += 1;
    while (j < s.size() && is_digit(s[j])) ++j;
  }
  return j - i;
}

struct Block {
  std::size_t a, b, size;
};

// Longest matching block in a[alo,ahi) x b[blo,bhi); earliest in a, then in b.
Block longest_match(std::string_view a, std::size_t alo, std::size_t ahi, std::size_t blo, std::size_t bhi,
                    const std::unordered_map<char, std::vector<std::size_t>>& b2j) {
  Block best{alo, blo, 0};
  std::unordered_map<std::size_t, std::size_t> run_len, next_len;
  for (std::size_t i = alo; i < ahi; ++i) {
    next_len.clear();
    auto it = b2j.find(a[i]);
    if (it != b2j.end()) {
      for (std::size_t j : it->second) {
        if (j < blo) continue;
        if (j >= bhi) break;
        std::size_t k = 1;
        if (j > 0) {
          auto prev = run_len.find(j - 1);
          if (prev != run_len.end()) k = prev->second + 1;
        }
        next_len[j] = k;
        if (k > best.size) best = {i + 1 - k, j + 1 - k, k};
      }
    }
    std::swap(run_len, next_len);
  }
  return best;
}

}  // namespace

std::string_view stage_label(Stage s) {
  switch (s) {
    case Stage::kExact: return "exact";
    case Stage::kNumeric: return "numeric";
    case Stage::kLexical: return "lexical";
    case Stage::kTimeSeries: return "ts-combined";
    case Stage::kAccuracy: return "accuracy";
    case Stage::kRegression: return "regression";
  }
  return "";
}

std::string normalize_text(std::string_view s) {
  std::string mapped;
  mapped.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    bool folded = false;
    for (const auto& fold : kFolds) {
      if (s.substr(i, fold.from.size()) == fold.from) {
        mapped += fold.to;
        i += fold.from.size();
        folded = true;
        break;
      }
    }
    if (!folded) mapped.push_back(s[i++]);
  }

  std::string_view body = mapped;
  while (!body.empty() && (text::is_space(body.front()) || is_quote(body.front()))) body.remove_prefix(1);
  while (!body.empty() && (text::is_space(body.back()) || is_quote(body.back()))) body.remove_suffix(1);

  std::string out;
  out.reserve(body.size());
  bool pending_space = false;
  for (char c : body) {
    if (text::is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> tokenize_answer(std::string_view s) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (text::is_space(c)) {
      ++i;
      continue;
    }
    if (c == '\\' && i + 1 < s.size() && is_alpha(s[i + 1])) {
      std::size_t j = i + 1;
      while (j < s.size() && is_alpha(s[j])) ++j;
      tokens.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    if (is_alpha(c)) {
      std::size_t j = i;
      while (j < s.size() && is_alpha(s[j])) ++j;
      tokens.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    if ((c == '+' || c == '-') && (i == 0 || text::is_space(s[i - 1]))) {
      if (std::size_t n = match_number(s, i + 1)) {
        tokens.emplace_back(s.substr(i, n + 1));
        i += n + 1;
        continue;
      }
    }
    if (std::size_t n = match_number(s, i)) {
      tokens.emplace_back(s.substr(i, n));
      i += n;
      continue;
    }
    std::size_t n = std::min(utf8_length(static_cast<unsigned char>(c)), s.size() - i);
    tokens.emplace_back(s.substr(i, n));
    i += n;
  }
  return tokens;
}

double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::unordered_map<std::string, long> gold_counts;
  for (const auto& t : gold) ++gold_counts[t];
  long overlap = 0;
  for (const auto& t : pred) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2 * precision * recall / (precision + recall);
}

double char_similarity(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  std::unordered_map<char, std::vector<std::size_t>> b2j;
  for (std::size_t j = 0; j < b.size(); ++j) b2j[b[j]].push_back(j);

  std::size_t matched = 0;
  struct Range {
    std::size_t alo, ahi, blo, bhi;
  };
  std::vector<Range> pending{{0, a.size(), 0, b.size()}};
  while (!pending.empty()) {
    Range r = pending.back();
    pending.pop_back();
    Block m = longest_match(a, r.alo, r.ahi, r.blo, r.bhi, b2j);
    if (m.size == 0) continue;
    matched += m.size;
    if (r.alo < m.a && r.blo < m.b) pending.push_back({r.alo, m.a, r.blo, m.b});
    if (m.a + m.size < r.ahi && m.b + m.size < r.bhi)
      pending.push_back({m.a + m.size, r.ahi, m.b + m.size, r.bhi});
  }
  return 2.0 * static_cast<double>(matched) / static_cast<double>(a.size() + b.size());
}

UtilityScore score_natural_language(std::string_view pred, std::string_view gold) {
  std::string p = normalize_text(pred);
  std::string g = normalize_text(gold);
  if (p == g) return {1.0, Stage::kExact, {}};

  auto pv = text::parse_decimal(p);
  auto gv = text::parse_decimal(g);
  if (pv && gv) {
    double e_rel = std::fabs(*pv - *gv) / std::max(std::fabs(*gv), kRelErrorFloor);
    return {std::exp(-e_rel), Stage::kNumeric, {{"e_rel", e_rel}}};
  }

  double f1 = token_f1(tokenize_answer(p), tokenize_answer(g));
  double s_char = char_similarity(p, g);
  double u = std::min(kLexicalCap, kTokenF1Weight * f1 + kCharSimWeight * s_char);
  return {u, Stage::kLexical, {{"F1_tok", f1}, {"S_char", s_char}}};
}

UtilityScore score_time_series(std::span<const double> pred, std::span<const double> gold) {
  if (pred.size() != gold.size())
    throw Error("length_mismatch", "prediction has " + std::to_string(pred.size()) + " points, gold has " +
                                       std::to_string(gold.size()));
  if (gold.empty()) throw Error("empty", "cannot score an empty series");
  for (std::size_t t = 0; t < gold.size(); ++t)
    if (!std::isfinite(pred[t]) || !std::isfinite(gold[t])) throw Error("non_finite", "non-finite value in series");

  const double horizon = static_cast<double>(gold.size());
  double smape = 0;
  double maape = 0;
  std::size_t informative = 0;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    double err = std::fabs(gold[t] - pred[t]);
    smape += 2 * err / std::max(std::fabs(gold[t]) + std::fabs(pred[t]), kSeriesFloor);
    if (std::fabs(gold[t]) > kSeriesFloor) {
      maape += std::atan(err / std::max(std::fabs(gold[t]), kSeriesFloor));
      ++informative;
    }
  }
  smape /= horizon;
  maape = informative ? maape / static_cast<double>(informative) : 0.0;
  double u = 1 - 0.5 * (smape / 2 + maape / (std::numbers::pi / 2));
  return {std::clamp(u, 0.0, 1.0), Stage::kTimeSeries, {{"sMAPE", smape}, {"MAAPE", maape}}};
}

UtilityScore score_time_series(const Series& pred, const Series& gold) {
  auto p = pred.values();
  auto g = gold.values();
  return score_time_series(p, g);
}

UtilityScore score_tabular(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                           TabularKind kind) {
  if (pred.size() != gold.size())
    throw Error("length_mismatch", "prediction has " + std::to_string(pred.size()) + " values, gold has " +
                                       std::to_string(gold.size()));
  if (gold.empty()) throw Error("empty", "cannot score an empty target list");
  if (kind == TabularKind::kClassification) {
    std::size_t hits = 0;
    for (std::size_t n = 0; n < gold.size(); ++n)
      if (normalize_text(pred[n]) == normalize_text(gold[n])) ++hits;
    return {static_cast<double>(hits) / static_cast<double>(gold.size()), Stage::kAccuracy, {}};
  }
  std::vector<double> p, g;
  for (std::size_t n = 0; n < gold.size(); ++n) {
    auto pv = text::parse_decimal(text::trim(pred[n]));
    auto gv = text::parse_decimal(text::trim(gold[n]));
    if (!pv || !gv) throw Error("non_numeric", "regression target is not numeric at position " + std::to_string(n));
    p.push_back(*pv);
    g.push_back(*gv);
  }
  auto score = score_time_series(p, g);
  score.stage = Stage::kRegression;
  return score;
}

SliceSummary aggregate(std::span<const double> utilities) {
  if (utilities.empty()) throw Error("empty", "cannot aggregate an empty slice");
  SliceSummary s;
  s.n = utilities.size();
  s.mean_utility = std::accumulate(utilities.begin(), utilities.end(), 0.0) / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0;
    for (double u : utilities) ss += (u - s.mean_utility) * (u - s.mean_utility);
    s.sample_std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

SliceSummary aggregate(const std::vector<UtilityScore>& scores) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) values.push_back(s.value);
  return aggregate(values);
}

UtilityScore score_instance(const TaskInstance& task, std::string_view answer) {
  switch (task.kind()) {
    case TaskKind::kNaturalLanguage:
      return score_natural_language(parse_text_answer(answer, task), task.label);
    case TaskKind::kForecast:
      return score_time_series(parse_forecast_answer(answer, task), parse_series_csv(task.label));
    case TaskKind::kTabularClassification:
    case TaskKind::kTabularRegression: {
      auto pred = parse_tabular_answer(answer, task);
      auto gold = parse_value_list(task.label, infer_target_column(task.input));
      return score_tabular(pred, gold,
                           task.kind() == TaskKind::kTabularRegression ? TabularKind::kRegression
                                                                       : TabularKind::kClassification);
    }
  }
  throw Error("unknown_task", "unhandled task kind");
}

}  // namespace eywa::metrics
