#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "eywa/error.hpp"
#include "eywa/metrics.hpp"
#include "eywa/text.hpp"
#include "oracle/metric_oracle.hpp"

using namespace eywa;
using namespace eywa::metrics;

namespace {

using Tokens = std::vector<std::string>;

std::string random_text(std::mt19937_64& rng) {
  static const std::string alphabet = "ab  c12.3-+x\\\"'\t";
  int n = static_cast<int>(rng() % 24);
  std::string s;
  for (int i = 0; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
  return s;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> wide(-100, 100);
  std::vector<double> v(n);
  for (auto& x : v) {
    switch (rng() % 4) {
      case 0: x = 0; break;
      case 1: x = 0.005 * static_cast<double>(rng() % 3); break;
      default: x = wide(rng);
    }
  }
  return v;
}

}  // namespace

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_text("  \"Answer\"  "), "Answer");
  EXPECT_EQ(normalize_text("a   b\tc"), "a b c");
  EXPECT_EQ(normalize_text("“x” – y"), "x\" - y");
  EXPECT_EQ(normalize_text("2×3 − 1"), "2x3 - 1");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("  ''  "), "");
}

TEST(Normalize, Idempotent) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    auto once = normalize_text(random_text(rng));
    EXPECT_EQ(normalize_text(once), once);
  }
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize_answer("\\frac 12 x+1"), (Tokens{"\\frac", "12", "x", "+", "1"}));
  EXPECT_EQ(tokenize_answer(""), Tokens{});
  EXPECT_EQ(tokenize_answer("3.14 pi"), (Tokens{"3.14", "pi"}));
  EXPECT_EQ(tokenize_answer("-5 a-5"), (Tokens{"-5", "a", "-", "5"}));
}

TEST(TokenF1, Examples) {
  EXPECT_DOUBLE_EQ(token_f1({"a", "b"}, {"a", "c"}), 0.5);
  EXPECT_DOUBLE_EQ(token_f1({"a", "b"}, {"a", "b"}), 1.0);
  EXPECT_DOUBLE_EQ(token_f1({}, {"a"}), 0.0);
  EXPECT_DOUBLE_EQ(token_f1({}, {}), 1.0);
  EXPECT_DOUBLE_EQ(token_f1({"x"}, {"y"}), 0.0);
}

TEST(CharSimilarity, FrozenFixtures) {
  std::ifstream in(EYWA_TEST_DATA_DIR "/difflib_fixtures.json");
  ASSERT_TRUE(in) << "fixture file missing";
  auto fixtures = nlohmann::json::parse(in);
  ASSERT_GT(fixtures.size(), 5u);
  for (const auto& f : fixtures) {
    auto a = f["a"].get<std::string>(), b = f["b"].get<std::string>();
    EXPECT_NEAR(char_similarity(a, b), f["ratio"].get<double>(), 1e-12) << a << " | " << b;
  }
}

TEST(NaturalLanguage, Examples) {
  auto exact = score_natural_language("42", "42");
  EXPECT_EQ(exact.value, 1.0);
  EXPECT_EQ(exact.stage, Stage::kExact);

  auto numeric = score_natural_language("1.1", "1.0");
  EXPECT_NEAR(numeric.value, 0.904837, 1e-6);
  EXPECT_NEAR(numeric.value, std::exp(-0.1), 1e-12);
  EXPECT_EQ(numeric.stage, Stage::kNumeric);

  // S_char for this pair is 2/3 in the frozen fixture.
  auto lexical = score_natural_language("alpha beta", "alpha gamma");
  EXPECT_NEAR(lexical.value, std::min(0.8, 0.6 * 0.5 + 0.4 * (2.0 / 3.0)), 1e-12);
  EXPECT_EQ(lexical.stage, Stage::kLexical);
  EXPECT_NEAR(lexical.terms.at("F1_tok"), 0.5, 1e-12);
}

TEST(NaturalLanguage, ZeroGoldUsesFloor) {
  auto s = score_natural_language("0", "0.0");
  EXPECT_EQ(s.stage, Stage::kNumeric);
  EXPECT_EQ(s.value, 1.0);
  EXPECT_LT(score_natural_language("1e-9", "0").value, 1e-100);
}

TEST(NaturalLanguage, Invariants) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    auto a = random_text(rng), b = random_text(rng);
    EXPECT_EQ(score_natural_language(a, a).value, 1.0);
    auto s = score_natural_language(a, b);
    EXPECT_GE(s.value, 0.0);
    EXPECT_LE(s.value, 1.0);
    if (s.stage == Stage::kLexical) {
      EXPECT_LE(s.value, kLexicalCap);
    }
    if (s.stage == Stage::kNumeric) {
      EXPECT_GT(s.value, 0.0);
    }
  }
}

TEST(TimeSeries, Examples) {
  std::vector<double> one{1, 1}, two{2, 2};
  EXPECT_EQ(score_time_series(one, one).value, 1.0);
  auto s = score_time_series(two, one);
  EXPECT_NEAR(s.value, 7.0 / 12.0, 1e-12);
  EXPECT_NEAR(s.terms.at("sMAPE"), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(s.terms.at("MAAPE"), std::numbers::pi / 4, 1e-12);
  std::vector<double> zero{0}, unit{1};
  auto z = score_time_series(unit, zero);
  EXPECT_NEAR(z.value, 0.5, 1e-12);
  EXPECT_EQ(z.terms.at("MAAPE"), 0.0);
}

TEST(TimeSeries, Errors) {
  std::vector<double> a{1, 2}, b{1};
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return std::string();
  };
  EXPECT_EQ(code([&] { score_time_series(a, b); }), "length_mismatch");
  std::vector<double> nan{std::nan(""), 1};
  EXPECT_EQ(code([&] { score_time_series(nan, a); }), "non_finite");
  EXPECT_EQ(code([&] { score_time_series(std::vector<double>{}, std::vector<double>{}); }), "empty");
}

TEST(TimeSeries, SmapeIsSymmetric) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    auto n = 1 + rng() % 10;
    auto p = random_values(rng, n), g = random_values(rng, n);
    EXPECT_NEAR(score_time_series(p, g).terms.at("sMAPE"), score_time_series(g, p).terms.at("sMAPE"), 1e-15);
  }
}

TEST(Tabular, Examples) {
  EXPECT_NEAR(score_tabular({"A", "B", "A"}, {"A", "B", "B"}, TabularKind::kClassification).value, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(score_tabular({"x", "y"}, {"x", "y"}, TabularKind::kClassification).value, 1.0);
  EXPECT_EQ(score_tabular({"1", "2"}, {"1", "2"}, TabularKind::kRegression).value, 1.0);
  EXPECT_NEAR(score_tabular({"2", "2"}, {"1", "1"}, TabularKind::kRegression).value, 7.0 / 12.0, 1e-12);
  EXPECT_EQ(score_tabular({" \"yes\" "}, {"yes"}, TabularKind::kClassification).value, 1.0);
  EXPECT_THROW(score_tabular({"a"}, {"1"}, TabularKind::kRegression), Error);
  EXPECT_THROW(score_tabular({"1"}, {"1", "2"}, TabularKind::kClassification), Error);
}

TEST(Aggregate, Examples) {
  std::vector<double> pair{0.5, 1.0};
  auto s = aggregate(pair);
  EXPECT_DOUBLE_EQ(s.mean_utility, 0.75);
  EXPECT_NEAR(s.sample_std, 0.353553, 1e-6);
  EXPECT_EQ(s.n, 2u);
  std::vector<double> single{0.3};
  EXPECT_EQ(aggregate(single).sample_std, 0.0);
  std::vector<double> same(200, 0.42);
  EXPECT_NEAR(aggregate(same).mean_utility, 0.42, 1e-12);
  EXPECT_NEAR(aggregate(same).sample_std, 0.0, 1e-12);
  EXPECT_THROW(aggregate(std::vector<double>{}), Error);
}

TEST(Aggregate, BoundedAndPermutationInvariant) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u01(0, 1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> v(1 + rng() % 30);
    for (auto& x : v) x = u01(rng);
    auto a = aggregate(v);
    EXPECT_GE(a.mean_utility, *std::min_element(v.begin(), v.end()) - 1e-15);
    EXPECT_LE(a.mean_utility, *std::max_element(v.begin(), v.end()) + 1e-15);
    std::shuffle(v.begin(), v.end(), rng);
    auto b = aggregate(v);
    EXPECT_NEAR(a.mean_utility, b.mean_utility, 1e-12);
    EXPECT_NEAR(a.sample_std, b.sample_std, 1e-12);
  }
}

TEST(Oracle, AgreesOnRandomNaturalLanguage) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    auto a = random_text(rng), b = random_text(rng);
    auto mine = score_natural_language(a, b);
    auto ref = oracle::score_nl(a, b);
    ASSERT_NEAR(mine.value, ref.u, 1e-12) << "'" << a << "' vs '" << b << "'";
    EXPECT_EQ(static_cast<int>(mine.stage), ref.stage);
  }
}

TEST(Oracle, AgreesOnRandomSeries) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 1000; ++i) {
    auto n = 1 + rng() % 20;
    auto g = random_values(rng, n), p = random_values(rng, n);
    ASSERT_NEAR(score_time_series(p, g).value, oracle::score_series(g, p), 1e-12);
  }
}

TEST(Oracle, AgreesOnRandomTables) {
  std::mt19937_64 rng(31);
  const std::vector<std::string> labels = {"a", "b", " a", "\"b\"", "c"};
  for (int i = 0; i < 1000; ++i) {
    auto n = 1 + rng() % 8;
    std::vector<std::string> p(n), g(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = labels[rng() % labels.size()];
      g[k] = labels[rng() % labels.size()];
    }
    ASSERT_NEAR(score_tabular(p, g, TabularKind::kClassification).value, oracle::score_classification(p, g), 1e-12);
    auto gv = random_values(rng, n), pv = random_values(rng, n);
    std::vector<std::string> ps, gs;
    for (std::size_t k = 0; k < n; ++k) {
      ps.push_back(text::format_number(pv[k]));
      gs.push_back(text::format_number(gv[k]));
    }
    ASSERT_NEAR(score_tabular(ps, gs, TabularKind::kRegression).value, oracle::score_series(gv, pv), 1e-12);
  }
}

TEST(ScoreInstance, DispatchesOnTask) {
  TaskInstance qa{"biology", "natural_language_qa", "", 0, "q", "46"};
  EXPECT_EQ(score_instance(qa, "Final answer: 46").value, 1.0);
  TaskInstance ts{"energy", "time_series_forecast", "", 2, "timestamp,value\n0,1", "timestamp,value\n1,1\n2,1"};
  EXPECT_NEAR(score_instance(ts, "timestamp,value\n1,2\n2,2").value, 7.0 / 12.0, 1e-12);
  EXPECT_THROW(score_instance(ts, "timestamp,value\n1,2"), Error);
}
