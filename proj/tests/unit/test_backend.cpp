#include <gtest/gtest.h>

#include <random>

#include "eywa/backend.hpp"
#include "eywa/error.hpp"
#include "eywa/mocks.hpp"
#include "eywa/text.hpp"
#include "eywa/wire.hpp"

using namespace eywa;

namespace {

std::shared_ptr<BackendRegistry> mock_registry(ChatScript script = ChatScript::replies({"{{echo}}"})) {
  auto reg = std::make_shared<BackendRegistry>();
  for (auto& b : default_mocks(std::move(script))) reg->add(b);
  return reg;
}

Series make_series(std::vector<double> values, long long first = 0) {
  Series s;
  for (std::size_t i = 0; i < values.size(); ++i) s.points.push_back({std::to_string(first + static_cast<long long>(i)), values[i]});
  return s;
}

InvocationRequest forecast_request(std::string id, Series s, std::int64_t horizon) {
  return {std::move(id), InvocationType::kForecast, ForecastPayload{std::move(s)}, {{"horizon", horizon}}};
}

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

TaskInstance forecast_task(std::size_t n, std::int64_t horizon) {
  std::string input = "timestamp,value";
  for (std::size_t i = 0; i < n; ++i) input += "\n" + std::to_string(i) + "," + std::to_string(i % 7);
  std::string label = "timestamp,value";
  for (std::int64_t k = 0; k < horizon; ++k) label += "\n" + std::to_string(n + k) + ",1";
  return {"energy", "time_series_forecast", "", horizon, input, label};
}

}  // namespace

TEST(Tokens, MockCounter) {
  EXPECT_EQ(count_tokens_mock("a b  c"), 3);
  EXPECT_EQ(count_tokens_mock(""), 0);
  EXPECT_EQ(count_tokens_mock(" \n\t "), 0);
  std::vector<double> values(1000);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(i % 13) + 0.5;
  EXPECT_EQ(count_tokens_mock(serialize_series_csv(make_series(values))), 1001);
}

TEST(Registry, RejectsDuplicatesAndKeepsOrder) {
  auto reg = mock_registry();
  EXPECT_EQ(reg->ids(), (std::vector<std::string>{"scripted-llm", "last-value", "seasonal-naive", "lookup-tab"}));
  EXPECT_EQ(reg->ids(BackendKind::kTsFm), (std::vector<std::string>{"last-value", "seasonal-naive"}));
  EXPECT_EQ(code_of([&] { reg->add(std::make_shared<LastValueForecaster>("last-value")); }), "duplicate_backend");
  EXPECT_EQ(reg->descriptors().size(), 4u);
}

TEST(Descriptor, CapabilitiesFollowKind) {
  auto reg = mock_registry();
  EXPECT_TRUE(reg->find("last-value")->descriptor().supports(TaskKind::kForecast));
  EXPECT_FALSE(reg->find("last-value")->descriptor().supports(TaskKind::kTabularRegression));
  EXPECT_TRUE(reg->find("lookup-tab")->descriptor().supports(TaskKind::kTabularClassification));
  EXPECT_FALSE(reg->find("lookup-tab")->descriptor().supports(TaskKind::kNaturalLanguage));
  EXPECT_TRUE(reg->find("scripted-llm")->descriptor().supports(TaskKind::kNaturalLanguage));
}

TEST(Invoke, LastValueForecast) {
  auto reg = mock_registry();
  auto r = invoke(forecast_request("last-value", make_series({1, 3, 5.0}), 3), *reg);
  ASSERT_TRUE(r.ok());
  auto& s = std::get<Series>(*r.output);
  EXPECT_EQ(s.values(), (std::vector<double>{5, 5, 5}));
  EXPECT_EQ(s.points[0].timestamp, "3");
  EXPECT_EQ(r.usage.input_tokens, 0);
  EXPECT_EQ(r.usage.output_tokens, 0);
  EXPECT_EQ(r.usage.backend_id, "last-value");
}

TEST(Invoke, SeasonalNaive) {
  auto reg = mock_registry();
  auto r = invoke(forecast_request("seasonal-naive", make_series({1, 2, 1, 2}), 3), *reg);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(std::get<Series>(*r.output).values(), (std::vector<double>{1, 2, 1}));
  auto req = forecast_request("seasonal-naive", make_series({1, 2, 3, 4, 5, 6}), 4);
  req.config["period"] = 3;
  EXPECT_EQ(std::get<Series>(*invoke(req, *reg).output).values(), (std::vector<double>{4, 5, 6, 4}));
  // A period longer than the history falls back to the whole history.
  req = forecast_request("seasonal-naive", make_series({7}), 2);
  EXPECT_EQ(std::get<Series>(*invoke(req, *reg).output).values(), (std::vector<double>{7, 7}));
}

TEST(Invoke, UnknownBackendAndBadRequest) {
  auto reg = mock_registry();
  auto r = invoke(forecast_request("nope", make_series({1}), 1), *reg);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.error->code, "unknown_backend");
  EXPECT_EQ(r.usage.backend_id, "nope");

  auto bad = forecast_request("last-value", make_series({1}), 0);
  EXPECT_EQ(invoke(bad, *reg).error->code, "bad_request");
  bad.config = nlohmann::json::object();
  EXPECT_EQ(invoke(bad, *reg).error->code, "bad_request");
  InvocationRequest mismatch{"last-value", InvocationType::kForecast, ChatPayload{{{"user", "hi"}}}, {{"horizon", 1}}};
  EXPECT_EQ(invoke(mismatch, *reg).error->code, "bad_request");
}

TEST(Invoke, BackendExceptionsBecomeResults) {
  class Throwing final : public Backend {
   public:
    const BackendDescriptor& descriptor() const override { return d_; }
    InvocationResult call(const InvocationRequest&) const override { throw std::runtime_error("boom"); }

   private:
    BackendDescriptor d_{"thrower", BackendKind::kTsFm, default_capabilities(BackendKind::kTsFm), {}, ""};
  };
  class Short final : public Backend {
   public:
    const BackendDescriptor& descriptor() const override { return d_; }
    InvocationResult call(const InvocationRequest&) const override {
      return InvocationResult::success(make_series({1}));
    }

   private:
    BackendDescriptor d_{"short", BackendKind::kTsFm, default_capabilities(BackendKind::kTsFm), {}, ""};
  };
  BackendRegistry reg;
  reg.add(std::make_shared<Throwing>());
  reg.add(std::make_shared<Short>());
  auto r = invoke(forecast_request("thrower", make_series({1}), 2), reg);
  EXPECT_EQ(r.error->code, "backend");
  EXPECT_EQ(r.error->message, "boom");
  EXPECT_EQ(invoke(forecast_request("short", make_series({1}), 2), reg).error->code, "backend");
}

TEST(Invoke, MocksArePure) {
  auto reg = mock_registry(ChatScript::replies({"hello there"}));
  InvocationRequest chat{"scripted-llm", InvocationType::kChat, ChatPayload{{{"user", "q one two"}}}, nlohmann::json::object()};
  auto a = invoke(chat, *reg), b = invoke(chat, *reg);
  a.usage.wall_clock_ms = b.usage.wall_clock_ms = 0;
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.usage.input_tokens, 3);
  EXPECT_EQ(a.usage.output_tokens, 2);
}

TEST(Lookup, ExactMatchElseMode) {
  auto reg = mock_registry();
  auto table = parse_table_csv("f,y\n1,a\n2,b\n3,a\n2,__MASK__\n9,__MASK__", "y");
  InvocationRequest req{"lookup-tab", InvocationType::kTabular, TabularPayload{table},
                        {{"target_column", "y"}, {"problem", "classification"}}};
  auto r = invoke(req, *reg);
  ASSERT_TRUE(r.ok()) << r.error->message;
  EXPECT_EQ(std::get<std::vector<std::string>>(*r.output), (std::vector<std::string>{"b", "a"}));
}

TEST(Lookup, RegressionMean) {
  auto reg = mock_registry();
  auto table = parse_table_csv("f,y\n1,2\n2,4\n5,__MASK__", "y");
  InvocationRequest req{"lookup-tab", InvocationType::kTabular, TabularPayload{table},
                        {{"target_column", "y"}, {"problem", "regression"}}};
  EXPECT_EQ(std::get<std::vector<std::string>>(*invoke(req, *reg).output), (std::vector<std::string>{"3"}));
  auto empty = parse_table_csv("f,y\n1,__MASK__", "y");
  req.payload = TabularPayload{empty};
  EXPECT_EQ(invoke(req, *reg).error->code, "backend");
}

TEST(Script, RulesAndPlaceholders) {
  auto script = ChatScript::from_json(nlohmann::json::parse(R"({
    "rules": [{"when": "weather", "replies": ["sunny", "still sunny"]}],
    "default": ["tool said: {{tool}}", "echo: {{echo}}"]})"));
  ScriptedChatBackend chat("c", script);
  EXPECT_EQ(chat.reply_for({{"user", "the weather?"}}), "sunny");
  EXPECT_EQ(chat.reply_for({{"user", "the weather?"}, {"assistant", "sunny"}, {"user", "again"}}), "still sunny");
  EXPECT_EQ(chat.reply_for({{"user", "x"}, {"assistant", "a"}, {"assistant", "b"}, {"user", "y"}}), "echo: y");
  EXPECT_EQ(chat.reply_for({{"user", "x"}, {"tool", "5"}}), "tool said: 5");
  EXPECT_EQ(ChatScript::from_json(script.to_json()).to_json(), script.to_json());
}

TEST(CompileQuery, ForecastTabularAndNl) {
  auto reg = mock_registry();
  auto task = forecast_task(50, 10);
  auto req = compile_query(task, parse_payload(task), reg->find("last-value")->descriptor());
  EXPECT_EQ(req.task_type, InvocationType::kForecast);
  EXPECT_EQ(req.config["horizon"], 10);
  EXPECT_EQ(std::get<ForecastPayload>(req.payload).series.size(), 50u);

  TaskInstance tab{"drug", "tabular_classification", "", 2, "f,y\n1,a\n2,__MASK__\n3,__MASK__", "[a, a]"};
  auto treq = compile_query(tab, parse_payload(tab), reg->find("lookup-tab")->descriptor());
  EXPECT_EQ(treq.config["target_column"], "y");
  EXPECT_EQ(std::get<TabularPayload>(treq.payload).table.masked_rows.size(), 2u);

  TaskInstance qa{"biology", "natural_language_qa", "", 0, "How many?", "46"};
  EXPECT_EQ(code_of([&] { compile_query(qa, parse_payload(qa), reg->find("last-value")->descriptor()); }),
            "no_compatible_payload");
  try {
    compile_query(qa, parse_payload(qa), reg->find("last-value")->descriptor());
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no compatible payload"), std::string::npos);
  }
  // Forecast task aimed at a tabular FM is equally incompatible.
  EXPECT_EQ(code_of([&] { compile_query(task, parse_payload(task), reg->find("lookup-tab")->descriptor()); }),
            "no_compatible_payload");
}

TEST(Adapt, FormatsAndFailure) {
  auto r = InvocationResult::success(make_series({5, 5, 5}, 50));
  EXPECT_EQ(adapt_response(r).text_block, "timestamp,value\n50,5\n51,5\n52,5");
  EXPECT_EQ(adapt_response(InvocationResult::success(std::vector<std::string>{"A", "B"})).text_block, "A\nB");
  try {
    adapt_response(InvocationResult::failure("backend", "x"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()), "cannot adapt failed invocation");
  }
}

TEST(Adapt, TruncatesWithinBudget) {
  std::string big(10000, 'x');
  auto ctx = adapt_response(InvocationResult::success(big), 4096);
  EXPECT_LE(ctx.text_block.size(), 4096u);
  auto pos = ctx.text_block.find("…[truncated ");
  ASSERT_NE(pos, std::string::npos);
  auto k = std::stoul(ctx.text_block.substr(pos + std::string("…[truncated ").size()));
  EXPECT_EQ(pos + k, big.size());
  // Multi-byte text is never cut mid-character.
  std::string accents;
  for (int i = 0; i < 3000; ++i) accents += "é";
  auto cut = adapt_response(InvocationResult::success(accents), 101).text_block;
  EXPECT_LE(cut.size(), 101u);
  auto head = cut.substr(0, cut.find("…"));
  EXPECT_EQ(head.size() % 2, 0u);
  EXPECT_EQ(adapt_response(InvocationResult::success(std::string("short")), 4096).text_block, "short");
}

TEST(Adapt, ProvenanceCarriesDigest) {
  auto reg = mock_registry();
  auto req = forecast_request("last-value", make_series({1, 2}), 1);
  auto ctx = adapt_response(invoke(req, *reg), kDefaultAdapterBudget, request_digest(req));
  EXPECT_EQ(ctx.provenance, "last-value@" + request_digest(req));
  EXPECT_EQ(request_digest(req).size(), 16u);
}

TEST(Roundtrip, PsiFPhiRecoversTheForecast) {
  auto reg = mock_registry();
  for (std::size_t n : {1u, 2u, 50u, 1000u}) {
    auto task = forecast_task(n, 7);
    auto req = compile_query(task, parse_payload(task), reg->find("last-value")->descriptor());
    auto result = invoke(req, *reg);
    ASSERT_TRUE(result.ok());
    auto ctx = adapt_response(result);
    EXPECT_EQ(parse_series_csv(ctx.text_block), std::get<Series>(*result.output));
  }
}

TEST(Wire, RequestAndResultRoundTrip) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> v(-1e9, 1e9);
  for (int i = 0; i < 100; ++i) {
    Series s;
    for (int k = 0; k < 1 + i % 9; ++k) s.points.push_back({"t" + std::to_string(k), v(rng)});
    auto req = forecast_request("last-value", s, 1 + i % 4);
    EXPECT_EQ(wire::decode_request(nlohmann::json::parse(wire::encode(req).dump())), req);
    auto res = InvocationResult::success(s, {3, 4, 0, ""});
    EXPECT_EQ(wire::decode_result(nlohmann::json::parse(wire::encode(res).dump())), res);
  }
  auto table = parse_table_csv("a,b\n\"x, y\",1\n2,__MASK__", "b");
  InvocationRequest treq{"lookup-tab", InvocationType::kTabular, TabularPayload{table},
                         {{"target_column", "b"}, {"problem", "regression"}}};
  EXPECT_EQ(wire::decode_request(wire::encode(treq)), treq);
  InvocationRequest creq{"c", InvocationType::kChat, ChatPayload{{{"system", "s"}, {"user", "u"}}}, nlohmann::json::object()};
  EXPECT_EQ(wire::decode_request(wire::encode(creq)), creq);
  auto err = InvocationResult::failure("transport", "down");
  EXPECT_EQ(wire::decode_result(wire::encode(err)), err);
  auto text = InvocationResult::success(std::string("hi"), {1, 1, 0, ""});
  EXPECT_EQ(wire::decode_result(wire::encode(text)), text);
}

TEST(Wire, FieldNamesAreExact) {
  auto j = wire::encode(forecast_request("last-value", make_series({1}), 1));
  for (auto key : {"backend_id", "task_type", "payload", "config"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j.size(), 4u);
  EXPECT_EQ(j["task_type"], "forecast");
  auto r = wire::encode(InvocationResult::failure("backend", "m"));
  EXPECT_EQ(r["status"], "error");
  EXPECT_TRUE(r["output"].is_null());
  EXPECT_EQ(r["error"]["code"], "backend");
  EXPECT_TRUE(r["usage"].contains("input_tokens"));
  EXPECT_TRUE(r["usage"].contains("output_tokens"));
}

TEST(Wire, DecodeRejectsMalformed) {
  EXPECT_EQ(code_of([] { wire::decode_request(nlohmann::json::array()); }), "bad_request");
  EXPECT_EQ(code_of([] { wire::decode_request({{"backend_id", "x"}}); }), "bad_request");
  EXPECT_EQ(code_of([] {
              wire::decode_request({{"backend_id", "x"}, {"task_type", "dance"}, {"payload", {}}, {"config", {}}});
            }),
            "bad_request");
}

TEST(Wire, DescriptorRoundTrip) {
  auto reg = mock_registry();
  for (const auto& d : reg->descriptors()) EXPECT_EQ(wire::decode_descriptor(wire::encode(d)), d);
  BackendDescriptor remote{"r", BackendKind::kTabFm, default_capabilities(BackendKind::kTabFm), "http://h:1", "x"};
  EXPECT_EQ(wire::decode_descriptor(wire::encode(remote)), remote);
}

TEST(Timestamps, Continuation) {
  EXPECT_EQ(next_timestamps(make_series({1, 2}, 10), 2), (std::vector<std::string>{"12", "13"}));
  Series stepped;
  stepped.points = {{"0", 1}, {"5", 1}};
  EXPECT_EQ(next_timestamps(stepped, 2), (std::vector<std::string>{"10", "15"}));
  Series dated;
  dated.points = {{"2024-01-01", 1}};
  EXPECT_EQ(next_timestamps(dated, 1), (std::vector<std::string>{"2024-01-01+1"}));
}
