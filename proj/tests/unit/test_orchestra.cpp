#include <gtest/gtest.h>

#include "eywa/error.hpp"
#include "eywa/mocks.hpp"
#include "eywa/orchestra.hpp"
#include "support/scenarios.hpp"
#include "support/validation_matrix.hpp"

using namespace eywa;
using nlohmann::json;

namespace {

std::string rule_of(std::string_view reply, const ConfigSpace& space) {
  try {
    parse_and_validate_config(reply, space);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "invalid_config");
    return e.what();
  }
  return "";
}

const std::string kCaseStudy =
    R"({"eywa":true,"setting":"single-agent","model":"gpt-mock","multi_agent_type":null,"foundation_model":"tabpfn-mock","agents":[]})";

json debate_config(std::size_t n, std::optional<std::string> fm = std::nullopt) {
  json agents = json::array();
  for (std::size_t i = 0; i < n; ++i)
    agents.push_back({{"agent_id", "debater" + std::to_string(i)},
                      {"role_prompt", "Argue carefully."},
                      {"model", "scripted-llm"},
                      {"eywa", false},
                      {"foundation_model", nullptr}});
  return {{"eywa", false}, {"setting", "multi-agent"}, {"model", nullptr}, {"multi_agent_type", "debate"},
          {"foundation_model", fm ? json(*fm) : json(nullptr)}, {"agents", agents}};
}

ConfigSpace mock_space() {
  ConfigSpace s;
  s.llm_pool = {"scripted-llm"};
  s.fm_pool = {"last-value", "seasonal-naive", "lookup-tab"};
  return s;
}

std::shared_ptr<BackendRegistry> registry_with_planner(std::vector<std::string> planner_replies,
                                                       ChatScript worker = ChatScript::replies({"{{tool}}"})) {
  auto reg = std::make_shared<BackendRegistry>();
  for (auto& b : default_mocks(std::move(worker))) reg->add(b);
  reg->add(std::make_shared<ScriptedChatBackend>("planner", ChatScript::replies(std::move(planner_replies))));
  return reg;
}

const TaskInstance kTab{"drug", "tabular_classification", "Predict the response.", 1,
                        "dose,response\n1,yes\n2,no\n1,__MASK__", "[yes]"};
const TaskInstance kQa{"physics", "natural_language_qa", "Element symbols.", 5, "Symbol for iron?", "Fe"};

}  // namespace

TEST(PlannerPrompt, ListsThePools) {
  ConfigSpace space{{"gpt-mock"}, {"tabpfn-mock"}, {"single", "debate"}};
  auto p = render_planner_prompt(kTab, space);
  EXPECT_NE(p.find("- gpt-mock"), std::string::npos);
  EXPECT_NE(p.find("- tabpfn-mock"), std::string::npos);
  EXPECT_NE(p.find("- single:"), std::string::npos);
  EXPECT_NE(p.find("- debate:"), std::string::npos);
  EXPECT_EQ(p.find("- star:"), std::string::npos);
  EXPECT_EQ(p.find("- refine:"), std::string::npos);
  auto qa = render_planner_prompt(kQa, space);
  EXPECT_NE(qa.find("- Domain: physics\n"), std::string::npos);
  EXPECT_NE(qa.find("- Task Type: natural_language_qa\n"), std::string::npos);
  space.topology_pool.clear();
  try {
    render_planner_prompt(kTab, space);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty_pool");
  }
}

TEST(PlannerPrompt, UsesRegistryDescriptions) {
  auto reg = registry_with_planner({"x"});
  auto p = render_planner_prompt(kTab, mock_space(), reg.get());
  EXPECT_NE(p.find("- last-value: persistence forecaster"), std::string::npos);
}

TEST(Validate, CaseStudyConfig) {
  ConfigSpace space{{"gpt-mock"}, {"tabpfn-mock"}, {"single", "debate"}};
  auto c = parse_and_validate_config(kCaseStudy, space);
  EXPECT_TRUE(c.eywa);
  EXPECT_EQ(c.setting, "single-agent");
  EXPECT_EQ(c.model, "gpt-mock");
  EXPECT_EQ(c.foundation_model, "tabpfn-mock");
  EXPECT_EQ(json::parse(c.to_json().dump()), json::parse(kCaseStudy));
}

TEST(Validate, NamedRules) {
  ConfigSpace space{{"gpt-mock"}, {"tabpfn-mock"}, {"single", "debate"}};
  auto j = json::parse(kCaseStudy);
  j["agents"] = json::array({{{"agent_id", "a"}, {"role_prompt", ""}, {"model", "gpt-mock"}, {"eywa", false},
                               {"foundation_model", nullptr}}});
  EXPECT_EQ(rule_of(j.dump(), space), "agents must be an empty list");
  j = json::parse(kCaseStudy);
  j["setting"] = "multi-agent";
  EXPECT_EQ(rule_of(j.dump(), space), "model must be null");
  j = json::parse(kCaseStudy);
  j["multi_agent_type"] = "debate";
  EXPECT_EQ(rule_of(j.dump(), space), "multi_agent_type must be null");
  j = json::parse(kCaseStudy);
  j["model"] = "gpt-9";
  EXPECT_EQ(rule_of(j.dump(), space), "model must be a valid model string");
  EXPECT_EQ(rule_of("Sure! " + kCaseStudy, space), "output must be valid JSON only");
  j = json::parse(kCaseStudy);
  j.erase("agents");
  EXPECT_NE(rule_of(j.dump(), space).find("missing field"), std::string::npos);
  j = json::parse(kCaseStudy);
  j["extra"] = 1;
  EXPECT_FALSE(rule_of(j.dump(), space).empty());
}

TEST(Validate, OneFenceIsTolerated) {
  ConfigSpace space{{"gpt-mock"}, {"tabpfn-mock"}, {"single", "debate"}};
  bool fenced = false;
  EXPECT_NO_THROW(parse_and_validate_config("```json\n" + kCaseStudy + "\n```", space, &fenced));
  EXPECT_TRUE(fenced);
  EXPECT_FALSE(rule_of("```json\n" + kCaseStudy + "\n``` trailing", space).empty());
}

TEST(Validate, AgentSpecsAndSizes) {
  auto space = mock_space();
  EXPECT_NO_THROW(parse_and_validate_config(debate_config(3).dump(), space));
  auto dup = debate_config(2);
  dup["agents"][1]["agent_id"] = "debater0";
  EXPECT_EQ(rule_of(dup.dump(), space), "agent ids must be unique");
  auto bad_model = debate_config(2);
  bad_model["agents"][0]["model"] = "gpt-9";
  EXPECT_EQ(rule_of(bad_model.dump(), space), "agents[0].model must be a valid model string");
  auto refine = debate_config(3);
  refine["multi_agent_type"] = "refine";
  EXPECT_NE(rule_of(refine.dump(), space).find("fit the size"), std::string::npos);
}

TEST(Validate, ExhaustiveMatrix) {
  auto tally = matrix::run();
  EXPECT_EQ(tally.cases, 216u);
  EXPECT_GT(tally.legal, 0u);
  EXPECT_EQ(tally.false_accepts, 0u);
  EXPECT_EQ(tally.false_rejects, 0u);
  for (const auto& m : tally.mismatches) ADD_FAILURE() << m;
}

TEST(Instantiate, Shapes) {
  auto reg = registry_with_planner({"x"});
  OrchestraConfig single;
  single.model = "scripted-llm";
  single.eywa = true;
  single.foundation_model = "lookup-tab";
  auto sys = instantiate(single, *reg);
  ASSERT_EQ(sys.agents.size(), 1u);
  EXPECT_TRUE(sys.agents[0].eywa);
  EXPECT_EQ(sys.agents[0].fm_backend, "lookup-tab");

  auto debate = parse_and_validate_config(debate_config(3, "last-value").dump(), mock_space());
  debate.agents[1].eywa = true;
  auto dsys = instantiate(debate, *reg);
  EXPECT_EQ(dsys.topology.name, "debate");
  EXPECT_EQ(dsys.topology.n_agents, 3u);
  EXPECT_EQ(dsys.agents[1].fm_backend, "last-value");  // inherited from the configuration
  EXPECT_FALSE(dsys.agents[0].eywa);

  single.eywa = false;
  single.foundation_model.reset();
  auto plain = instantiate(single, *reg);
  EXPECT_FALSE(plain.agents[0].eywa);

  single.eywa = true;
  auto orphan = instantiate(single, *reg);
  EXPECT_FALSE(orphan.agents[0].eywa);
  ASSERT_EQ(orphan.notes.size(), 1u);
  EXPECT_EQ(orphan.notes[0].kind, "eywa_without_fm");
}

TEST(RunOrchestra, CaseStudyRunsASingleEywaAgent) {
  auto reply = R"({"eywa":true,"setting":"single-agent","model":"scripted-llm","multi_agent_type":null,"foundation_model":"lookup-tab","agents":[]})";
  auto reg = registry_with_planner({reply});
  auto out = run_orchestra(kTab, mock_space(), "planner", *reg);
  EXPECT_FALSE(out.fallback);
  ASSERT_EQ(out.outcome.status, EpisodeStatus::kOk) << out.outcome.failure_cause;
  EXPECT_EQ(out.outcome.final_answer, "yes");
  const auto& calls = out.outcome.trace.calls;
  ASSERT_EQ(calls.size(), 3u);
  EXPECT_EQ(calls[0].backend_id, "planner");
  EXPECT_EQ(calls[1].backend_id, "lookup-tab");  // always-invoke calls the model before the first chat turn
  EXPECT_EQ(calls[2].backend_id, "scripted-llm");
}

TEST(RunOrchestra, GarbageThreeTimesFallsBack) {
  auto reg = registry_with_planner({"not json", "still not", "nope"}, ChatScript::replies({"Fe"}));
  auto out = run_orchestra(kQa, mock_space(), "planner", *reg);
  EXPECT_TRUE(out.fallback);
  EXPECT_EQ(out.config.setting, "single-agent");
  EXPECT_EQ(out.config.model, "scripted-llm");
  EXPECT_FALSE(out.config.eywa);
  std::size_t invalid = 0, fallback = 0, planner_calls = 0;
  for (const auto& e : out.outcome.trace.events) {
    invalid += e.kind == "planner_invalid";
    fallback += e.kind == "planner_fallback";
  }
  for (const auto& c : out.outcome.trace.calls) planner_calls += c.backend_id == "planner";
  EXPECT_EQ(invalid, 3u);
  EXPECT_EQ(fallback, 1u);
  EXPECT_EQ(planner_calls, 3u);
  EXPECT_EQ(out.outcome.final_answer, "Fe");
}

TEST(RunOrchestra, SecondAttemptIsAccepted) {
  auto reply = R"({"eywa":false,"setting":"single-agent","model":"scripted-llm","multi_agent_type":null,"foundation_model":null,"agents":[]})";
  auto reg = registry_with_planner({"oops", reply}, ChatScript::replies({"Fe"}));
  auto out = run_orchestra(kQa, mock_space(), "planner", *reg);
  EXPECT_FALSE(out.fallback);
  EXPECT_EQ(out.raw_planner_reply, reply);
}

TEST(RunOrchestra, DebateOnQuestionAnswering) {
  auto reg = registry_with_planner({debate_config(3).dump()}, ChatScript::replies({"Fe"}));
  auto out = run_orchestra(kQa, mock_space(), "planner", *reg);
  EXPECT_FALSE(out.fallback);
  EXPECT_EQ(out.config.multi_agent_type, "debate");
  EXPECT_EQ(out.outcome.status, EpisodeStatus::kOk);
  EXPECT_EQ(out.outcome.trace.envelopes.size(), 12u);
  EXPECT_EQ(out.outcome.trace.calls.size(), 1u + 6u + 1u);
}

TEST(RunOrchestra, Deterministic) {
  auto reg = registry_with_planner({debate_config(3, "last-value").dump()});
  auto task = scenarios::forecast_task(20, 3);
  auto a = run_orchestra(task, mock_space(), "planner", *reg);
  auto b = run_orchestra(task, mock_space(), "planner", *reg);
  EXPECT_EQ(a.outcome.trace.to_json(false).dump(), b.outcome.trace.to_json(false).dump());
}

TEST(Enumerate, FiniteAndDeterministic) {
  auto space = mock_space();
  auto a = space.enumerate(), b = space.enumerate();
  EXPECT_EQ(a, b);
  // 1 model x (1 + 3 FMs) single configs, then 4 topologies x (1 + 3) homogeneous MAS configs.
  EXPECT_EQ(a.size(), 4u + 16u);
  for (const auto& c : a) EXPECT_NO_THROW(parse_and_validate_config(c.to_json().dump(), space)) << c.to_json().dump();
}

TEST(Oracle, DominatesOnTheHeterogeneousSet) {
  auto reg = scenarios::dominance_registry();
  auto report = oracle_conductor(scenarios::dominance_tasks(true), scenarios::dominance_configs(), *reg);
  ASSERT_EQ(report.fixed_mean_losses.size(), 2u);
  for (double fixed : report.fixed_mean_losses) EXPECT_LT(report.oracle_mean_loss, fixed);
  EXPECT_NEAR(report.oracle_mean_loss, 0.0, 1e-12);
  // Level-shift tasks pick persistence, alternating ones the seasonal model.
  EXPECT_EQ(report.best_config, (std::vector<std::size_t>{0, 1, 0, 1, 0, 1, 0, 1}));
}

TEST(Oracle, EqualsBestFixedWhenOneConfigAlwaysWins) {
  auto reg = scenarios::dominance_registry();
  auto report = oracle_conductor(scenarios::dominance_tasks(false), scenarios::dominance_configs(), *reg);
  double best = *std::min_element(report.fixed_mean_losses.begin(), report.fixed_mean_losses.end());
  EXPECT_DOUBLE_EQ(report.oracle_mean_loss, best);
  auto single = oracle_conductor(scenarios::dominance_tasks(true), {scenarios::dominance_configs()[0]}, *reg);
  EXPECT_DOUBLE_EQ(single.oracle_mean_loss, single.fixed_mean_losses[0]);
}

TEST(Oracle, NeverWorseThanAnyFixedConfig) {
  auto reg = scenarios::dominance_registry();
  ConfigSpace space;
  space.llm_pool = {"scripted-llm"};
  space.fm_pool = {"last-value", "seasonal-naive"};
  space.topology_pool = {"single", "star"};
  auto report = oracle_conductor(scenarios::dominance_tasks(true), space, *reg);
  for (double fixed : report.fixed_mean_losses) EXPECT_LE(report.oracle_mean_loss, fixed + 1e-15);
}

TEST(Oracle, RejectsNondeterministicBackends) {
  class Flaky final : public Backend {
   public:
    const BackendDescriptor& descriptor() const override { return d_; }
    InvocationResult call(const InvocationRequest&) const override {
      return InvocationResult::success(std::string(++n_ % 2 ? "Fe" : "Cu"));
    }

   private:
    BackendDescriptor d_{"flaky", BackendKind::kChatLlm, default_capabilities(BackendKind::kChatLlm), {}, ""};
    mutable int n_ = 0;
  };
  BackendRegistry reg;
  reg.add(std::make_shared<Flaky>());
  OrchestraConfig c;
  c.model = "flaky";
  try {
    oracle_conductor({kQa}, {c}, reg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "nondeterministic");
  }
}
