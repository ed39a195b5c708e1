// Command-line front end: run, score, report, serve-mock, convert.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eywa/bench.hpp"
#include "eywa/error.hpp"
#include "eywa/harness.hpp"
#include "eywa/http.hpp"
#include "eywa/mocks.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw eywa::Error("io", "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int exit_code_for(const eywa::Error& e) { return e.code() == "io" ? kExitIo : kExitConfig; }

eywa::ProtocolServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous agent runtime and benchmark harness"};
  app.require_subcommand(1);

  eywa::RunConfig run_cfg;
  std::size_t eywa_agents = 0;
  auto* run = app.add_subcommand("run", "Run a system over a benchmark and write a report");
  run->add_option("--bench", run_cfg.bench_path, "Benchmark JSON-Lines file")->required();
  run->add_option("--system", run_cfg.system, "llm | eywa-agent | mas:<topology> | orchestra")->required();
  run->add_option("--registry", run_cfg.registry_path, "Backend registry JSON")->required();
  run->add_option("--workers", run_cfg.workers, "Parallel episodes")->check(CLI::PositiveNumber);
  run->add_option("--out", run_cfg.out_path, "Report output path")->required();
  run->add_option("--repeats", run_cfg.repeats, "Runs per instance")->check(CLI::PositiveNumber);
  run->add_option("--seed", run_cfg.seed, "Scheduling seed");
  auto* eywa_opt = run->add_option("--eywa-agents", eywa_agents, "Eywa nodes in mas:<topology> systems");

  std::string pred_path, score_bench;
  auto* score = app.add_subcommand("score", "Score a predictions file against a benchmark");
  score->add_option("--pred", pred_path, "Predictions JSON-Lines {index, prediction}")->required();
  score->add_option("--bench", score_bench, "Benchmark JSON-Lines file")->required();

  std::vector<std::string> report_inputs;
  bool report_as_csv = false;
  auto* report = app.add_subcommand("report", "Render run reports as a table");
  report->add_option("--in", report_inputs, "Report JSON file(s)")->required();
  report->add_flag("--csv", report_as_csv, "Emit CSV instead of the text table");

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string serve_registry;
  auto* serve = app.add_subcommand("serve-mock", "Serve the bundled mocks over the invocation protocol");
  serve->add_option("--port", port, "Port to bind")->check(CLI::Range(1, 65535));
  serve->add_option("--host", host, "Interface to bind");
  serve->add_option("--registry", serve_registry, "Serve the mocks of this registry instead of the defaults");

  std::string csv_in, jsonl_out;
  auto* convert = app.add_subcommand("convert", "Convert a CSV benchmark to JSON-Lines");
  convert->add_option("--csv", csv_in, "Input CSV with the six-field header")->required();
  convert->add_option("--out", jsonl_out, "Output JSON-Lines path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      if (*eywa_opt) run_cfg.eywa_agents = eywa_agents;
      auto rep = eywa::run(run_cfg);
      std::cout << eywa::report_table({rep});
      std::cout << "wrote " << run_cfg.out_path.string() << "\n";
    } else if (*score) {
      auto bench = eywa::load_benchmark(score_bench);
      std::cout << eywa::score_predictions(bench, slurp(pred_path)).dump(2) << "\n";
    } else if (*report) {
      std::vector<eywa::RunReport> reports;
      for (const auto& path : report_inputs) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(slurp(path));
        } catch (const nlohmann::json::parse_error& e) {
          throw eywa::Error("config", "'" + path + "' is not JSON: " + e.what());
        }
        reports.push_back(eywa::RunReport::from_json(j));
      }
      std::cout << (report_as_csv ? eywa::report_csv(reports) : eywa::report_table(reports));
    } else if (*serve) {
      auto registry = std::make_shared<eywa::BackendRegistry>();
      if (serve_registry.empty()) {
        for (auto& b : eywa::default_mocks()) registry->add(b);
      } else {
        registry = eywa::load_registry(serve_registry).registry;
      }
      eywa::ProtocolServer server(registry);
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      std::cerr << "serving " << registry->ids().size() << " backends on http://" << host << ":" << port << "\n";
      server.serve_forever(host, port);
      g_server = nullptr;
    } else if (*convert) {
      auto set = eywa::convert_csv(slurp(csv_in), csv_in);
      eywa::save_benchmark(set, jsonl_out);
      std::cout << "converted " << set.instances.size() << " instances\n";
    }
  } catch (const eywa::Error& e) {
    std::cerr << "error (" << e.code() << "): " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
