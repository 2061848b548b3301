// threathive command line: setup, pipeline runs, API server, case-study replay.
#include <csignal>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "threathive/api.hpp"
#include "threathive/case_study.hpp"
#include "threathive/config.hpp"
#include "threathive/error.hpp"
#include "threathive/runtime.hpp"
#include "threathive/serialization.hpp"

namespace fs = std::filesystem;
using namespace threathive;

namespace {

ApiService* g_api = nullptr;

void on_signal(int) {
  if (g_api) g_api->stop();
}

std::string ask(const std::string& question, const std::string& fallback) {
  std::cout << question << " [" << fallback << "]: " << std::flush;
  std::string line;
  if (!std::getline(std::cin, line) || line.empty()) return fallback;
  return line;
}

int run_kind(const fs::path& config_path, RunKind kind) {
  Runtime rt(load_config(config_path));
  auto record = rt.pipeline().run(kind);
  rt.save_transcript();
  std::cout << nlohmann::json(record).dump(2) << '\n';
  return record.status == RunStatus::Failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MCP threat intelligence platform"};
  app.require_subcommand(1);
  std::string config_path = "threathive.json";
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  auto* init = app.add_subcommand("init", "write a configuration file");
  std::string data_dir = "var";
  std::string taxonomy;
  bool interactive = false;
  bool force = false;
  init->add_option("-c,--config", config_path, "file to write")->capture_default_str();
  init->add_option("--data-dir", data_dir, "database and graph log directory")->capture_default_str();
  init->add_option("--taxonomy", taxonomy, "taxonomy data file");
  init->add_flag("-i,--interactive", interactive, "prompt for each setting");
  init->add_flag("-f,--force", force, "overwrite an existing file");

  auto* gather = app.add_subcommand("gather", "collect intelligence from the configured sources");
  auto* analyze = app.add_subcommand("analyze", "score, classify and graph unanalyzed items");
  auto* plan = app.add_subcommand("plan", "build a risk plan over the stored threat cards");
  auto* full = app.add_subcommand("run", "gather then analyze (and plan when enabled)");
  for (auto* sub : {gather, analyze, plan, full}) {
    sub->add_option("-c,--config", config_path, "configuration file")->capture_default_str();
  }

  auto* serve = app.add_subcommand("serve", "start the REST API");
  std::string host;
  int port = 0;
  serve->add_option("-c,--config", config_path, "configuration file")->capture_default_str();
  serve->add_option("--host", host, "bind address (default from config)");
  serve->add_option("--port", port, "port (default from config)");

  auto* replay = app.add_subcommand("replay-case-study", "replay the GitHub MCP case study from fixtures");
  std::string fixtures = THREATHIVE_DEFAULT_FIXTURES;
  std::string rerecord;
  replay->add_option("--fixtures", fixtures, "case study fixture directory")->capture_default_str();
  replay->add_option("--rerecord-from", rerecord, "scripted replies used to rewrite the transcript");

  auto* export_graph = app.add_subcommand("export-graph", "write nodes.csv and edges.csv");
  std::string out_dir = "graph-export";
  export_graph->add_option("-c,--config", config_path, "configuration file")->capture_default_str();
  export_graph->add_option("-o,--out", out_dir, "output directory")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  // stdout carries JSON results; logs go to stderr
  spdlog::set_default_logger(spdlog::stderr_color_mt("threathive"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*init) {
      if (fs::exists(config_path) && !force) {
        std::cerr << config_path << " exists; use --force to overwrite\n";
        return 1;
      }
      PlatformConfig cfg;
      if (!taxonomy.empty()) cfg.taxonomy_path = taxonomy;
      cfg.data_dir = data_dir;
      if (interactive) {
        cfg.taxonomy_path = ask("taxonomy file", cfg.taxonomy_path.string());
        cfg.data_dir = ask("data directory", cfg.data_dir.string());
        cfg.models.default_model = ask("model id", cfg.models.default_model);
        cfg.provider.endpoint = ask("chat completions endpoint", cfg.provider.endpoint);
        cfg.provider.api_key_env = ask("environment variable holding the API key", cfg.provider.api_key_env);
        cfg.server.port = std::stoi(ask("API port", std::to_string(cfg.server.port)));
      }
      validate(cfg);
      save_config(cfg, config_path);
      std::cout << "wrote " << config_path << '\n';
      return 0;
    }
    if (*gather) return run_kind(config_path, RunKind::Gather);
    if (*analyze) return run_kind(config_path, RunKind::Analyze);
    if (*plan) return run_kind(config_path, RunKind::Plan);
    if (*full) return run_kind(config_path, RunKind::Full);

    if (*serve) {
      Runtime rt(load_config(config_path));
      const auto& sc = rt.config().server;
      ApiService api(rt.pipeline(), rt.storage(), rt.graph(), sc.cors_origin, fs::absolute(config_path));
      g_api = &api;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const bool ok = api.serve(host.empty() ? sc.host : host, port == 0 ? sc.port : port);
      g_api = nullptr;
      rt.pipeline().wait();
      rt.save_transcript();
      if (!ok) {
        std::cerr << "could not bind the API socket\n";
        return 1;
      }
      return 0;
    }

    if (*replay) {
      CaseStudyOptions opts{fixtures, std::nullopt};
      if (!rerecord.empty()) opts.rerecord_from = rerecord;
      auto report = replay_case_study(opts);
      std::cout << to_json(report).dump(2) << '\n';
      const bool ok = report.first_run.status == RunStatus::Succeeded && report.second_run.status == RunStatus::Succeeded;
      return ok ? 0 : 1;
    }

    if (*export_graph) {
      auto cfg = load_config(config_path);
      GraphStore graph(cfg.graph_log_path());
      export_csv(*graph.snapshot(), out_dir);
      std::cout << "exported " << graph.node_count() << " nodes, " << graph.edge_count() << " edges to " << out_dir
                << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what();
    if (!e.subject().empty()) std::cerr << " [" << e.subject() << "]";
    std::cerr << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
