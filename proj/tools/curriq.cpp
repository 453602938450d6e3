// curriq command-line entry point.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "curriq/cli.hpp"

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool strict = false;
};

curriq::RunConfig load(const Globals& g) {
  auto cfg = g.config.empty() ? curriq::parse_run_config(nlohmann::json::object())
                              : curriq::load_run_config(g.config);
  if (g.seed) cfg.set_seed(*g.seed);
  if (!g.out.empty()) cfg.out = g.out;
  if (g.strict) {
    cfg.strict = true;
    cfg.retrieval.strict = true;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curriculum GRPO, truthfulness evaluation and retrieval toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON run config");
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_flag("--strict", g.strict, "Fail instead of falling back when a service fails");

  auto* ingest = app.add_subcommand("ingest", "Search fixtures, extract, segment and index");
  auto* retrieve = app.add_subcommand("retrieve", "Rank indexed chunks for a query");
  std::string query;
  retrieve->add_option("query", query, "Query text")->required();
  auto* label = app.add_subcommand("label", "Split samples into easy/hard pools");
  auto* train = app.add_subcommand("train", "Run the curriculum schedule");
  auto* eval = app.add_subcommand("eval", "Judge and score a responses file");
  std::string responses;
  eval->add_option("responses", responses, "Responses JSONL")->required();
  auto* report = app.add_subcommand("report", "Consolidate a training run into CSV/JSON");
  std::string run_dir;
  report->add_option("run_dir", run_dir, "Directory written by train")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  namespace cli = curriq::cli;
  try {
    const auto cfg = load(g);
    if (*ingest) cli::cmd_ingest(cfg);
    else if (*retrieve) cli::cmd_retrieve(cfg, query);
    else if (*label) cli::cmd_label(cfg);
    else if (*train) cli::cmd_train(cfg);
    else if (*eval) cli::cmd_eval(cfg, responses);
    else if (*report) cli::cmd_report(cfg, run_dir);
    return 0;
  } catch (const curriq::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return curriq::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
