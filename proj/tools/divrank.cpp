// Command-line front end for the source-ranking pipeline.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "divrank/common.hpp"
#include "divrank/pipeline.hpp"

namespace {

using divrank::pipeline::PipelineConfig;
using divrank::pipeline::StageOutcome;
using divrank::pipeline::Workspace;
using Command = StageOutcome (*)(const PipelineConfig&, Workspace&);

struct Options {
  std::string config;
  std::string workspace = "workspace";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
};

int run(const Options& opts, Command command) {
  PipelineConfig config;
  if (!opts.config.empty()) config = divrank::pipeline::load_config(opts.config);
  if (opts.seed) {
    config.seed = *opts.seed;
    if (config.synth) config.synth->seed = *opts.seed;
  }
  if (opts.jobs) config.jobs = *opts.jobs;
  Workspace ws(opts.workspace);
  const auto outcome = command(config, ws);
  std::cout << outcome.stage << (outcome.cache_hit ? ": up to date" : ": done") << '\n';
  for (const auto& note : outcome.notes) std::cout << "  " << note << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rank candidate source domains for a target domain from corpus divergence features"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(divrank::pipeline::kToolVersion));

  Options opts;
  const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
      {"synth", {"Generate a synthetic workspace (corpora, embeddings, performance) and ingest it",
                 divrank::pipeline::cmd_synth}},
      {"ingest", {"Label, split and sample the configured domain corpora", divrank::pipeline::cmd_ingest}},
      {"featurize", {"Build representations and pairwise feature vectors", divrank::pipeline::cmd_featurize}},
      {"correlate", {"Spearman correlation of each feature with transfer performance",
                     divrank::pipeline::cmd_correlate}},
      {"train-rank", {"Leave-one-target-out regression and source rankings", divrank::pipeline::cmd_train_rank}},
      {"evaluate", {"NDCG, budget curves and the report", divrank::pipeline::cmd_evaluate}},
      {"budget", {"Training and end-to-end savings summary", divrank::pipeline::cmd_budget}},
  };
  Command selected = nullptr;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", opts.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--workspace", opts.workspace, "Workspace directory")->capture_default_str();
    sub->add_option("--seed", opts.seed, "Master seed (overrides the config)");
    sub->add_option("--jobs", opts.jobs, "Worker threads")->check(CLI::PositiveNumber);
    const Command command = entry.second;
    sub->callback([&selected, command] { selected = command; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return run(opts, selected);
  } catch (const divrank::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
