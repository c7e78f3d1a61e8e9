#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <iostream>

#include "fcgaga/checkpoint.hpp"
#include "fcgaga/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<bool> deterministic;
  std::vector<std::string> variants;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "Run configuration (JSON)")->required();
  cmd->add_option("--out", flags.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seed", flags.seed, "Seed (overrides seed)");
  cmd->add_option("--deterministic", flags.deterministic, "Seed-only randomness (true/false)");
}

fcgaga::RunConfig resolve(const Flags& flags) {
  auto config = fcgaga::load_run_config(flags.config);
  if (!flags.out.empty()) config.output_dir = flags.out;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.deterministic) config.deterministic = *flags.deterministic;
  return config;
}

int run(int argc, char** argv) {
  CLI::App app{"FC-GAGA traffic forecasting: synthesize, train, evaluate, ablate, export"};
  app.require_subcommand(1);
  Flags flags;
  app.add_flag("-v,--verbose", flags.verbose, "Debug logging");

  auto* synth = app.add_subcommand("synth", "Write a synthetic panel with a planted coupling graph");
  auto* train = app.add_subcommand("train", "Train and keep the best-validation checkpoint");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate a list of gate/layer variants");
  auto* exp = app.add_subcommand("export", "Export gate weights, neighbor rankings and forecast decomposition");
  for (auto* cmd : {synth, train, eval, ablate, exp}) add_common(cmd, flags);
  for (auto* cmd : {eval, exp}) cmd->add_option("--checkpoint", flags.checkpoint, "Checkpoint file")->required();
  ablate->add_option("--variants", flags.variants, "Variants as gate[:layers], comma separated")
      ->delimiter(',')
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? fcgaga::kExitOk : fcgaga::kExitConfig;
  }
  spdlog::set_level(flags.verbose ? spdlog::level::debug : spdlog::level::info);

  const auto config = resolve(flags);
  if (synth->parsed()) {
    fcgaga::cmd_synth(config);
  } else if (train->parsed()) {
    fcgaga::cmd_train(config);
  } else if (eval->parsed()) {
    const auto report = fcgaga::cmd_eval(config, flags.checkpoint);
    for (const auto& h : report.horizons) {
      std::cout << fcgaga::horizon_label(h.horizon) << ": MAE " << (h.mae ? std::to_string(*h.mae) : "NA") << '\n';
    }
  } else if (ablate->parsed()) {
    std::vector<fcgaga::AblationVariant> variants;
    for (const auto& v : flags.variants) variants.push_back(fcgaga::AblationVariant::parse(v));
    fcgaga::cmd_ablate(config, variants);
  } else if (exp->parsed()) {
    fcgaga::cmd_export(config, flags.checkpoint);
  }
  return fcgaga::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fcgaga::CliError& e) {
    std::cerr << "fcgaga: " << e.what() << '\n';
    return e.code();
  } catch (const fcgaga::ConfigError& e) {
    std::cerr << "fcgaga: config error: " << e.what() << '\n';
    return fcgaga::kExitConfig;
  } catch (const fcgaga::CheckpointError& e) {
    std::cerr << "fcgaga: checkpoint error: " << e.what() << '\n';
    return fcgaga::kExitCheckpointMismatch;
  } catch (const std::exception& e) {
    std::cerr << "fcgaga: " << e.what() << '\n';
    return fcgaga::kExitRuntime;
  }
}
