#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fcgaga/config.hpp"
#include "fcgaga/data.hpp"
#include "fcgaga/synth.hpp"
#include "fcgaga/train.hpp"

namespace fcgaga {

/// Process exit codes of the fcgaga tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitMissingFile = 3,
  kExitCheckpointMismatch = 4,
  kExitRuntime = 5,
};

class CliError : public std::runtime_error {
 public:
  CliError(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

/// Everything a run needs, as one flat JSON object. Omitted keys keep the
/// defaults below; unknown keys are rejected.
struct RunConfig {
  std::string dataset_path;
  std::string dataset_format = "csv";
  std::string adjacency_path;    // optional planted graph for weight scoring
  std::string coordinates_path;  // optional node coordinates (node,x,y)
  std::string output_dir = "out";

  ModelConfig model;

  std::size_t epochs = 60;
  std::size_t batches_per_epoch = 800;
  std::size_t batch_size = 4;
  double weight_decay = 1e-5;
  double learning_rate = 1e-3;
  std::size_t lr_anneal_start = 43;
  std::size_t lr_anneal_every = 6;
  std::uint64_t seed = 0;
  bool deterministic = true;
  double train_fraction = 0.7;
  double validation_fraction = 0.1;
  double test_fraction = 0.2;
  std::size_t eval_batch_size = 64;
  std::size_t ablation_seeds = 1;
  std::size_t export_anchors = 288;  // decomposition series length

  SynthConfig synth;

  TrainOptions train_options() const;

  friend bool operator==(const RunConfig& a, const RunConfig& b);
};

/// Throws ConfigError on malformed JSON, unknown keys, wrong value types or
/// invalid values.
RunConfig parse_run_config(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical form: every key, sorted, 2-space indent.
std::string serialize_run_config(const RunConfig& config);
/// Hex SHA-256 of the canonical serialization.
std::string config_hash(const RunConfig& config);
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Writes manifest.json in `dir` listing every listed artifact with its size
/// and SHA-256 digest.
void write_manifest(const std::filesystem::path& dir, std::string_view command, const RunConfig& config,
                    const std::vector<std::filesystem::path>& artifacts);

/// Metrics CSV: horizon,label,mae,mape_pct,rmse,count ("NA" when undefined).
void write_metrics_csv(const MetricsReport& report, const std::filesystem::path& path);

struct TrainOutcome {
  std::filesystem::path checkpoint;
  TrainResult result;
};

struct AblationVariant {
  GateVariant gate;
  std::optional<std::size_t> layers;

  /// "gate" or "gate:M", e.g. "identity_last_layer:4".
  static AblationVariant parse(std::string_view text);
  std::string name() const;
};

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  std::size_t layers = 0;
  MetricsReport test;
  std::uint64_t train_flops = 0;
};

void cmd_synth(const RunConfig& config);
TrainOutcome cmd_train(const RunConfig& config);
MetricsReport cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint);
std::vector<AblationRow> cmd_ablate(const RunConfig& config, const std::vector<AblationVariant>& variants);
void cmd_export(const RunConfig& config, const std::filesystem::path& checkpoint);

}  // namespace fcgaga
