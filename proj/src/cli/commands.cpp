#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "fcgaga/checkpoint.hpp"
#include "fcgaga/cli.hpp"
#include "fcgaga/export.hpp"
#include "fcgaga/graph.hpp"
#include "fcgaga/model.hpp"

namespace fs = std::filesystem;

namespace fcgaga {
namespace {

fs::path prepare_output(const RunConfig& config) {
  const fs::path dir = config.output_dir;
  fs::create_directories(dir);
  return dir;
}

SpeedPanel load_dataset(const RunConfig& config) {
  if (config.dataset_path.empty()) throw ConfigError("dataset_path is not set");
  if (!fs::exists(config.dataset_path)) throw CliError(kExitMissingFile, "dataset not found: " + config.dataset_path);
  auto panel = load_panel(config.dataset_path, parse_panel_format(config.dataset_format));
  if (panel.num_nodes() != config.model.num_nodes) {
    throw ConfigError(fmt::format("dataset has {} nodes but num_nodes is {}", panel.num_nodes(),
                                  config.model.num_nodes));
  }
  return panel;
}

Checkpoint load_matching_checkpoint(const RunConfig& config, const fs::path& path) {
  if (path.empty()) throw ConfigError("a checkpoint is required");
  if (!fs::exists(path)) throw CliError(kExitMissingFile, "checkpoint not found: " + path.string());
  Checkpoint ck;
  try {
    ck = load_checkpoint(path);
  } catch (const CheckpointError& e) {
    throw CliError(kExitCheckpointMismatch, e.what());
  }
  if (!(ck.config == config.model)) {
    throw CliError(kExitCheckpointMismatch,
                   fmt::format("checkpoint {} was trained with a different model config", path.string()));
  }
  return ck;
}

std::uint64_t effective_seed(const RunConfig& config) {
  if (config.deterministic) return config.seed;
  std::random_device rd;
  return config.seed ^ (static_cast<std::uint64_t>(rd()) << 32 | rd());
}

Splits splits_for(const RunConfig& config, const SpeedPanel& panel) {
  return split(panel.num_steps(), {config.train_fraction, config.validation_fraction, config.test_fraction},
               {config.model.history, config.model.horizon});
}

std::vector<std::pair<double, double>> read_coordinates(const fs::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw CliError(kExitMissingFile, "coordinates not found: " + path.string());
  std::vector<std::pair<double, double>> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, x, y;
    std::getline(ss, id, ',');
    std::getline(ss, x, ',');
    std::getline(ss, y, ',');
    out.emplace_back(std::stod(x), std::stod(y));
  }
  if (out.size() != n) throw ConfigError(fmt::format("{} coordinates for {} nodes", out.size(), n));
  return out;
}

void write_json(const nlohmann::json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

}  // namespace

AblationVariant AblationVariant::parse(std::string_view text) {
  AblationVariant v;
  const auto colon = text.find(':');
  v.gate = parse_gate_variant(text.substr(0, colon));
  if (colon != std::string_view::npos) {
    const auto count = text.substr(colon + 1);
    std::size_t layers = 0;
    const auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), layers);
    if (ec != std::errc() || ptr != count.data() + count.size() || layers == 0) {
      throw ConfigError(fmt::format("bad layer count in variant '{}'", text));
    }
    v.layers = layers;
  }
  return v;
}

std::string AblationVariant::name() const {
  return layers ? fmt::format("{}:{}", to_string(gate), *layers) : std::string(to_string(gate));
}

void cmd_synth(const RunConfig& config) {
  const auto dir = prepare_output(config);
  auto synth = config.synth;
  synth.num_nodes = config.model.num_nodes;
  synth.seed = effective_seed(config);
  const auto data = generate(synth);
  save_panel_csv(data.panel, dir / "panel.csv");
  write_matrix_csv(data.adjacency, data.panel.node_ids, dir / "adjacency.csv");
  {
    std::ofstream out(dir / "coordinates.csv");
    out << "node,x,y\n";
    for (std::size_t i = 0; i < data.coordinates.size(); ++i) {
      out << fmt::format("{},{},{}\n", data.panel.node_ids[i], data.coordinates[i].first, data.coordinates[i].second);
    }
  }
  write_manifest(dir, "synth", config, {"panel.csv", "adjacency.csv", "coordinates.csv"});
  spdlog::info("synthesized {} steps x {} nodes into {}", data.panel.num_steps(), data.panel.num_nodes(), dir.string());
}

TrainOutcome cmd_train(const RunConfig& config) {
  const auto panel = load_dataset(config);
  const auto dir = prepare_output(config);
  auto options = config.train_options();
  options.seed = effective_seed(config);
  options.log_path = dir / "train_log.jsonl";
  options.checkpoint_path = dir / "checkpoint.bin";

  TrainOutcome outcome{*options.checkpoint_path, train(config.model, panel, options)};
  const auto& r = outcome.result;
  const auto splits = splits_for(config, panel);
  const auto test = evaluate(r.best_params, config.model, panel, splits.test, {}, config.eval_batch_size);
  write_metrics_csv(test, dir / "metrics_test.csv");
  write_json({{"steps", r.steps},
              {"best_epoch", r.best_epoch},
              {"best_validation_mae", r.best_validation_mae ? nlohmann::json(*r.best_validation_mae) : nlohmann::json()},
              {"final_train_loss", r.epochs.back().train_loss},
              {"forward_flops",
               {{"matmul", r.forward_flops.matmul},
                {"elementwise", r.forward_flops.elementwise},
                {"reduction", r.forward_flops.reduction},
                {"total", r.forward_flops.total()}}}},
             dir / "train_summary.json");
  write_manifest(dir, "train", config,
                 {"checkpoint.bin", "train_log.jsonl", "metrics_test.csv", "train_summary.json"});
  return outcome;
}

MetricsReport cmd_eval(const RunConfig& config, const fs::path& checkpoint) {
  const auto ck = load_matching_checkpoint(config, checkpoint);
  const auto panel = load_dataset(config);
  const auto dir = prepare_output(config);
  const auto splits = splits_for(config, panel);
  const auto report = evaluate(ck.params, ck.config, panel, splits.test, {}, config.eval_batch_size);
  write_metrics_csv(report, dir / "metrics_eval.csv");
  write_manifest(dir, "eval", config, {"metrics_eval.csv"});
  return report;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& config, const std::vector<AblationVariant>& variants) {
  if (variants.empty()) throw ConfigError("no ablation variants given");
  const auto panel = load_dataset(config);
  const auto dir = prepare_output(config);
  std::vector<AblationRow> rows;
  std::vector<fs::path> artifacts;
  for (const auto& variant : variants) {
    for (std::size_t k = 0; k < config.ablation_seeds; ++k) {
      RunConfig run = config;
      run.model.gate = variant.gate;
      if (variant.layers) run.model.layers = *variant.layers;
      run.model.validate();
      run.seed = config.seed + k;
      auto name = variant.name();
      std::replace(name.begin(), name.end(), ':', '_');
      const fs::path sub = fs::path("ablate") / name / fmt::format("seed{}", run.seed);
      run.output_dir = (dir / sub).string();
      spdlog::info("ablation: {} seed {}", variant.name(), run.seed);
      const auto outcome = cmd_train(run);
      AblationRow row;
      row.variant = variant.name();
      row.seed = run.seed;
      row.layers = run.model.layers;
      const auto splits = splits_for(run, panel);
      row.test = evaluate(outcome.result.best_params, run.model, panel, splits.test, {}, run.eval_batch_size);
      row.train_flops = outcome.result.forward_flops.total();
      rows.push_back(std::move(row));
      for (const auto* f : {"checkpoint.bin", "train_log.jsonl", "metrics_test.csv", "train_summary.json"}) {
        artifacts.push_back(sub / f);
      }
    }
  }

  std::ofstream out(dir / "ablation.csv");
  auto cell = [](const HorizonMetrics* m, std::optional<double> HorizonMetrics::*metric) {
    return m && m->*metric ? fmt::format("{}", *(m->*metric)) : std::string("NA");
  };
  out << "variant,seed,layers,mae_15min,mae_30min,mae_60min,mape_pct_15min,mape_pct_30min,mape_pct_60min,"
         "rmse_15min,rmse_30min,rmse_60min,train_flops\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{}", r.variant, r.seed, r.layers);
    for (auto metric : {&HorizonMetrics::mae, &HorizonMetrics::mape_pct, &HorizonMetrics::rmse}) {
      for (std::size_t h : {3, 6, 12}) out << ',' << cell(r.test.find(h), metric);
    }
    out << ',' << r.train_flops << '\n';
  }
  out.close();
  artifacts.emplace_back("ablation.csv");
  write_manifest(dir, "ablate", config, artifacts);
  return rows;
}

void cmd_export(const RunConfig& config, const fs::path& checkpoint) {
  const auto ck = load_matching_checkpoint(config, checkpoint);
  const auto panel = load_dataset(config);
  const auto dir = prepare_output(config);
  const auto& model = ck.config;
  std::vector<fs::path> artifacts;

  NoGradGuard no_grad;
  std::vector<Tensor> weights;
  for (std::size_t m = 0; m < model.layers; ++m) {
    weights.push_back(make_gate_variant(model.gate, m, ck.params, model).weights());
    const auto name = fmt::format("weights_layer{}.csv", m + 1);
    write_matrix_csv(weights.back(), panel.node_ids, dir / name);
    artifacts.emplace_back(name);
  }
  write_neighbor_rankings(weights, panel.node_ids, dir / "neighbor_rankings.csv");
  artifacts.emplace_back("neighbor_rankings.csv");

  if (!config.adjacency_path.empty()) {
    if (!fs::exists(config.adjacency_path)) {
      throw CliError(kExitMissingFile, "adjacency not found: " + config.adjacency_path);
    }
    const auto adjacency = read_matrix_csv(config.adjacency_path);
    std::vector<std::pair<double, double>> coords;
    if (!config.coordinates_path.empty()) coords = read_coordinates(config.coordinates_path, panel.num_nodes());
    const auto report = neighbor_rank_report(weights, adjacency, coords);
    write_rank_report(report, dir / "rank_report.csv");
    const auto perm = permutation_test(weights, adjacency, 1000, config.seed);
    write_json({{"score", perm.observed},
                {"layer_scores", report.layer_scores},
                {"null_p95", perm.null_p95},
                {"significant", perm.significant()}},
               dir / "rank_score.json");
    artifacts.emplace_back("rank_report.csv");
    artifacts.emplace_back("rank_score.json");
  }

  const auto splits = splits_for(config, panel);
  auto anchors = evaluation_anchors(splits.test, {model.history, model.horizon});
  if (anchors.size() > config.export_anchors) anchors.resize(config.export_anchors);
  if (!anchors.empty()) {
    const auto batch = make_batch(panel, anchors, {model.history, model.horizon}, model.time_features);
    const auto output = model_forward(batch.history, batch.input_time_features, ck.params, model);
    write_decomposition(output, batch, panel, dir / "decomposition.csv");
    artifacts.emplace_back("decomposition.csv");
  }
  write_manifest(dir, "export", config, artifacts);
}

}  // namespace fcgaga
