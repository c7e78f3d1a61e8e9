#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fcgaga/checkpoint.hpp"
#include "fcgaga/graph.hpp"
#include "fcgaga/model.hpp"
#include "fcgaga/ops.hpp"
#include "fcgaga/train.hpp"

namespace fcgaga {
namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

nlohmann::json to_json(const MetricsReport& report) {
  auto horizons = nlohmann::json::array();
  for (const auto& h : report.horizons) {
    horizons.push_back({{"horizon", h.horizon},
                        {"mae", optional_json(h.mae)},
                        {"mape_pct", optional_json(h.mape_pct)},
                        {"rmse", optional_json(h.rmse)},
                        {"count", h.count}});
  }
  return {{"mean_mae", optional_json(report.mean_mae)}, {"samples", report.samples}, {"horizons", horizons}};
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"lr", r.learning_rate},
          {"train_loss", r.train_loss},
          {"validation", r.validation ? to_json(*r.validation) : nlohmann::json()},
          {"wall_seconds", r.wall_seconds},
          {"cumulative_flops", r.cumulative_flops}};
}

}  // namespace

ModelParams clone_params(const ModelParams& params) {
  ModelParams out = params;
  auto copy = [](Tensor& t) {
    if (t.defined()) t = t.clone();
  };
  copy(out.shared_gate_embedding);
  for (auto& layer : out.layers) {
    copy(layer.embedding);
    auto& tg = layer.time_gate;
    for (auto* t : {&tg.hidden_weight, &tg.hidden_bias, &tg.input_weight, &tg.input_bias, &tg.output_weight,
                    &tg.output_bias}) {
      copy(*t);
    }
    for (auto& block : layer.blocks) {
      for (auto& t : block.fc_weights) copy(t);
      for (auto& t : block.fc_biases) copy(t);
      copy(block.backcast);
      copy(block.forecast);
    }
  }
  return out;
}

TrainResult train(const ModelConfig& config, const SpeedPanel& panel, const TrainOptions& options) {
  config.validate();
  panel.validate();
  if (panel.num_nodes() != config.num_nodes) {
    throw ConfigError(fmt::format("panel has {} nodes, model expects {}", panel.num_nodes(), config.num_nodes));
  }
  if (options.epochs == 0 || options.batches_per_epoch == 0 || options.batch_size == 0) {
    throw ConfigError("epochs, batches per epoch and batch size must be positive");
  }
  const WindowSpec window{config.history, config.horizon};
  const auto splits = split(panel.num_steps(), options.split, window);

  TrainResult result;
  auto params = init_params(config, options.seed);
  Adam adam(params.named_parameters(), AdamOptions{options.schedule.initial});
  BatchSampler sampler(panel, splits.train, window, config.time_features, options.seed + 0x9e3779b97f4a7c15ULL);

  std::ofstream log;
  if (options.log_path) {
    log.open(*options.log_path, std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write training log " + options.log_path->string());
  }
  auto save = [&](std::size_t epoch) {
    if (!options.checkpoint_path) return;
    save_checkpoint({config, result.best_params, adam.state(), epoch, options.seed}, *options.checkpoint_path);
  };

  auto& counter = flop_counter();
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    adam.set_learning_rate(options.schedule.at(epoch));
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < options.batches_per_epoch; ++b) {
      const auto batch = sampler.next(options.batch_size);
      GraphScope scope;
      const auto before = counter;
      double mae_value = 0.0;
      try {
        const auto mae = masked_mae_loss(forecast_batch(params, config, batch), batch.target);
        const auto loss = add(mae, weight_decay_penalty(params, options.weight_decay));
        mae_value = mae.item();
        if (!std::isfinite(loss.item())) throw NumericError("non-finite loss");
        result.forward_flops += counter - before;
        adam.zero_grad();
        if (scope.graph().size() > 0) backward(loss);
        adam.step();
      } catch (const NumericError& e) {
        throw TrainingAborted(fmt::format("epoch {} step {}: {}", epoch, result.steps + 1, e.what()));
      }
      loss_sum += mae_value;
      result.step_losses.push_back(mae_value);
      ++result.steps;
      if (options.on_step) options.on_step(result.steps, params);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.learning_rate = adam.learning_rate();
    record.train_loss = loss_sum / static_cast<double>(options.batches_per_epoch);
    if (options.validate) {
      record.validation = evaluate(params, config, panel, splits.validation, {}, options.eval_batch_size);
      const auto& mae = record.validation->mean_mae;
      if (mae && (!result.best_validation_mae || *mae < *result.best_validation_mae)) {
        result.best_validation_mae = mae;
        result.best_epoch = epoch;
        result.best_params = clone_params(params);
        save(epoch);
      }
    }
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    record.cumulative_flops = result.forward_flops.total();
    if (log) log << to_json(record).dump() << '\n' << std::flush;
    spdlog::info("epoch {}/{} lr {:g} train loss {:.4f}{}", epoch, options.epochs, record.learning_rate,
                 record.train_loss,
                 record.validation && record.validation->mean_mae
                     ? fmt::format(" val mae {:.4f}", *record.validation->mean_mae)
                     : std::string());
    result.epochs.push_back(std::move(record));
  }

  if (!result.best_params.layers.size()) {
    result.best_params = clone_params(params);
    result.best_epoch = options.epochs;
    save(options.epochs);
  }
  result.final_params = std::move(params);
  result.optimizer_state = adam.state();
  return result;
}

}  // namespace fcgaga
