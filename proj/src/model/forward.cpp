#include <spdlog/spdlog.h>

#include <cmath>
#include <string>

#include "fcgaga/graph.hpp"
#include "fcgaga/model.hpp"

namespace fcgaga {
namespace {

Tensor tile_rows(const Tensor& x, std::size_t times) {
  if (times == 1) return x;
  std::vector<Tensor> copies(times, x);
  return concat(copies, 0);
}

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) { return add(matmul(x, weight), bias); }

}  // namespace

TimeEffects time_gate(const Tensor& time_features, const Tensor& embeddings, const TimeGateParams& params) {
  const Tensor input = time_features.defined() ? concat({embeddings, time_features}, 1) : embeddings;
  if (input.cols() != params.hidden_weight.rows()) {
    throw ShapeError("time_gate", input.shape(), params.hidden_weight.shape());
  }
  const auto hidden = relu(dense(input, params.hidden_weight, params.hidden_bias));
  return {dense(hidden, params.input_weight, params.input_bias), dense(hidden, params.output_weight, params.output_bias)};
}

Tensor fc_ts_block_stack(const Tensor& z, std::span<const ResidualBlockParams> blocks) {
  if (blocks.empty()) throw ShapeError("fc_ts_block_stack", "no residual blocks");
  Tensor residual = z;
  Tensor backcast;
  Tensor forecast;
  for (std::size_t r = 0; r < blocks.size(); ++r) {
    const auto& block = blocks[r];
    residual = r == 0 ? relu(residual) : relu(sub(residual, backcast));
    Tensor h = residual;
    for (std::size_t l = 0; l < block.fc_weights.size(); ++l) {
      if (h.cols() != block.fc_weights[l].rows()) {
        throw ShapeError("fc_ts_block_stack block " + std::to_string(r) + " layer " + std::to_string(l), h.shape(),
                         block.fc_weights[l].shape());
      }
      h = relu(dense(h, block.fc_weights[l], block.fc_biases[l]));
    }
    if (block.backcast.cols() != z.cols()) {
      throw ShapeError("fc_ts_block_stack block " + std::to_string(r) + " backcast", block.backcast.shape(), z.shape());
    }
    backcast = matmul(h, block.backcast);
    const auto partial = matmul(h, block.forecast);
    forecast = r == 0 ? partial : add(forecast, partial);
  }
  return forecast;
}

LayerOutput layer_forward(const Tensor& history, const Tensor& time_features, const LayerParams& params,
                          const GateProvider& gate, const ModelConfig& config, ForwardStats* stats) {
  const auto n = config.num_nodes;
  const auto rows = history.rows();
  if (history.rank() != 2 || rows % n != 0 || history.cols() != config.history) {
    throw ShapeError("layer_forward", "history of shape " + to_string(history.shape()) + " does not match " +
                                          std::to_string(n) + " nodes x " + std::to_string(config.history) +
                                          " steps");
  }
  const auto windows = rows / n;
  const auto tdim = config.time_features.dim();
  if (tdim > 0 && (!time_features.defined() || time_features.rows() != rows || time_features.cols() != tdim)) {
    throw ShapeError("layer_forward", "time features must be " + std::to_string(rows) + " x " + std::to_string(tdim));
  }

  auto& counter = flop_counter();
  const auto start = counter;

  const auto embeddings = tile_rows(params.embedding, windows);
  const auto effects = time_gate(tdim > 0 ? time_features : Tensor(), embeddings, params.time_gate);
  std::size_t floored = 0;
  for (double v : effects.input.values()) floored += std::abs(v) < kTimeGateFloor;
  if (floored) spdlog::debug("time gate: {} input effects clamped to the divisor floor", floored);
  const auto x = div(history, effects.input, kTimeGateFloor);
  const auto after_time_gate = counter;

  const auto level = history_level(x);
  const auto weights = gate.weights();
  std::vector<Tensor> gated;
  gated.reserve(windows);
  for (std::size_t b = 0; b < windows; ++b) {
    const auto xb = windows == 1 ? x : slice_rows(x, b * n, (b + 1) * n);
    const auto lb = windows == 1 ? level : slice_rows(level, b * n, (b + 1) * n);
    gated.push_back(gate.hard() ? graph_gate(weights, xb, lb) : soft_graph_gate(weights, xb, lb));
  }
  const auto all_gated = windows == 1 ? gated.front() : concat(gated, 0);
  const auto after_graph_gate = counter;

  const auto z = concat({embeddings, div(x, level, 0.0), all_gated}, 1);
  const auto core = fc_ts_block_stack(z, params.blocks);
  const auto after_blocks = counter;

  auto forecast = mul(mul(core, effects.output), level);

  if (stats) {
    stats->time_gate += after_time_gate - start;
    stats->graph_gate += after_graph_gate - after_time_gate;
    stats->ts_blocks += after_blocks - after_graph_gate;
    stats->total += counter - start;
  }
  return {forecast, weights};
}

std::vector<Tensor> ModelOutput::contributions() const {
  NoGradGuard no_grad;
  std::vector<Tensor> out;
  const double inv = 1.0 / static_cast<double>(layer_forecasts.size());
  for (const auto& f : layer_forecasts) out.push_back(scale(f, inv));
  return out;
}

ModelOutput model_forward(const Tensor& history, const Tensor& time_features, const ModelParams& params,
                          const ModelConfig& config) {
  config.validate();
  if (params.layers.size() != config.layers) {
    throw ConfigError("model_forward: parameters hold " + std::to_string(params.layers.size()) +
                      " layers, config expects " + std::to_string(config.layers));
  }
  ModelOutput out;
  Tensor running;
  for (std::size_t m = 0; m < config.layers; ++m) {
    Tensor input = history;
    if (m > 0) {
      std::size_t negative = 0;
      for (double v : running.values()) negative += v < 0.0;
      if (negative) {
        out.stats.clamped_inputs += negative;
        spdlog::debug("layer {}: {} stacked input entries clamped at zero", m, negative);
      }
      input = relu(running);
    }
    const auto gate = make_gate_variant(config.gate, m, params, config);
    auto layer = layer_forward(input, time_features, params.layers[m], gate, config, &out.stats);
    running = m == 0 ? layer.forecast : add(running, layer.forecast);
    out.layer_forecasts.push_back(std::move(layer.forecast));
    out.gate_weights.push_back(std::move(layer.gate_weights));
  }
  out.forecast = config.layers == 1 ? running : scale(running, 1.0 / static_cast<double>(config.layers));
  return out;
}

}  // namespace fcgaga
