#include "fcgaga/params.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fcgaga {
namespace {

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor glorot(std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> values(fan_in * fan_out);
    for (auto& v : values) v = dist(rng_);
    return Tensor({fan_in, fan_out}, std::move(values), true);
  }

  Tensor normal(std::size_t rows, std::size_t cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = dist(rng_);
    return Tensor({rows, cols}, std::move(values), true);
  }

  static Tensor constant(std::size_t rows, std::size_t cols, double value) {
    return Tensor::full({rows, cols}, value).set_requires_grad(true);
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

double embedding_init_stddev(const ModelConfig& config) {
  // Keeps eps * <E_i, E_i> near 1 so W starts close to the all-ones gate
  // with a self-weight of about e.
  const double eps = std::max(std::abs(config.epsilon), 1.0);
  return 1.0 / std::sqrt(eps * static_cast<double>(config.embedding_dim));
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Initializer init(seed);
  const auto n = config.num_nodes;
  const auto d = config.embedding_dim;
  const auto dh = config.hidden_dim;
  const auto width = config.input_width();
  const double emb_std = embedding_init_stddev(config);

  ModelParams params;
  for (std::size_t m = 0; m < config.layers; ++m) {
    LayerParams layer;
    layer.embedding = init.normal(n, d, emb_std);

    auto& tg = layer.time_gate;
    tg.hidden_weight = init.glorot(d + config.time_features.dim(), dh);
    tg.hidden_bias = Initializer::constant(1, dh, 0.0);
    tg.input_weight = Initializer::constant(dh, config.history, 0.0);
    tg.input_bias = Initializer::constant(1, config.history, 1.0);
    tg.output_weight = Initializer::constant(dh, config.horizon, 0.0);
    tg.output_bias = Initializer::constant(1, config.horizon, 1.0);

    for (std::size_t r = 0; r < config.blocks; ++r) {
      ResidualBlockParams block;
      for (std::size_t l = 0; l < config.fc_layers; ++l) {
        block.fc_weights.push_back(init.glorot(l == 0 ? width : dh, dh));
        block.fc_biases.push_back(Initializer::constant(1, dh, 0.0));
      }
      block.backcast = init.glorot(dh, width);
      block.forecast = init.glorot(dh, config.horizon);
      layer.blocks.push_back(std::move(block));
    }
    params.layers.push_back(std::move(layer));
  }
  if (config.gate == GateVariant::kSharedLearnable) params.shared_gate_embedding = init.normal(n, d, emb_std);
  return params;
}

std::vector<NamedParam> ModelParams::named_parameters() const {
  std::vector<NamedParam> out;
  auto add = [&](std::string name, const Tensor& t, ParamKind kind) {
    if (!t.defined()) return;
    const bool seen = std::any_of(out.begin(), out.end(), [&](const NamedParam& p) { return p.tensor.id() == t.id(); });
    if (!seen) out.push_back({std::move(name), t, kind});
  };
  if (shared_gate_embedding.defined()) add("shared_gate.embedding", shared_gate_embedding, ParamKind::kEmbedding);
  for (std::size_t m = 0; m < layers.size(); ++m) {
    const auto& layer = layers[m];
    const auto prefix = "layer" + std::to_string(m) + ".";
    add(prefix + "embedding", layer.embedding, ParamKind::kEmbedding);
    const auto& tg = layer.time_gate;
    add(prefix + "time_gate.hidden.weight", tg.hidden_weight, ParamKind::kWeight);
    add(prefix + "time_gate.hidden.bias", tg.hidden_bias, ParamKind::kBias);
    add(prefix + "time_gate.input.weight", tg.input_weight, ParamKind::kWeight);
    add(prefix + "time_gate.input.bias", tg.input_bias, ParamKind::kBias);
    add(prefix + "time_gate.output.weight", tg.output_weight, ParamKind::kWeight);
    add(prefix + "time_gate.output.bias", tg.output_bias, ParamKind::kBias);
    for (std::size_t r = 0; r < layer.blocks.size(); ++r) {
      const auto& block = layer.blocks[r];
      const auto bp = prefix + "block" + std::to_string(r) + ".";
      for (std::size_t l = 0; l < block.fc_weights.size(); ++l) {
        add(bp + "fc" + std::to_string(l) + ".weight", block.fc_weights[l], ParamKind::kWeight);
        add(bp + "fc" + std::to_string(l) + ".bias", block.fc_biases[l], ParamKind::kBias);
      }
      add(bp + "backcast.weight", block.backcast, ParamKind::kWeight);
      add(bp + "forecast.weight", block.forecast, ParamKind::kWeight);
    }
  }
  return out;
}

}  // namespace fcgaga
