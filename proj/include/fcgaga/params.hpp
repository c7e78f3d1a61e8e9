#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcgaga/config.hpp"
#include "fcgaga/tensor.hpp"

namespace fcgaga {

enum class ParamKind { kWeight, kBias, kEmbedding };

struct NamedParam {
  std::string name;
  Tensor tensor;
  ParamKind kind;
};

/// Shared hidden layer followed by separate input and output heads.
struct TimeGateParams {
  Tensor hidden_weight;  // (d + time_dim) x d_h
  Tensor hidden_bias;    // 1 x d_h
  Tensor input_weight;   // d_h x w
  Tensor input_bias;     // 1 x w
  Tensor output_weight;  // d_h x H
  Tensor output_bias;    // 1 x H
};

/// One fully connected residual block. Weights are stored input-major so a
/// row-per-node activation matrix multiplies them from the left.
struct ResidualBlockParams {
  std::vector<Tensor> fc_weights;  // L matrices: D x d_h, then d_h x d_h
  std::vector<Tensor> fc_biases;   // L rows of width d_h
  Tensor backcast;                 // d_h x D
  Tensor forecast;                 // d_h x H
};

struct LayerParams {
  Tensor embedding;  // N x d
  TimeGateParams time_gate;
  std::vector<ResidualBlockParams> blocks;
};

struct ModelParams {
  std::vector<LayerParams> layers;
  /// Gate embedding used by every layer under GateVariant::kSharedLearnable;
  /// undefined otherwise.
  Tensor shared_gate_embedding;

  /// Every learnable tensor exactly once, in a fixed order.
  std::vector<NamedParam> named_parameters() const;
};

/// Standard deviation of the i.i.d. normal node-embedding initialization.
double embedding_init_stddev(const ModelConfig& config);

/// Glorot-uniform FC weights, zero biases, time-gate heads at weight 0 /
/// bias 1 (identity gate), normal embeddings. Deterministic in `seed`.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

}  // namespace fcgaga
