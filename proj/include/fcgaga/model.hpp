#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcgaga/config.hpp"
#include "fcgaga/flops.hpp"
#include "fcgaga/ops.hpp"
#include "fcgaga/params.hpp"
#include "fcgaga/tensor.hpp"

// FC-GAGA forward pass.
//
// Layout: a batch of B windows over N nodes is a (B*N) x w matrix whose row
// b*N + i holds node i's history in window b. Per-node FC inputs are rows
// as well, so the model's Z matrix appears here transposed:
//   z row = [E_i, x_i / level_i, G_i]   (width d + w + N*w)

namespace fcgaga {

/// Divisor floor for the time gate's input effect.
inline constexpr double kTimeGateFloor = 0.01;
/// Levels (per-row input maxima) below this are replaced by 1.
inline constexpr double kLevelFloor = 1e-6;

enum class GateKind {
  kLearnable,  // exp(eps E E^T), hard ReLU gate
  kOnes,
  kIdentity,
  kAttention,  // row-softmax(eps E E^T), soft gate
};

/// Supplies one layer's N x N gate matrix.
class GateProvider {
 public:
  GateProvider(GateKind kind, std::size_t num_nodes, double epsilon, Tensor embedding = {});

  GateKind kind() const { return kind_; }
  bool hard() const { return kind_ != GateKind::kAttention; }
  /// Recomputed on every call so it joins the current graph.
  Tensor weights() const;
  /// Learnable tensors this provider reads (empty for fixed matrices).
  std::vector<Tensor> parameters() const;

 private:
  GateKind kind_;
  std::size_t num_nodes_;
  double epsilon_;
  Tensor embedding_;
};

/// Gate provider for layer `layer_index` under the configured variant.
GateProvider make_gate_variant(GateVariant variant, std::size_t layer_index, const ModelParams& params,
                               const ModelConfig& config);

/// W = exp(eps * E E^T). Overflow saturates with a warning by default.
Tensor edge_weights(const Tensor& embedding, double epsilon, ExpOverflow policy = ExpOverflow::kSaturate);
/// Row-wise softmax of eps * E E^T.
Tensor attention_weights(const Tensor& embedding, double epsilon);

/// Per-row maximum over time with the dead-sensor floor applied (N x 1).
Tensor history_level(const Tensor& history);

/// Hard graph gate for one window: N x N weights, N x w history ->
/// N x (N*w) with G[i, j*w + k] = relu((W[i,j] x[j,k] - level_i) / level_i).
Tensor graph_gate(const Tensor& weights, const Tensor& history, const Tensor& level);
Tensor graph_gate(const Tensor& weights, const Tensor& history);
/// Soft variant used by the attention ablation: W[i,j] x[j,k] / level_i.
Tensor soft_graph_gate(const Tensor& weights, const Tensor& history, const Tensor& level);

struct TimeEffects {
  Tensor input;   // rows x w, divides the layer input
  Tensor output;  // rows x H, multiplies the layer forecast
};

/// `time_features` is rows x time_dim (undefined when time_dim == 0);
/// `embeddings` holds the matching node embedding for each row.
TimeEffects time_gate(const Tensor& time_features, const Tensor& embeddings, const TimeGateParams& params);

/// Residual FC stack on row-per-node inputs; returns the summed block
/// forecasts (rows x H).
Tensor fc_ts_block_stack(const Tensor& z, std::span<const ResidualBlockParams> blocks);

struct ForwardStats {
  FlopCounter graph_gate;
  FlopCounter time_gate;
  FlopCounter ts_blocks;
  FlopCounter total;
  /// Stacked-layer input entries clamped at zero.
  std::size_t clamped_inputs = 0;
};

struct LayerOutput {
  Tensor forecast;      // rows x H, in input units
  Tensor gate_weights;  // N x N
};

LayerOutput layer_forward(const Tensor& history, const Tensor& time_features, const LayerParams& params,
                          const GateProvider& gate, const ModelConfig& config, ForwardStats* stats = nullptr);

struct ModelOutput {
  Tensor forecast;
  std::vector<Tensor> layer_forecasts;
  std::vector<Tensor> gate_weights;
  ForwardStats stats;

  /// Per-layer forecasts scaled by 1/M; they sum to `forecast`.
  std::vector<Tensor> contributions() const;
};

/// Stacked forward: layer m > 1 sees the running sum of earlier layer
/// forecasts (clamped at 0); the output is the mean of layer forecasts.
ModelOutput model_forward(const Tensor& history, const Tensor& time_features, const ModelParams& params,
                          const ModelConfig& config);

}  // namespace fcgaga
