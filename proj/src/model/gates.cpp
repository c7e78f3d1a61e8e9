#include <stdexcept>

#include "fcgaga/model.hpp"

namespace fcgaga {

GateProvider::GateProvider(GateKind kind, std::size_t num_nodes, double epsilon, Tensor embedding)
    : kind_(kind), num_nodes_(num_nodes), epsilon_(epsilon), embedding_(std::move(embedding)) {
  const bool needs_embedding = kind == GateKind::kLearnable || kind == GateKind::kAttention;
  if (needs_embedding && !embedding_.defined()) throw std::invalid_argument("gate provider: embedding required");
  if (!needs_embedding) embedding_ = Tensor();
  if (embedding_.defined() && embedding_.rows() != num_nodes) {
    throw ShapeError("gate provider", "embedding has " + std::to_string(embedding_.rows()) + " rows for " +
                                          std::to_string(num_nodes) + " nodes");
  }
}

Tensor GateProvider::weights() const {
  switch (kind_) {
    case GateKind::kLearnable:
      return edge_weights(embedding_, epsilon_);
    case GateKind::kAttention:
      return attention_weights(embedding_, epsilon_);
    case GateKind::kOnes:
      return Tensor::ones({num_nodes_, num_nodes_});
    case GateKind::kIdentity:
      return Tensor::identity(num_nodes_);
  }
  throw std::logic_error("unreachable gate kind");
}

std::vector<Tensor> GateProvider::parameters() const {
  if (embedding_.defined()) return {embedding_};
  return {};
}

GateProvider make_gate_variant(GateVariant variant, std::size_t layer_index, const ModelParams& params,
                               const ModelConfig& config) {
  if (layer_index >= params.layers.size()) throw std::out_of_range("make_gate_variant: layer index out of range");
  const auto n = config.num_nodes;
  const auto eps = config.epsilon;
  const auto& own = params.layers[layer_index].embedding;
  const bool last = layer_index + 1 == config.layers;
  switch (variant) {
    case GateVariant::kLearnablePerLayer:
      return {GateKind::kLearnable, n, eps, own};
    case GateVariant::kSharedLearnable:
      if (!params.shared_gate_embedding.defined()) {
        throw ConfigError("shared_learnable gate requires a shared gate embedding in the parameters");
      }
      return {GateKind::kLearnable, n, eps, params.shared_gate_embedding};
    case GateVariant::kLearnableFirstLayer:
      if (layer_index == 0) return {GateKind::kLearnable, n, eps, own};
      return {GateKind::kOnes, n, eps};
    case GateVariant::kOnes:
      return {GateKind::kOnes, n, eps};
    case GateVariant::kIdentity:
      return {GateKind::kIdentity, n, eps};
    case GateVariant::kGraphAttention:
      return {GateKind::kAttention, n, eps, own};
    case GateVariant::kIdentityLastLayer:
      if (last) return {GateKind::kIdentity, n, eps};
      return {GateKind::kLearnable, n, eps, own};
  }
  throw ConfigError("unknown gate variant");
}

Tensor edge_weights(const Tensor& embedding, double epsilon, ExpOverflow policy) {
  return exp(scale(matmul(embedding, transpose(embedding)), epsilon), policy);
}

Tensor attention_weights(const Tensor& embedding, double epsilon) {
  const auto logits = scale(matmul(embedding, transpose(embedding)), epsilon);
  const auto shifted = exp(sub(logits, row_max(logits)));
  return div(shifted, sum(shifted, 1), 0.0);
}

Tensor history_level(const Tensor& history) { return floor_substitute(row_max(history), kLevelFloor, 1.0); }

namespace {

// W[i, j] * x[j, k] laid out as an N x (N*w) matrix.
Tensor weighted_histories(const char* op, const Tensor& weights, const Tensor& history, const Tensor& level) {
  const auto n = history.rows();
  const auto w = history.cols();
  if (weights.rank() != 2 || weights.rows() != n || weights.cols() != n) {
    throw ShapeError(op, weights.shape(), history.shape());
  }
  if (level.rows() != n || level.cols() != 1) throw ShapeError(op, level.shape(), history.shape());
  return mul(repeat_columns(weights, w), reshape(history, {1, n * w}));
}

}  // namespace

Tensor graph_gate(const Tensor& weights, const Tensor& history, const Tensor& level) {
  const auto weighted = weighted_histories("graph_gate", weights, history, level);
  return relu(div(sub(weighted, level), level, 0.0));
}

Tensor graph_gate(const Tensor& weights, const Tensor& history) {
  return graph_gate(weights, history, history_level(history));
}

Tensor soft_graph_gate(const Tensor& weights, const Tensor& history, const Tensor& level) {
  return div(weighted_histories("soft_graph_gate", weights, history, level), level, 0.0);
}

}  // namespace fcgaga
