#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fcgaga {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Which graph gate each layer uses.
enum class GateVariant {
  kLearnablePerLayer,    // every layer learns its own W = exp(eps E E^T)
  kSharedLearnable,      // one learnable W shared by all layers
  kLearnableFirstLayer,  // layer 1 learnable, later layers all-ones
  kOnes,                 // W = 1 everywhere
  kIdentity,             // W = I: univariate model
  kGraphAttention,       // softmax(eps E E^T) soft gate, no hard threshold
  kIdentityLastLayer,    // learnable except the last layer, which uses W = I ("4I")
};

std::string_view to_string(GateVariant variant);
/// Throws ConfigError on unknown names.
GateVariant parse_gate_variant(std::string_view name);
const std::vector<GateVariant>& all_gate_variants();

/// Time covariates fed to the time gate.
struct TimeFeatureSpec {
  bool time_of_day = true;
  bool day_of_week = false;

  std::size_t dim() const { return (time_of_day ? 1 : 0) + (day_of_week ? 7 : 0); }
  friend bool operator==(const TimeFeatureSpec&, const TimeFeatureSpec&) = default;
};

struct ModelConfig {
  std::size_t num_nodes = 207;
  std::size_t history = 12;  // w
  std::size_t horizon = 12;  // H
  std::size_t embedding_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t fc_layers = 3;  // L, per residual block
  std::size_t blocks = 2;     // R
  std::size_t layers = 3;     // stacked FC-GAGA layers
  double epsilon = 10.0;
  GateVariant gate = GateVariant::kLearnablePerLayer;
  TimeFeatureSpec time_features;

  /// Width of one node's FC input: embedding, own normalized history, gated
  /// histories of all nodes.
  std::size_t input_width() const { return embedding_dim + history + num_nodes * history; }

  /// Throws ConfigError naming the violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace fcgaga
