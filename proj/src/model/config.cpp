#include "fcgaga/config.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace fcgaga {
namespace {

constexpr std::array<std::pair<GateVariant, std::string_view>, 7> kVariantNames{{
    {GateVariant::kLearnablePerLayer, "learnable_per_layer"},
    {GateVariant::kSharedLearnable, "shared_learnable"},
    {GateVariant::kLearnableFirstLayer, "learnable_first_layer"},
    {GateVariant::kOnes, "ones"},
    {GateVariant::kIdentity, "identity"},
    {GateVariant::kGraphAttention, "graph_attention"},
    {GateVariant::kIdentityLastLayer, "identity_last_layer"},
}};

void require_positive(std::size_t value, const char* name) {
  if (value == 0) throw ConfigError(std::string("model config: ") + name + " must be positive");
}

}  // namespace

std::string_view to_string(GateVariant variant) {
  for (const auto& [v, name] : kVariantNames) {
    if (v == variant) return name;
  }
  return "unknown";
}

GateVariant parse_gate_variant(std::string_view name) {
  for (const auto& [v, n] : kVariantNames) {
    if (n == name) return v;
  }
  throw ConfigError("unknown gate variant '" + std::string(name) + "'");
}

const std::vector<GateVariant>& all_gate_variants() {
  static const std::vector<GateVariant> variants = [] {
    std::vector<GateVariant> out;
    for (const auto& entry : kVariantNames) out.push_back(entry.first);
    return out;
  }();
  return variants;
}

void ModelConfig::validate() const {
  require_positive(num_nodes, "num_nodes");
  require_positive(history, "history");
  require_positive(horizon, "horizon");
  require_positive(embedding_dim, "embedding_dim");
  require_positive(hidden_dim, "hidden_dim");
  require_positive(blocks, "blocks");
  require_positive(layers, "layers");
  if (fc_layers < 2) throw ConfigError("model config: fc_layers must be at least 2");
  if (layers > 1 && history != horizon) {
    throw ConfigError("model config: stacking more than one layer requires history == horizon (got " +
                      std::to_string(history) + " and " + std::to_string(horizon) + ")");
  }
  if (!std::isfinite(epsilon)) throw ConfigError("model config: epsilon must be finite");
}

}  // namespace fcgaga
