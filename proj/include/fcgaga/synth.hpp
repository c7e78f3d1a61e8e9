#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fcgaga/data.hpp"
#include "fcgaga/tensor.hpp"

// Synthetic panels with a planted coupling graph.
//
//   speed_i(t) = baseline_i - seasonal(t mod period) - c_i(t)
//                - coupling * sum_j adj[i, j] c_j(t - lag) + noise
//
// clipped at 0, where c_j is node j's congestion: exponentially decaying
// dips started by Bernoulli events.

namespace fcgaga {

struct SynthConfig {
  std::size_t num_nodes = 8;
  std::size_t num_steps = 2016;
  /// Ring neighbors on each side of the planted cycle (so 2k neighbors).
  std::size_t ring_neighbors = 1;
  /// Overrides the planted cycle when set (N x N, hollow, 0/1).
  std::optional<std::vector<double>> adjacency;
  double baseline_min = 55.0;
  double baseline_max = 70.0;
  double seasonal_amplitude = 10.0;
  std::size_t period = 288;
  std::size_t lag = 12;
  double coupling = 1.0;
  double noise = 0.5;
  double event_rate = 0.02;  // per node and step
  double event_depth = 20.0;
  double event_decay = 0.9;  // per-step congestion retention
  std::int64_t start_timestamp = 1330560000;  // 2012-03-01 00:00:00
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;
};

struct SynthData {
  SpeedPanel panel;
  Tensor adjacency;                                // N x N, 0/1
  std::vector<std::pair<double, double>> coordinates;  // consecutive cycle nodes are adjacent on a unit circle
};

SynthData generate(const SynthConfig& config);

/// Symmetric random cycle: node order is a seeded permutation and every node
/// links to its k nearest ring positions on each side.
Tensor planted_cycle(std::size_t num_nodes, std::size_t ring_neighbors, std::uint64_t seed);

/// Pearson correlation of x_j(t) and x_i(t + lag) over the panel.
double lagged_cross_correlation(const SpeedPanel& panel, std::size_t i, std::size_t j, std::size_t lag);

/// Nodes j != i ordered by W[i, j] / W[i, i], descending, ties by ascending j.
std::vector<std::size_t> rank_neighbors(const Tensor& weights, std::size_t node);

/// Mean filtered reciprocal rank of the true neighbors: each true neighbor's
/// rank counts only non-neighbors ranked above it, so a perfect ordering
/// scores 1. Nodes without true neighbors are skipped.
double neighbor_rank_score(const Tensor& weights, const Tensor& adjacency);

struct NeighborRankReport {
  std::vector<double> layer_scores;
  double score = 0.0;  // mean over layers
  /// Mean W[i, j] / W[i, i] at each rank 1..N-1, over nodes and layers.
  std::vector<double> mean_weight_by_rank;
  /// Mean Euclidean distance at each rank, when coordinates are given.
  std::optional<std::vector<double>> mean_distance_by_rank;
};

NeighborRankReport neighbor_rank_report(std::span<const Tensor> weights, const Tensor& adjacency,
                                        std::span<const std::pair<double, double>> coordinates = {});

struct PermutationTest {
  double observed = 0.0;
  std::vector<double> null_scores;
  double null_p95 = 0.0;

  bool significant() const { return observed > null_p95; }
};

/// Scores `weights` against `shuffles` random relabelings of the adjacency.
PermutationTest permutation_test(std::span<const Tensor> weights, const Tensor& adjacency, std::size_t shuffles,
                                 std::uint64_t seed);

}  // namespace fcgaga
