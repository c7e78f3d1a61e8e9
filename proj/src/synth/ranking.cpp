#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fcgaga/synth.hpp"

namespace fcgaga {
namespace {

void check_square(const char* op, const Tensor& weights, const Tensor& adjacency) {
  if (weights.rank() != 2 || weights.rows() != weights.cols() || weights.shape() != adjacency.shape()) {
    throw ShapeError(op, weights.shape(), adjacency.shape());
  }
}

double score_with(const Tensor& weights, const std::vector<std::vector<std::size_t>>& rankings,
                  const Tensor& adjacency) {
  const auto n = weights.rows();
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t non_neighbors_above = 0;
    for (auto j : rankings[i]) {
      if (adjacency.at(i, j) != 0.0) {
        total += 1.0 / static_cast<double>(1 + non_neighbors_above);
        ++pairs;
      } else {
        ++non_neighbors_above;
      }
    }
  }
  return pairs ? total / static_cast<double>(pairs) : 0.0;
}

std::vector<std::vector<std::size_t>> all_rankings(const Tensor& weights) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < weights.rows(); ++i) out.push_back(rank_neighbors(weights, i));
  return out;
}

}  // namespace

std::vector<std::size_t> rank_neighbors(const Tensor& weights, std::size_t node) {
  const auto n = weights.rows();
  if (weights.rank() != 2 || weights.cols() != n) throw ShapeError("rank_neighbors", "weights must be square");
  if (node >= n) throw std::out_of_range("rank_neighbors: node out of range");
  const double self = weights.at(node, node);
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < n; ++j) {
    if (j != node) order.push_back(j);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return weights.at(node, a) / self > weights.at(node, b) / self;
  });
  return order;
}

double neighbor_rank_score(const Tensor& weights, const Tensor& adjacency) {
  check_square("neighbor_rank_score", weights, adjacency);
  return score_with(weights, all_rankings(weights), adjacency);
}

NeighborRankReport neighbor_rank_report(std::span<const Tensor> weights, const Tensor& adjacency,
                                        std::span<const std::pair<double, double>> coordinates) {
  if (weights.empty()) throw std::invalid_argument("neighbor_rank_report: no weight matrices");
  const auto n = adjacency.rows();
  if (!coordinates.empty() && coordinates.size() != n) {
    throw ShapeError("neighbor_rank_report", fmt::format("{} coordinates for {} nodes", coordinates.size(), n));
  }
  NeighborRankReport out;
  out.mean_weight_by_rank.assign(n - 1, 0.0);
  if (!coordinates.empty()) out.mean_distance_by_rank.emplace(n - 1, 0.0);
  for (const auto& w : weights) {
    check_square("neighbor_rank_report", w, adjacency);
    const auto rankings = all_rankings(w);
    out.layer_scores.push_back(score_with(w, rankings, adjacency));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r + 1 < n; ++r) {
        const auto j = rankings[i][r];
        out.mean_weight_by_rank[r] += w.at(i, j) / w.at(i, i);
        if (out.mean_distance_by_rank) {
          (*out.mean_distance_by_rank)[r] += std::hypot(coordinates[i].first - coordinates[j].first,
                                                        coordinates[i].second - coordinates[j].second);
        }
      }
    }
  }
  const double denom = static_cast<double>(weights.size() * n);
  for (auto& v : out.mean_weight_by_rank) v /= denom;
  if (out.mean_distance_by_rank) {
    for (auto& v : *out.mean_distance_by_rank) v /= denom;
  }
  out.score = std::accumulate(out.layer_scores.begin(), out.layer_scores.end(), 0.0) /
              static_cast<double>(out.layer_scores.size());
  return out;
}

PermutationTest permutation_test(std::span<const Tensor> weights, const Tensor& adjacency, std::size_t shuffles,
                                 std::uint64_t seed) {
  if (shuffles == 0) throw std::invalid_argument("permutation_test: need at least one shuffle");
  const auto n = adjacency.rows();
  std::vector<std::vector<std::vector<std::size_t>>> rankings;
  for (const auto& w : weights) {
    check_square("permutation_test", w, adjacency);
    rankings.push_back(all_rankings(w));
  }
  auto mean_score = [&](const Tensor& adj) {
    double total = 0.0;
    for (std::size_t m = 0; m < weights.size(); ++m) total += score_with(weights[m], rankings[m], adj);
    return total / static_cast<double>(weights.size());
  };

  PermutationTest out;
  out.observed = mean_score(adjacency);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto shuffled = Tensor::zeros({n, n});
  for (std::size_t s = 0; s < shuffles; ++s) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) shuffled.at(i, j) = adjacency.at(perm[i], perm[j]);
    }
    out.null_scores.push_back(mean_score(shuffled));
  }
  auto sorted = out.null_scores;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
  out.null_p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
  return out;
}

}  // namespace fcgaga
