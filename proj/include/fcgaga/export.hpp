#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcgaga/data.hpp"
#include "fcgaga/model.hpp"
#include "fcgaga/synth.hpp"

namespace fcgaga {

/// Square matrix with node ids as row and column labels.
void write_matrix_csv(const Tensor& matrix, std::span<const std::string> node_ids, const std::filesystem::path& path);

/// One row per (layer, node, rank): neighbor id, W[i, j] and W[i, j] / W[i, i].
void write_neighbor_rankings(std::span<const Tensor> weights, std::span<const std::string> node_ids,
                             const std::filesystem::path& path);

/// Rank-wise means of a NeighborRankReport plus the per-layer scores.
void write_rank_report(const NeighborRankReport& report, const std::filesystem::path& path);

/// Per (anchor, node, step): each layer's contribution (already scaled by
/// 1/M), their sum as the forecast, and the target.
void write_decomposition(const ModelOutput& output, const WindowBatch& batch, const SpeedPanel& panel,
                         const std::filesystem::path& path);

/// Reads a square CSV written by write_matrix_csv.
Tensor read_matrix_csv(const std::filesystem::path& path);

}  // namespace fcgaga
