#include "fcgaga/export.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace fcgaga {
namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_matrix_csv(const Tensor& matrix, std::span<const std::string> node_ids, const std::filesystem::path& path) {
  const auto n = node_ids.size();
  if (matrix.rank() != 2 || matrix.rows() != n || matrix.cols() != n) {
    throw ShapeError("write_matrix_csv", fmt::format("{} matrix for {} node ids", to_string(matrix.shape()), n));
  }
  auto out = open_csv(path);
  out << "node";
  for (const auto& id : node_ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < n; ++i) {
    out << node_ids[i];
    for (std::size_t j = 0; j < n; ++j) out << ',' << fmt::format("{}", matrix.at(i, j));
    out << '\n';
  }
}

Tensor read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    auto& row = rows.emplace_back();
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(path.string(), line_no, fmt::format("non-numeric cell '{}'", cell));
      }
    }
  }
  const auto n = rows.size();
  if (n == 0) throw ParseError(path.string(), 0, "empty matrix");
  std::vector<double> values;
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw ParseError(path.string(), i + 2, "matrix is not square");
    values.insert(values.end(), rows[i].begin(), rows[i].end());
  }
  return Tensor({n, n}, std::move(values));
}

void write_neighbor_rankings(std::span<const Tensor> weights, std::span<const std::string> node_ids,
                             const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "layer,node,rank,neighbor,weight,normalized_weight\n";
  for (std::size_t m = 0; m < weights.size(); ++m) {
    const auto& w = weights[m];
    if (w.rows() != node_ids.size()) throw ShapeError("write_neighbor_rankings", w.shape(), {node_ids.size()});
    for (std::size_t i = 0; i < node_ids.size(); ++i) {
      const auto order = rank_neighbors(w, i);
      for (std::size_t r = 0; r < order.size(); ++r) {
        const auto j = order[r];
        out << fmt::format("{},{},{},{},{},{}\n", m + 1, node_ids[i], r + 1, node_ids[j], w.at(i, j),
                           w.at(i, j) / w.at(i, i));
      }
    }
  }
}

void write_rank_report(const NeighborRankReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "rank,mean_normalized_weight,mean_distance\n";
  for (std::size_t r = 0; r < report.mean_weight_by_rank.size(); ++r) {
    out << fmt::format("{},{},{}\n", r + 1, report.mean_weight_by_rank[r],
                       report.mean_distance_by_rank ? fmt::format("{}", (*report.mean_distance_by_rank)[r]) : "");
  }
  out << "\nlayer,score\n";
  for (std::size_t m = 0; m < report.layer_scores.size(); ++m) out << fmt::format("{},{}\n", m + 1, report.layer_scores[m]);
  out << fmt::format("mean,{}\n", report.score);
}

void write_decomposition(const ModelOutput& output, const WindowBatch& batch, const SpeedPanel& panel,
                         const std::filesystem::path& path) {
  const auto parts = output.contributions();
  const auto n = panel.num_nodes();
  const auto horizon = output.forecast.cols();
  if (output.forecast.rows() != batch.anchors.size() * n || batch.target.shape() != output.forecast.shape()) {
    throw ShapeError("write_decomposition", output.forecast.shape(), batch.target.shape());
  }
  auto out = open_csv(path);
  out << "anchor_time,node,step";
  for (std::size_t m = 0; m < parts.size(); ++m) out << ",layer" << m + 1;
  out << ",forecast,target\n";
  for (std::size_t b = 0; b < batch.anchors.size(); ++b) {
    const auto when = format_timestamp(panel.timestamps[batch.anchors[b]]);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = b * n + i;
      for (std::size_t h = 0; h < horizon; ++h) {
        out << fmt::format("{},{},{}", when, panel.node_ids[i], h + 1);
        for (const auto& p : parts) out << ',' << fmt::format("{}", p.at(row, h));
        out << fmt::format(",{},{}\n", output.forecast.at(row, h), batch.target.at(row, h));
      }
    }
  }
}

}  // namespace fcgaga
