#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcgaga/config.hpp"
#include "fcgaga/tensor.hpp"

namespace fcgaga {

/// Sampling interval of the traffic panels, in seconds.
inline constexpr std::int64_t kPanelStepSeconds = 300;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// T x N speed readings at a uniform 5-minute cadence. Zero marks a missing
/// reading.
struct SpeedPanel {
  std::vector<std::string> node_ids;
  std::vector<std::int64_t> timestamps;  // seconds since 1970-01-01, naive local time
  std::vector<double> values;            // row-major T x N

  std::size_t num_nodes() const { return node_ids.size(); }
  std::size_t num_steps() const { return timestamps.size(); }
  double at(std::size_t step, std::size_t node) const { return values[step * num_nodes() + node]; }

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  friend bool operator==(const SpeedPanel&, const SpeedPanel&) = default;
};

enum class PanelFormat { kCsv, kBinaryCache };
PanelFormat parse_panel_format(std::string_view name);

/// CSV: header "timestamp,<node id>,...", then one ISO-8601 timestamp and
/// N speeds per row.
SpeedPanel load_panel(const std::filesystem::path& path, PanelFormat format);
SpeedPanel parse_panel_csv(std::string_view text, const std::string& source = "<memory>");
void save_panel_csv(const SpeedPanel& panel, const std::filesystem::path& path);
void save_panel_cache(const SpeedPanel& panel, const std::filesystem::path& path);

/// "YYYY-MM-DD HH:MM[:SS]" or with a 'T' separator.
std::optional<std::int64_t> parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t seconds);

struct SplitSpec {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

/// Half-open step range [begin, end).
struct StepRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const StepRange&, const StepRange&) = default;
};

struct WindowSpec {
  std::size_t history = 12;
  std::size_t horizon = 12;
};

struct Splits {
  StepRange train, validation, test;
};

/// Chronological split with boundaries floor(train*T) and
/// floor((train+validation)*T). Throws std::invalid_argument when a split
/// cannot hold a single window (training: whole window inside; evaluation:
/// targets inside, history may reach back).
Splits split(std::size_t num_steps, const SplitSpec& spec, WindowSpec window = {1, 1});

/// Time-of-day in [0, 1) followed by an optional Monday-first day-of-week
/// one-hot.
std::vector<double> time_features(std::int64_t timestamp, const TimeFeatureSpec& spec);

/// Training anchors: the full window [t-w+1, t+H] lies inside the range.
std::vector<std::size_t> training_anchors(StepRange range, WindowSpec window);
/// Evaluation anchors: targets [t+1, t+H] inside the range, history inside
/// the panel.
std::vector<std::size_t> evaluation_anchors(StepRange range, WindowSpec window);

/// Histories and targets for a set of anchors, B windows stacked by rows.
struct WindowBatch {
  Tensor history;               // (B*N) x w
  Tensor target;                // (B*N) x H
  Tensor input_time_features;   // (B*N) x time_dim at the anchor; undefined if time_dim == 0
  Tensor output_time_features;  // (B*N) x time_dim at the first target step
  std::vector<std::size_t> anchors;
};

WindowBatch make_batch(const SpeedPanel& panel, std::span<const std::size_t> anchors, WindowSpec window,
                       const TimeFeatureSpec& time_spec);

/// Randomized training stream: each batch draws `batch_size` anchors
/// uniformly with replacement; every anchor contributes all N nodes.
class BatchSampler {
 public:
  BatchSampler(const SpeedPanel& panel, StepRange range, WindowSpec window, TimeFeatureSpec time_spec,
               std::uint64_t seed);

  WindowBatch next(std::size_t batch_size);
  /// batches_per_epoch consecutive batches.
  std::vector<WindowBatch> sample_epoch(std::size_t batches_per_epoch, std::size_t batch_size);
  const std::vector<std::size_t>& anchors() const { return anchors_; }

 private:
  const SpeedPanel& panel_;
  WindowSpec window_;
  TimeFeatureSpec time_spec_;
  std::vector<std::size_t> anchors_;
  std::mt19937_64 rng_;
};

/// Exhaustive, in-order iteration over every evaluation anchor of a range.
class EvalIterator {
 public:
  EvalIterator(const SpeedPanel& panel, StepRange range, WindowSpec window, TimeFeatureSpec time_spec,
               std::size_t batch_size);

  /// Next batch, or nullopt once every anchor has been visited.
  std::optional<WindowBatch> next();
  std::size_t num_anchors() const { return anchors_.size(); }

 private:
  const SpeedPanel& panel_;
  WindowSpec window_;
  TimeFeatureSpec time_spec_;
  std::size_t batch_size_;
  std::vector<std::size_t> anchors_;
  std::size_t position_ = 0;
};

}  // namespace fcgaga
