#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcgaga/config.hpp"
#include "fcgaga/data.hpp"
#include "fcgaga/flops.hpp"
#include "fcgaga/params.hpp"
#include "fcgaga/tensor.hpp"

namespace fcgaga {

/// Targets with |y| at or below this are missing readings.
inline constexpr double kMaskThreshold = 1e-6;

/// Mean |y - y_hat| over unmasked entries. A fully masked batch yields 0
/// and logs a warning.
Tensor masked_mae_loss(const Tensor& forecast, const Tensor& target);

/// lambda * sum of squared entries of every kWeight parameter.
Tensor weight_decay_penalty(const ModelParams& params, double lambda);

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam: p -= lr * m_hat / (sqrt(v_hat) + eps).
class Adam {
 public:
  explicit Adam(std::vector<NamedParam> params, AdamOptions options = {});

  /// Applies one update from the parameters' gradients (absent = zero).
  /// Throws NumericError naming the first parameter with a non-finite
  /// gradient; no parameter is modified in that case.
  void step();
  void zero_grad();

  double learning_rate() const { return options_.learning_rate; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const AdamOptions& options() const { return options_; }
  const AdamState& state() const { return state_; }
  /// Throws std::invalid_argument when the shapes do not mirror the parameters.
  void load_state(AdamState state);
  const std::vector<NamedParam>& parameters() const { return params_; }

 private:
  std::vector<NamedParam> params_;
  AdamOptions options_;
  AdamState state_;
};

struct LrSchedule {
  double initial = 1e-3;
  std::size_t anneal_start = 43;
  std::size_t anneal_every = 6;

  /// Learning rate for a 1-based epoch: initial until anneal_start, then
  /// halved at anneal_start and every anneal_every epochs after.
  double at(std::size_t epoch) const;
};

struct HorizonMetrics {
  std::size_t horizon = 0;  // 1-based forecast step
  std::optional<double> mae;
  std::optional<double> mape_pct;
  std::optional<double> rmse;
  std::size_t count = 0;  // unmasked samples at this step
};

struct MetricsReport {
  std::vector<HorizonMetrics> horizons;
  /// Mean of the per-step masked MAE over every forecast step 1..H.
  std::optional<double> mean_mae;
  std::size_t samples = 0;  // anchors x nodes evaluated

  const HorizonMetrics& at_horizon(std::size_t horizon) const;
  const HorizonMetrics* find(std::size_t horizon) const;
};

/// The reported steps 3, 6 and 12 that fit in `horizon`, or just `horizon`
/// when it is shorter than 3.
std::vector<std::size_t> default_horizons(std::size_t horizon);

/// "15 min" for step 3 at 5-minute resolution.
std::string horizon_label(std::size_t horizon);

/// Streaming masked metrics at every forecast step.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::size_t horizon);
  void add(const Tensor& forecast, const Tensor& target);
  MetricsReport report(const std::vector<std::size_t>& horizons) const;

 private:
  std::size_t horizon_;
  std::size_t samples_ = 0;
  std::vector<double> abs_sum_, ape_sum_, sq_sum_;
  std::vector<std::size_t> count_;
};

using Forecaster = std::function<Tensor(const WindowBatch&)>;

struct EvalOptions {
  WindowSpec window;
  TimeFeatureSpec time_features;
  std::vector<std::size_t> horizons{3, 6, 12};
  std::size_t batch_size = 64;
};

/// Exhaustive evaluation over every anchor whose targets fall in `range`.
MetricsReport evaluate(const Forecaster& forecaster, const SpeedPanel& panel, StepRange range,
                       const EvalOptions& options);
/// Convenience overload running the FC-GAGA forward pass without recording.
/// Empty `horizons` means default_horizons(config.horizon).
MetricsReport evaluate(const ModelParams& params, const ModelConfig& config, const SpeedPanel& panel, StepRange range,
                       std::vector<std::size_t> horizons = {}, std::size_t batch_size = 64);

struct TrainOptions {
  std::size_t epochs = 60;
  std::size_t batches_per_epoch = 800;
  std::size_t batch_size = 4;
  double weight_decay = 1e-5;
  LrSchedule schedule;
  std::uint64_t seed = 0;
  SplitSpec split;
  std::size_t eval_batch_size = 64;
  /// Skip per-epoch validation (the log then carries no metrics and the
  /// final parameters are reported as best).
  bool validate = true;
  std::optional<std::filesystem::path> log_path;         // JSONL, one record per epoch
  std::optional<std::filesystem::path> checkpoint_path;  // best-validation checkpoint
  /// Called after every optimizer step with the 1-based step count.
  std::function<void(std::uint64_t step, const ModelParams& params)> on_step;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // mean masked MAE over the epoch's batches
  std::optional<MetricsReport> validation;
  double wall_seconds = 0.0;
  std::uint64_t cumulative_flops = 0;
};

struct TrainResult {
  ModelParams final_params;
  ModelParams best_params;
  std::size_t best_epoch = 0;
  std::optional<double> best_validation_mae;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;  // masked MAE per optimizer step
  std::uint64_t steps = 0;
  FlopCounter forward_flops;
  AdamState optimizer_state;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Masked MAE plus weight decay through Adam under the schedule. Throws
/// TrainingAborted on a non-finite loss; a checkpoint written earlier is
/// left in place.
TrainResult train(const ModelConfig& config, const SpeedPanel& panel, const TrainOptions& options);

/// Forecast for a batch, tracked by the current graph.
Tensor forecast_batch(const ModelParams& params, const ModelConfig& config, const WindowBatch& batch);

/// Independent copy of every parameter tensor.
ModelParams clone_params(const ModelParams& params);

}  // namespace fcgaga
