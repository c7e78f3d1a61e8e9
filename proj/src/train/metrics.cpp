#include <fmt/format.h>

#include <cmath>

#include "fcgaga/graph.hpp"
#include "fcgaga/model.hpp"
#include "fcgaga/ops.hpp"
#include "fcgaga/train.hpp"

namespace fcgaga {

const HorizonMetrics& MetricsReport::at_horizon(std::size_t horizon) const {
  for (const auto& h : horizons) {
    if (h.horizon == horizon) return h;
  }
  throw std::out_of_range(fmt::format("metrics report has no horizon {}", horizon));
}

const HorizonMetrics* MetricsReport::find(std::size_t horizon) const {
  for (const auto& h : horizons) {
    if (h.horizon == horizon) return &h;
  }
  return nullptr;
}

std::vector<std::size_t> default_horizons(std::size_t horizon) {
  std::vector<std::size_t> out;
  for (std::size_t h : {3, 6, 12}) {
    if (h <= horizon) out.push_back(h);
  }
  if (out.empty()) out.push_back(horizon);
  return out;
}

std::string horizon_label(std::size_t horizon) {
  return fmt::format("{} min", horizon * static_cast<std::size_t>(kPanelStepSeconds / 60));
}

MetricAccumulator::MetricAccumulator(std::size_t horizon)
    : horizon_(horizon), abs_sum_(horizon), ape_sum_(horizon), sq_sum_(horizon), count_(horizon) {}

void MetricAccumulator::add(const Tensor& forecast, const Tensor& target) {
  if (forecast.shape() != target.shape() || target.cols() != horizon_) {
    throw ShapeError("MetricAccumulator::add", forecast.shape(), target.shape());
  }
  NoGradGuard no_grad;
  std::vector<double> mask_values(target.numel()), inv_target(target.numel());
  const auto y = target.values();
  for (std::size_t k = 0; k < y.size(); ++k) {
    const bool keep = std::abs(y[k]) > kMaskThreshold;
    mask_values[k] = keep ? 1.0 : 0.0;
    inv_target[k] = keep ? 1.0 / std::abs(y[k]) : 0.0;
  }
  const Tensor mask(target.shape(), std::move(mask_values));
  const Tensor inv(target.shape(), std::move(inv_target));
  const auto err = abs(sub(forecast, target));
  const auto abs_cols = sum(mul(err, mask), 0);
  const auto ape_cols = sum(mul(err, inv), 0);
  const auto sq_cols = sum(mul(mul(err, err), mask), 0);
  const auto count_cols = sum(mask, 0);
  for (std::size_t h = 0; h < horizon_; ++h) {
    abs_sum_[h] += abs_cols.values()[h];
    ape_sum_[h] += ape_cols.values()[h];
    sq_sum_[h] += sq_cols.values()[h];
    count_[h] += static_cast<std::size_t>(std::llround(count_cols.values()[h]));
  }
  samples_ += target.rows();
}

MetricsReport MetricAccumulator::report(const std::vector<std::size_t>& horizons) const {
  MetricsReport out;
  out.samples = samples_;
  for (auto h : horizons) {
    if (h == 0 || h > horizon_) throw std::out_of_range(fmt::format("horizon {} outside 1..{}", h, horizon_));
    HorizonMetrics m;
    m.horizon = h;
    m.count = count_[h - 1];
    if (m.count > 0) {
      const auto n = static_cast<double>(m.count);
      m.mae = abs_sum_[h - 1] / n;
      m.mape_pct = 100.0 * ape_sum_[h - 1] / n;
      m.rmse = std::sqrt(sq_sum_[h - 1] / n);
    }
    out.horizons.push_back(m);
  }
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t h = 0; h < horizon_; ++h) {
    if (count_[h] == 0) continue;
    total += abs_sum_[h] / static_cast<double>(count_[h]);
    ++defined;
  }
  if (defined > 0) out.mean_mae = total / static_cast<double>(defined);
  return out;
}

MetricsReport evaluate(const Forecaster& forecaster, const SpeedPanel& panel, StepRange range,
                       const EvalOptions& options) {
  NoGradGuard no_grad;
  MetricAccumulator acc(options.window.horizon);
  EvalIterator it(panel, range, options.window, options.time_features, options.batch_size);
  while (auto batch = it.next()) acc.add(forecaster(*batch), batch->target);
  return acc.report(options.horizons);
}

Tensor forecast_batch(const ModelParams& params, const ModelConfig& config, const WindowBatch& batch) {
  return model_forward(batch.history, batch.input_time_features, params, config).forecast;
}

MetricsReport evaluate(const ModelParams& params, const ModelConfig& config, const SpeedPanel& panel, StepRange range,
                       std::vector<std::size_t> horizons, std::size_t batch_size) {
  if (panel.num_nodes() != config.num_nodes) {
    throw ConfigError(fmt::format("panel has {} nodes, model expects {}", panel.num_nodes(), config.num_nodes));
  }
  if (horizons.empty()) horizons = default_horizons(config.horizon);
  EvalOptions options{{config.history, config.horizon}, config.time_features, std::move(horizons), batch_size};
  return evaluate([&](const WindowBatch& b) { return forecast_batch(params, config, b); }, panel, range, options);
}

}  // namespace fcgaga
