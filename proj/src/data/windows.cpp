#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "fcgaga/data.hpp"

namespace fcgaga {

Splits split(std::size_t num_steps, const SplitSpec& spec, WindowSpec window) {
  const std::array<double, 3> fractions{spec.train, spec.validation, spec.test};
  for (double f : fractions) {
    if (!(f > 0.0)) throw std::invalid_argument(fmt::format("split fractions must be positive, got {}", f));
  }
  const double total = spec.train + spec.validation + spec.test;
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument(fmt::format("split fractions sum to {}, not 1", total));
  if (window.history == 0 || window.horizon == 0) throw std::invalid_argument("window lengths must be positive");

  const double t = static_cast<double>(num_steps);
  const auto b1 = static_cast<std::size_t>(std::floor(spec.train * t + 1e-9));
  const auto b2 = static_cast<std::size_t>(std::floor((spec.train + spec.validation) * t + 1e-9));
  Splits s{{0, b1}, {b1, b2}, {b2, num_steps}};

  if (training_anchors(s.train, window).empty()) {
    throw std::invalid_argument(fmt::format("T={} leaves no training window of {}+{} steps in [0,{})", num_steps,
                                            window.history, window.horizon, b1));
  }
  for (const auto& [name, range] : {std::pair{"validation", s.validation}, std::pair{"test", s.test}}) {
    if (evaluation_anchors(range, window).empty()) {
      throw std::invalid_argument(fmt::format("T={} leaves no {} window with a {}-step horizon in [{},{})", num_steps,
                                              name, window.horizon, range.begin, range.end));
    }
  }
  return s;
}

std::vector<double> time_features(std::int64_t timestamp, const TimeFeatureSpec& spec) {
  std::vector<double> out;
  out.reserve(spec.dim());
  const std::int64_t seconds_of_day = ((timestamp % 86400) + 86400) % 86400;
  if (spec.time_of_day) out.push_back(static_cast<double>(seconds_of_day) / 86400.0);
  if (spec.day_of_week) {
    using namespace std::chrono;
    const auto day = floor<days>(sys_seconds{seconds{timestamp}});
    const auto monday_index = weekday{day}.iso_encoding() - 1;
    for (unsigned k = 0; k < 7; ++k) out.push_back(k == monday_index ? 1.0 : 0.0);
  }
  return out;
}

std::vector<std::size_t> training_anchors(StepRange range, WindowSpec window) {
  std::vector<std::size_t> out;
  const auto w = window.history;
  const auto h = window.horizon;
  if (range.end < range.begin + w + h) return out;
  for (std::size_t t = range.begin + w - 1; t + h < range.end; ++t) out.push_back(t);
  return out;
}

std::vector<std::size_t> evaluation_anchors(StepRange range, WindowSpec window) {
  std::vector<std::size_t> out;
  const auto w = window.history;
  const auto h = window.horizon;
  const std::size_t first = std::max(range.begin == 0 ? std::size_t{0} : range.begin - 1, w - 1);
  for (std::size_t t = first; t + h < range.end; ++t) out.push_back(t);
  return out;
}

WindowBatch make_batch(const SpeedPanel& panel, std::span<const std::size_t> anchors, WindowSpec window,
                       const TimeFeatureSpec& time_spec) {
  if (anchors.empty()) throw std::invalid_argument("make_batch: no anchors");
  const auto n = panel.num_nodes();
  const auto w = window.history;
  const auto h = window.horizon;
  const auto tdim = time_spec.dim();
  const auto rows = anchors.size() * n;
  std::vector<double> history(rows * w), target(rows * h), tin(rows * tdim), tout(rows * tdim);
  for (std::size_t b = 0; b < anchors.size(); ++b) {
    const auto t = anchors[b];
    if (t + 1 < w || t + h >= panel.num_steps()) {
      throw std::out_of_range(fmt::format("make_batch: anchor {} does not fit a {}+{} window in {} steps", t, w, h,
                                          panel.num_steps()));
    }
    const auto fin = time_features(panel.timestamps[t], time_spec);
    const auto fout = time_features(panel.timestamps[t + 1], time_spec);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = b * n + i;
      for (std::size_t k = 0; k < w; ++k) history[row * w + k] = panel.at(t + 1 - w + k, i);
      for (std::size_t k = 0; k < h; ++k) target[row * h + k] = panel.at(t + 1 + k, i);
      std::copy(fin.begin(), fin.end(), tin.begin() + static_cast<std::ptrdiff_t>(row * tdim));
      std::copy(fout.begin(), fout.end(), tout.begin() + static_cast<std::ptrdiff_t>(row * tdim));
    }
  }
  WindowBatch batch;
  batch.history = Tensor({rows, w}, std::move(history));
  batch.target = Tensor({rows, h}, std::move(target));
  if (tdim > 0) {
    batch.input_time_features = Tensor({rows, tdim}, std::move(tin));
    batch.output_time_features = Tensor({rows, tdim}, std::move(tout));
  }
  batch.anchors.assign(anchors.begin(), anchors.end());
  return batch;
}

BatchSampler::BatchSampler(const SpeedPanel& panel, StepRange range, WindowSpec window, TimeFeatureSpec time_spec,
                           std::uint64_t seed)
    : panel_(panel), window_(window), time_spec_(time_spec), anchors_(training_anchors(range, window)), rng_(seed) {
  if (range.end > panel.num_steps()) throw std::out_of_range("BatchSampler: range exceeds panel");
  if (anchors_.empty()) {
    throw std::invalid_argument(fmt::format("BatchSampler: range [{},{}) holds no {}+{} training window", range.begin,
                                            range.end, window.history, window.horizon));
  }
}

WindowBatch BatchSampler::next(std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("BatchSampler: batch size must be positive");
  std::uniform_int_distribution<std::size_t> pick(0, anchors_.size() - 1);
  std::vector<std::size_t> chosen(batch_size);
  for (auto& a : chosen) a = anchors_[pick(rng_)];
  return make_batch(panel_, chosen, window_, time_spec_);
}

std::vector<WindowBatch> BatchSampler::sample_epoch(std::size_t batches_per_epoch, std::size_t batch_size) {
  std::vector<WindowBatch> out;
  out.reserve(batches_per_epoch);
  for (std::size_t k = 0; k < batches_per_epoch; ++k) out.push_back(next(batch_size));
  return out;
}

EvalIterator::EvalIterator(const SpeedPanel& panel, StepRange range, WindowSpec window, TimeFeatureSpec time_spec,
                           std::size_t batch_size)
    : panel_(panel),
      window_(window),
      time_spec_(time_spec),
      batch_size_(batch_size),
      anchors_(evaluation_anchors(range, window)) {
  if (batch_size == 0) throw std::invalid_argument("EvalIterator: batch size must be positive");
  if (range.end > panel.num_steps()) throw std::out_of_range("EvalIterator: range exceeds panel");
}

std::optional<WindowBatch> EvalIterator::next() {
  if (position_ >= anchors_.size()) return std::nullopt;
  const auto count = std::min(batch_size_, anchors_.size() - position_);
  auto batch = make_batch(panel_, std::span(anchors_).subspan(position_, count), window_, time_spec_);
  position_ += count;
  return batch;
}

}  // namespace fcgaga
