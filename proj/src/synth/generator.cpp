#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fcgaga/synth.hpp"

namespace fcgaga {

void SynthConfig::validate() const {
  if (num_nodes < 2) throw std::invalid_argument("synth: need at least 2 nodes");
  if (num_steps == 0 || period == 0) throw std::invalid_argument("synth: num_steps and period must be positive");
  if (!adjacency && (ring_neighbors == 0 || 2 * ring_neighbors > num_nodes)) {
    throw std::invalid_argument(
        fmt::format("synth: ring_neighbors must be in 1..{} for {} nodes", num_nodes / 2, num_nodes));
  }
  if (adjacency) {
    if (adjacency->size() != num_nodes * num_nodes) throw std::invalid_argument("synth: adjacency must be N x N");
    for (std::size_t i = 0; i < num_nodes; ++i) {
      if ((*adjacency)[i * num_nodes + i] != 0.0) throw std::invalid_argument("synth: adjacency must be hollow");
      std::size_t degree = 0;
      for (std::size_t j = 0; j < num_nodes; ++j) degree += (*adjacency)[i * num_nodes + j] != 0.0;
      if (degree == 0) throw std::invalid_argument(fmt::format("synth: node {} has no neighbor", i));
    }
  }
  for (double v : {baseline_min, seasonal_amplitude, coupling, noise, event_rate, event_depth, event_decay}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("synth: scales must be finite and >= 0");
  }
  if (baseline_max < baseline_min) throw std::invalid_argument("synth: baseline_max < baseline_min");
  if (event_rate > 1.0 || event_decay >= 1.0) throw std::invalid_argument("synth: event_rate <= 1, event_decay < 1");
}

namespace {

std::vector<std::size_t> cycle_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

Tensor planted_cycle(std::size_t num_nodes, std::size_t ring_neighbors, std::uint64_t seed) {
  const auto order = cycle_order(num_nodes, seed);
  auto adj = Tensor::zeros({num_nodes, num_nodes});
  for (std::size_t p = 0; p < num_nodes; ++p) {
    for (std::size_t k = 1; k <= ring_neighbors; ++k) {
      const auto a = order[p];
      const auto b = order[(p + k) % num_nodes];
      adj.at(a, b) = 1.0;
      adj.at(b, a) = 1.0;
    }
  }
  return adj;
}

SynthData generate(const SynthConfig& config) {
  config.validate();
  const auto n = config.num_nodes;
  const auto t_steps = config.num_steps;
  std::mt19937_64 rng(config.seed);

  SynthData out;
  const auto topology_seed = rng();
  out.adjacency = config.adjacency ? Tensor({n, n}, *config.adjacency) : planted_cycle(n, config.ring_neighbors, topology_seed);
  const auto order = cycle_order(n, topology_seed);
  out.coordinates.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(p) / static_cast<double>(n);
    out.coordinates[order[p]] = {std::cos(angle), std::sin(angle)};
  }

  std::uniform_real_distribution<double> baseline_dist(config.baseline_min, config.baseline_max);
  std::vector<double> baseline(n);
  for (auto& b : baseline) b = baseline_dist(rng);

  std::vector<double> seasonal(config.period);
  for (std::size_t p = 0; p < config.period; ++p) {
    const double phase = static_cast<double>(p) / static_cast<double>(config.period);
    seasonal[p] = config.seasonal_amplitude * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * phase));
  }

  std::bernoulli_distribution event(config.event_rate);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> congestion(t_steps * n, 0.0);
  for (std::size_t t = 0; t < t_steps; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      const double carried = t > 0 ? config.event_decay * congestion[(t - 1) * n + j] : 0.0;
      congestion[t * n + j] = carried + (event(rng) ? config.event_depth : 0.0);
    }
  }

  auto& panel = out.panel;
  panel.node_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) panel.node_ids[i] = fmt::format("node{}", i);
  panel.timestamps.resize(t_steps);
  panel.values.resize(t_steps * n);
  for (std::size_t t = 0; t < t_steps; ++t) {
    panel.timestamps[t] = config.start_timestamp + static_cast<std::int64_t>(t) * kPanelStepSeconds;
    for (std::size_t i = 0; i < n; ++i) {
      double v = baseline[i] - seasonal[t % config.period] - congestion[t * n + i];
      if (t >= config.lag) {
        double coupled = 0.0;
        for (std::size_t j = 0; j < n; ++j) coupled += out.adjacency.at(i, j) * congestion[(t - config.lag) * n + j];
        v -= config.coupling * coupled;
      }
      if (config.noise > 0.0) v += config.noise * noise(rng);
      panel.values[t * n + i] = std::max(v, 0.0);
    }
  }
  return out;
}

double lagged_cross_correlation(const SpeedPanel& panel, std::size_t i, std::size_t j, std::size_t lag) {
  const auto n = panel.num_nodes();
  if (i >= n || j >= n) throw std::out_of_range("lagged_cross_correlation: node index out of range");
  if (lag + 2 > panel.num_steps()) throw std::invalid_argument("lagged_cross_correlation: lag leaves < 2 pairs");
  const auto count = panel.num_steps() - lag;
  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    mx += panel.at(t, j);
    my += panel.at(t + lag, i);
  }
  mx /= static_cast<double>(count);
  my /= static_cast<double>(count);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    const double dx = panel.at(t, j) - mx;
    const double dy = panel.at(t + lag, i) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace fcgaga
