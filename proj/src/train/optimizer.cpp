#include <fmt/format.h>

#include <cmath>

#include "fcgaga/train.hpp"

namespace fcgaga {

Adam::Adam(std::vector<NamedParam> params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    state_.first_moment.emplace_back(p.tensor.numel(), 0.0);
    state_.second_moment.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    if (p.tensor.has_grad() && !all_finite(p.tensor.grad())) {
      throw NumericError(fmt::format("adam: non-finite gradient in parameter '{}'", p.name));
    }
  }
  ++state_.step;
  const auto t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(options_.beta1, t);
  const double c2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& tensor = params_[i].tensor;
    if (!tensor.has_grad()) continue;
    const auto g = tensor.grad();
    auto values = tensor.data();
    auto& m = state_.first_moment[i];
    auto& v = state_.second_moment[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * g[k];
      v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      values[k] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::load_state(AdamState state) {
  if (state.first_moment.size() != params_.size() || state.second_moment.size() != params_.size()) {
    throw std::invalid_argument(fmt::format("adam state holds {} slots for {} parameters", state.first_moment.size(),
                                            params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto n = params_[i].tensor.numel();
    if (state.first_moment[i].size() != n || state.second_moment[i].size() != n) {
      throw std::invalid_argument(fmt::format("adam state for '{}' has the wrong size", params_[i].name));
    }
  }
  state_ = std::move(state);
}

double LrSchedule::at(std::size_t epoch) const {
  if (epoch == 0) throw std::invalid_argument("lr schedule epochs are 1-based");
  if (anneal_every == 0) throw std::invalid_argument("lr schedule anneal period must be positive");
  if (epoch < anneal_start) return initial;
  const auto halvings = 1 + (epoch - anneal_start) / anneal_every;
  return std::ldexp(initial, -static_cast<int>(halvings));
}

}  // namespace fcgaga
