#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fcgaga/gradcheck.hpp"
#include "fcgaga/graph.hpp"
#include "fcgaga/tensor.hpp"

namespace testutil {

inline fcgaga::Tensor random_tensor(fcgaga::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = true) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(fcgaga::numel(shape));
  for (auto& x : v) x = u(rng);
  return fcgaga::Tensor(std::move(shape), std::move(v), requires_grad);
}

/// Largest relative error between backward() and central differences over
/// every coordinate of every tensor in `params`.
inline double max_grad_error(const std::function<fcgaga::Tensor()>& loss, std::vector<fcgaga::Tensor> params,
                             double h = 1e-6, double floor = 1e-6) {
  for (auto& p : params) p.zero_grad();
  {
    fcgaga::GraphScope scope;
    fcgaga::backward(loss());
  }
  double worst = 0.0;
  for (auto& p : params) {
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    const auto numeric = fcgaga::finite_difference_gradient_inplace(
        [&] {
          fcgaga::NoGradGuard guard;
          return loss().item();
        },
        p, h);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      worst = std::max(worst, fcgaga::relative_error(analytic[i], numeric.values()[i], floor));
    }
  }
  return worst;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fcgaga_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
