#include "fcgaga/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fcgaga/graph.hpp"

namespace fcgaga {
namespace {

double checked(double value, std::size_t coordinate, const char* side) {
  if (!std::isfinite(value)) {
    throw NumericError("finite_difference_gradient: non-finite objective at coordinate " +
                       std::to_string(coordinate) + " (" + side + " step)");
  }
  return value;
}

}  // namespace

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& point, double h) {
  Tensor probe = point.detach();
  return finite_difference_gradient_inplace([&] { return f(probe); }, probe, h);
}

Tensor finite_difference_gradient_inplace(const std::function<double()>& f, Tensor& param, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_gradient: step must be positive");
  NoGradGuard no_grad;
  auto values = param.data();
  std::vector<double> estimate(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double original = values[i];
    values[i] = original + h;
    const double plus = checked(f(), i, "forward");
    values[i] = original - h;
    const double minus = checked(f(), i, "backward");
    values[i] = original;
    estimate[i] = (plus - minus) / (2.0 * h);
  }
  return Tensor(param.shape(), std::move(estimate));
}

double relative_error(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

}  // namespace fcgaga
