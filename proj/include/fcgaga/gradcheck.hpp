#pragma once

#include <functional>

#include "fcgaga/tensor.hpp"

namespace fcgaga {

/// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every
/// coordinate of `point`. `f` receives a perturbed copy and must be
/// deterministic. Throws NumericError naming the coordinate when f returns
/// a non-finite value.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& point, double h);

/// Same estimate, but perturbs `param` in place (restoring it afterwards)
/// and calls a nullary objective. Used to check parameters that live inside
/// a larger model.
Tensor finite_difference_gradient_inplace(const std::function<double()>& f, Tensor& param, double h);

/// |a - b| / max(|a|, |b|, floor)
double relative_error(double a, double b, double floor);

}  // namespace fcgaga
