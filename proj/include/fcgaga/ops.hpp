#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcgaga/tensor.hpp"

// Differentiable primitives. Every function records itself on the current
// graph when gradients are enabled and any operand requires_grad, and bumps
// the thread's FlopCounter by its forward cost.
//
// Binary elementwise ops broadcast in two dimensions: each operand may be
// m x n, 1 x n, m x 1 or 1 x 1 as long as the non-unit extents agree.

namespace fcgaga {

enum class ExpOverflow {
  kError,     // throw NumericError on a non-finite result
  kSaturate,  // clamp to the largest finite double and log a warning
};

/// (m x k)(k x n) -> m x n
Tensor matmul(const Tensor& a, const Tensor& b);
/// m x n -> n x m
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// a / b where divisor magnitudes below `floor` are replaced by +-floor
/// (sign preserved, zero treated as positive). Clamped divisors receive no
/// gradient.
Tensor div(const Tensor& a, const Tensor& b, double floor);

Tensor relu(const Tensor& x);  // subgradient 0 at 0
Tensor exp(const Tensor& x, ExpOverflow policy = ExpOverflow::kError);
Tensor scale(const Tensor& x, double factor);
Tensor abs(const Tensor& x);  // subgradient 0 at 0
Tensor sqrt(const Tensor& x);  // requires x >= 0

/// m x n -> m x 1, gradient routed to the first maximal entry of each row.
Tensor row_max(const Tensor& x);
/// Sum of all entries -> scalar.
Tensor sum(const Tensor& x);
/// axis 0: m x n -> 1 x n; axis 1: m x n -> m x 1.
Tensor sum(const Tensor& x, std::size_t axis);

/// axis 0 stacks rows, axis 1 stacks columns.
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
/// Expands a 1 x n, m x 1 or 1 x 1 operand to rows x cols.
Tensor broadcast_to(const Tensor& x, std::size_t rows, std::size_t cols);
Tensor reshape(const Tensor& x, Shape shape);
/// m x n -> m x (n * times); output column j * times + r is input column j.
Tensor repeat_columns(const Tensor& x, std::size_t times);
/// Rows [begin, end).
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
/// Columns [begin, end).
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
/// Entries below `threshold` become `replacement` (no gradient there).
Tensor floor_substitute(const Tensor& x, double threshold, double replacement);

}  // namespace fcgaga
