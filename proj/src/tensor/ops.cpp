#include "fcgaga/ops.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "fcgaga/flops.hpp"
#include "fcgaga/graph.hpp"

namespace fcgaga {

FlopCounter& flop_counter() {
  thread_local FlopCounter counter;
  return counter;
}

namespace {

bool tracks(const Tensor& a) { return grad_enabled() && a.requires_grad(); }
bool tracks(const Tensor& a, const Tensor& b) { return grad_enabled() && (a.requires_grad() || b.requires_grad()); }

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() > 2) throw ShapeError(op, "expected rank <= 2, got " + to_string(t.shape()));
}

Tensor finish(const char* op, Shape shape, std::vector<double> values, bool track) {
  if (!all_finite(values)) throw NumericError(std::string(op) + ": non-finite result");
  return Tensor(std::move(shape), std::move(values), track);
}

void record(const char* op, std::vector<Tensor> inputs, const Tensor& output, std::function<void()> backward) {
  current_graph().record(GraphEntry{op, std::move(inputs), output, std::move(backward)});
}

// C(m x n) += A(m x k) B(k x n)
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C(m x k) += G(m x n) B(k x n)^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// C(k x n) += A(m x k)^T G(m x n)
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * grow[j];
    }
  }
}

struct Broadcast {
  std::size_t rows, cols;
  std::size_t a_rows, a_cols, b_rows, b_cols;
  Shape shape;

  std::size_t index_a(std::size_t i, std::size_t j) const {
    return (a_rows == 1 ? 0 : i) * a_cols + (a_cols == 1 ? 0 : j);
  }
  std::size_t index_b(std::size_t i, std::size_t j) const {
    return (b_rows == 1 ? 0 : i) * b_cols + (b_cols == 1 ? 0 : j);
  }
};

std::size_t broadcast_extent(const char* op, const Tensor& a, const Tensor& b, std::size_t x, std::size_t y) {
  if (x == y || y == 1) return x;
  if (x == 1) return y;
  throw ShapeError(op, a.shape(), b.shape());
}

Broadcast broadcast_shapes(const char* op, const Tensor& a, const Tensor& b) {
  require_matrix(op, a);
  require_matrix(op, b);
  Broadcast bc{};
  bc.a_rows = a.rows();
  bc.a_cols = a.cols();
  bc.b_rows = b.rows();
  bc.b_cols = b.cols();
  bc.rows = broadcast_extent(op, a, b, bc.a_rows, bc.b_rows);
  bc.cols = broadcast_extent(op, a, b, bc.a_cols, bc.b_cols);
  bc.shape = a.shape() == b.shape() ? a.shape() : Shape{bc.rows, bc.cols};
  return bc;
}

// f(x, y) -> z; dx(x, y, z) and dy(x, y, z) are the local partials.
template <class F, class DX, class DY>
Tensor binary_op(const char* op, const Tensor& a, const Tensor& b, F f, DX dx, DY dy) {
  const auto bc = broadcast_shapes(op, a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(bc.rows * bc.cols);
  for (std::size_t i = 0; i < bc.rows; ++i) {
    for (std::size_t j = 0; j < bc.cols; ++j) {
      out[i * bc.cols + j] = f(av[bc.index_a(i, j)], bv[bc.index_b(i, j)]);
    }
  }
  flop_counter().elementwise += out.size();
  const bool track = tracks(a, b);
  Tensor result = finish(op, bc.shape, std::move(out), track);
  if (track) {
    record(op, {a, b}, result, [a, b, result, bc, dx, dy]() mutable {
      const auto g = result.grad();
      const auto z = result.values();
      const auto x = a.values();
      const auto y = b.values();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < bc.rows; ++i) {
          for (std::size_t j = 0; j < bc.cols; ++j) {
            const auto k = i * bc.cols + j;
            const auto ia = bc.index_a(i, j);
            ga[ia] += g[k] * dx(x[ia], y[bc.index_b(i, j)], z[k]);
          }
        }
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < bc.rows; ++i) {
          for (std::size_t j = 0; j < bc.cols; ++j) {
            const auto k = i * bc.cols + j;
            const auto ib = bc.index_b(i, j);
            gb[ib] += g[k] * dy(x[bc.index_a(i, j)], y[ib], z[k]);
          }
        }
      }
    });
  }
  return result;
}

// f(x) -> y; d(x, y) is the local derivative.
template <class F, class D>
Tensor unary_op(const char* op, const Tensor& x, F f, D d) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  flop_counter().elementwise += out.size();
  const bool track = tracks(x);
  Tensor result = finish(op, x.shape(), std::move(out), track);
  if (track) {
    record(op, {x}, result, [x, result, d]() mutable {
      const auto g = result.grad();
      const auto y = result.values();
      const auto xs = x.values();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * d(xs[i], y[i]);
    });
  }
  return result;
}

double clamp_divisor(double y, double floor) {
  if (std::abs(y) >= floor) return y;
  return y < 0.0 ? -floor : floor;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) throw ShapeError("matmul", a.shape(), b.shape());
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  flop_counter().matmul += m * n * k;
  const bool track = tracks(a, b);
  Tensor result = finish("matmul", {m, n}, std::move(out), track);
  if (track) {
    record("matmul", {a, b}, result, [a, b, result, m, k, n]() mutable {
      const double* g = result.grad().data();
      if (a.requires_grad()) gemm_nt(g, b.values().data(), a.mutable_grad().data(), m, n, k);
      if (b.requires_grad()) gemm_tn(a.values().data(), g, b.mutable_grad().data(), m, k, n);
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose", "expected a matrix, got " + to_string(a.shape()));
  const auto m = a.rows(), n = a.cols();
  const auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  const bool track = tracks(a);
  Tensor result = finish("transpose", {n, m}, std::move(out), track);
  if (track) {
    record("transpose", {a}, result, [a, result, m, n]() mutable {
      const auto g = result.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b, double floor) {
  if (!(floor >= 0.0)) throw std::invalid_argument("div: floor must be >= 0");
  return binary_op(
      "div", a, b, [floor](double x, double y) { return x / clamp_divisor(y, floor); },
      [floor](double, double y, double) { return 1.0 / clamp_divisor(y, floor); },
      [floor](double x, double y, double) {
        if (std::abs(y) < floor) return 0.0;
        return -x / (y * y);
      });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x, ExpOverflow policy) {
  constexpr double kMax = std::numeric_limits<double>::max();
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  std::size_t saturated = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = std::exp(xv[i]);
    if (!std::isfinite(out[i])) {
      if (policy == ExpOverflow::kError) {
        throw NumericError("exp: overflow at entry " + std::to_string(i) + " (argument " + std::to_string(xv[i]) + ")");
      }
      out[i] = kMax;
      ++saturated;
    }
  }
  if (saturated) spdlog::warn("exp: {} of {} entries saturated at the largest finite value", saturated, out.size());
  flop_counter().elementwise += out.size();
  const bool track = tracks(x);
  Tensor result = finish("exp", x.shape(), std::move(out), track);
  if (track) {
    record("exp", {x}, result, [x, result]() mutable {
      const auto g = result.grad();
      const auto y = result.values();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (y[i] != kMax) gx[i] += g[i] * y[i];
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& x, double factor) {
  return unary_op(
      "scale", x, [factor](double v) { return factor * v; }, [factor](double, double) { return factor; });
}

Tensor abs(const Tensor& x) {
  return unary_op(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.values()) {
    if (v < 0.0) throw NumericError("sqrt: negative argument " + std::to_string(v));
  }
  return unary_op(
      "sqrt", x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor row_max(const Tensor& x) {
  require_matrix("row_max", x);
  const auto m = x.rows(), n = x.cols();
  const auto xv = x.values();
  std::vector<double> out(m);
  std::vector<std::size_t> arg(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (xv[i * n + j] > xv[i * n + best]) best = j;
    }
    arg[i] = best;
    out[i] = xv[i * n + best];
  }
  flop_counter().reduction += m * n;
  const bool track = tracks(x);
  Tensor result = finish("row_max", {m, 1}, std::move(out), track);
  if (track) {
    record("row_max", {x}, result, [x, result, arg = std::move(arg), n]() mutable {
      const auto g = result.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < arg.size(); ++i) gx[i * n + arg[i]] += g[i];
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  flop_counter().reduction += x.numel();
  const bool track = tracks(x);
  Tensor result = finish("sum", {}, {acc}, track);
  if (track) {
    record("sum", {x}, result, [x, result]() mutable {
      const double g = result.grad()[0];
      for (auto& gx : x.mutable_grad()) gx += g;
    });
  }
  return result;
}

Tensor sum(const Tensor& x, std::size_t axis) {
  require_matrix("sum", x);
  if (axis > 1) throw ShapeError("sum", "axis must be 0 or 1");
  const auto m = x.rows(), n = x.cols();
  const auto xv = x.values();
  std::vector<double> out(axis == 0 ? n : m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += xv[i * n + j];
  flop_counter().reduction += m * n;
  const bool track = tracks(x);
  Shape shape = axis == 0 ? Shape{1, n} : Shape{m, 1};
  Tensor result = finish("sum", std::move(shape), std::move(out), track);
  if (track) {
    record("sum", {x}, result, [x, result, m, n, axis]() mutable {
      const auto g = result.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[axis == 0 ? j : i];
    });
  }
  return result;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat", "no operands");
  if (axis > 1) throw ShapeError("concat", "axis must be 0 or 1");
  std::size_t rows = 0, cols = 0;
  bool track = false;
  for (const auto& p : parts) {
    require_matrix("concat", p);
    track = track || tracks(p);
    if (axis == 0) {
      if (cols && p.cols() != cols) throw ShapeError("concat", parts.front().shape(), p.shape());
      cols = p.cols();
      rows += p.rows();
    } else {
      if (rows && p.rows() != rows) throw ShapeError("concat", parts.front().shape(), p.shape());
      rows = p.rows();
      cols += p.cols();
    }
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto pv = p.values();
    const auto pr = p.rows(), pc = p.cols();
    for (std::size_t i = 0; i < pr; ++i)
      for (std::size_t j = 0; j < pc; ++j) {
        const auto dst = axis == 0 ? (offset + i) * cols + j : i * cols + offset + j;
        out[dst] = pv[i * pc + j];
      }
    offset += axis == 0 ? pr : pc;
  }
  Tensor result = finish("concat", {rows, cols}, std::move(out), track);
  if (track) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    record("concat", inputs, result, [inputs, result, axis, cols]() mutable {
      const auto g = result.grad();
      std::size_t off = 0;
      for (auto& p : inputs) {
        const auto pr = p.rows(), pc = p.cols();
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t i = 0; i < pr; ++i)
            for (std::size_t j = 0; j < pc; ++j) {
              const auto src = axis == 0 ? (off + i) * cols + j : i * cols + off + j;
              gp[i * pc + j] += g[src];
            }
        }
        off += axis == 0 ? pr : pc;
      }
    });
  }
  return result;
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor broadcast_to(const Tensor& x, std::size_t rows, std::size_t cols) {
  require_matrix("broadcast_to", x);
  const auto xr = x.rows(), xc = x.cols();
  if ((xr != 1 && xr != rows) || (xc != 1 && xc != cols)) {
    throw ShapeError("broadcast_to", x.shape(), Shape{rows, cols});
  }
  const auto xv = x.values();
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = xv[(xr == 1 ? 0 : i) * xc + (xc == 1 ? 0 : j)];
  const bool track = tracks(x);
  Tensor result = finish("broadcast_to", {rows, cols}, std::move(out), track);
  if (track) {
    record("broadcast_to", {x}, result, [x, result, rows, cols, xr, xc]() mutable {
      const auto g = result.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) gx[(xr == 1 ? 0 : i) * xc + (xc == 1 ? 0 : j)] += g[i * cols + j];
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (fcgaga::numel(shape) != x.numel()) throw ShapeError("reshape", x.shape(), shape);
  const auto xv = x.values();
  const bool track = tracks(x);
  Tensor result = finish("reshape", std::move(shape), std::vector<double>(xv.begin(), xv.end()), track);
  if (track) {
    record("reshape", {x}, result, [x, result]() mutable {
      const auto g = result.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    });
  }
  return result;
}

Tensor repeat_columns(const Tensor& x, std::size_t times) {
  require_matrix("repeat_columns", x);
  if (times == 0) throw ShapeError("repeat_columns", "times must be positive");
  const auto m = x.rows(), n = x.cols();
  const auto xv = x.values();
  const auto out_cols = n * times;
  std::vector<double> out(m * out_cols);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t r = 0; r < times; ++r) out[i * out_cols + j * times + r] = xv[i * n + j];
  const bool track = tracks(x);
  Tensor result = finish("repeat_columns", {m, out_cols}, std::move(out), track);
  if (track) {
    record("repeat_columns", {x}, result, [x, result, m, n, times, out_cols]() mutable {
      const auto g = result.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t r = 0; r < times; ++r) gx[i * n + j] += g[i * out_cols + j * times + r];
    });
  }
  return result;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_rows", x);
  if (begin >= end || end > x.rows()) {
    throw ShapeError("slice_rows", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                       ") out of bounds for " + to_string(x.shape()));
  }
  const auto n = x.cols();
  const auto xv = x.values();
  std::vector<double> out(xv.begin() + begin * n, xv.begin() + end * n);
  const bool track = tracks(x);
  Tensor result = finish("slice_rows", {end - begin, n}, std::move(out), track);
  if (track) {
    record("slice_rows", {x}, result, [x, result, begin, n]() mutable {
      const auto g = result.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
    });
  }
  return result;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix("slice_cols", x);
  if (begin >= end || end > x.cols()) {
    throw ShapeError("slice_cols", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                       ") out of bounds for " + to_string(x.shape()));
  }
  const auto m = x.rows(), n = x.cols(), w = end - begin;
  const auto xv = x.values();
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = xv[i * n + begin + j];
  const bool track = tracks(x);
  Tensor result = finish("slice_cols", {m, w}, std::move(out), track);
  if (track) {
    record("slice_cols", {x}, result, [x, result, begin, m, n, w]() mutable {
      const auto g = result.grad();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) gx[i * n + begin + j] += g[i * w + j];
    });
  }
  return result;
}

Tensor floor_substitute(const Tensor& x, double threshold, double replacement) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] < threshold ? replacement : xv[i];
  const bool track = tracks(x);
  Tensor result = finish("floor_substitute", x.shape(), std::move(out), track);
  if (track) {
    record("floor_substitute", {x}, result, [x, result, threshold]() mutable {
      const auto g = result.grad();
      const auto xs = x.values();
      auto gx = x.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (!(xs[i] < threshold)) gx[i] += g[i];
      }
    });
  }
  return result;
}

}  // namespace fcgaga
