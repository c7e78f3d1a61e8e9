#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcgaga {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Operand shapes do not conform to a primitive's shape algebra.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, const Shape& lhs, const Shape& rhs);
  ShapeError(const std::string& op, const std::string& what);
};

/// A primitive produced (or was asked to consume) a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Misuse of the computation graph: double backward, non-scalar loss, ...
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major array of doubles with an optional gradient slot.
///
/// Tensor is a cheap shared handle: copies alias the same storage, which is
/// what lets recorded graph entries refer back to their operands. Use
/// clone() for an independent copy. Rank-0 and rank-1 tensors behave as
/// 1x1 and 1xn matrices wherever a primitive needs two dimensions.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor identity(std::size_t n);
  /// Row-major literal, e.g. Tensor::matrix({{1, 2}, {3, 4}}).
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  /// Direct write access. Mutations are invisible to any recorded graph.
  std::span<double> data();
  double item() const;
  double at(std::size_t row, std::size_t col) const;
  double& at(std::size_t row, std::size_t col);

  bool requires_grad() const;
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const double> grad() const;
  /// Allocates a zero-filled gradient on first use.
  std::span<double> mutable_grad() const;
  void zero_grad();

  Tensor clone() const;
  /// Same values, fresh storage, no gradient tracking.
  Tensor detach() const;

  /// Identity of the underlying storage; equal for aliasing handles.
  const void* id() const { return impl_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> impl_;

  Storage& storage() const;
};

bool all_finite(std::span<const double> values);

}  // namespace fcgaga
