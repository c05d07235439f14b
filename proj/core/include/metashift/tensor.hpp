#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace metashift::ad {

/// Thrown when operand shapes are incompatible; the message names both shapes.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a committed value contains NaN/Inf or a linear system is singular.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles. Values are immutable and shared between
/// copies; an optional (tape_id, node) pair ties the tensor to the tape that
/// recorded it. A tensor whose tape is gone simply degrades to a constant.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor zeros_like(const Tensor& t) { return zeros(t.shape()); }

  bool defined() const { return values_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const;

  /// Scalar accessor; requires size() == 1.
  double value() const;
  double at(std::size_t flat_index) const;
  /// Rank-2 accessor.
  double at(std::size_t row, std::size_t col) const;
  const std::vector<double>& values() const;

  bool attached() const { return node_ >= 0; }
  std::int64_t node() const { return node_; }
  std::uint64_t tape_id() const { return tape_id_; }
  /// Same storage, no graph linkage.
  Tensor detached() const;

  bool all_finite() const;
  /// Bitwise comparison of shape and every stored double.
  bool same_values(const Tensor& other) const;
  double max_abs_diff(const Tensor& other) const;

 private:
  friend class Tape;
  std::shared_ptr<const std::vector<double>> values_;
  Shape shape_;
  std::int64_t node_ = -1;
  std::uint64_t tape_id_ = 0;
};

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace metashift::ad
