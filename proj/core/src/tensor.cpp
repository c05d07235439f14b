#include "metashift/tensor.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <sstream>

namespace metashift::ad {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (values.size() != shape_size(shape_)) {
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(shape_));
  }
  values_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, {v}); }

Tensor Tensor::zeros(Shape shape) {
  std::vector<double> v(shape_size(shape), 0.0);
  return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::vector<double> v(shape_size(shape), value);
  return Tensor(std::move(shape), std::move(v));
}

std::size_t Tensor::size() const { return values_ ? values_->size() : 0; }

double Tensor::value() const {
  if (size() != 1) {
    throw ShapeError("scalar access on tensor of shape " + shape_str(shape_));
  }
  return (*values_)[0];
}

double Tensor::at(std::size_t flat_index) const { return (*values_)[flat_index]; }

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("2-d access on tensor of shape " + shape_str(shape_));
  return (*values_)[row * shape_[1] + col];
}

const std::vector<double>& Tensor::values() const {
  if (!values_) throw std::logic_error("access to undefined tensor");
  return *values_;
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.node_ = -1;
  t.tape_id_ = 0;
  return t;
}

bool Tensor::all_finite() const {
  if (!values_) return true;
  for (double v : *values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

bool Tensor::same_values(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  if (values_ == other.values_) return true;
  return std::memcmp(values_->data(), other.values_->data(),
                     values_->size() * sizeof(double)) == 0;
}

double Tensor::max_abs_diff(const Tensor& other) const {
  if (shape_ != other.shape_) {
    throw ShapeError("max_abs_diff: " + shape_str(shape_) + " vs " + shape_str(other.shape_));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    m = std::max(m, std::abs((*values_)[i] - (*other.values_)[i]));
  }
  return m;
}

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace metashift::ad
