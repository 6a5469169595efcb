// Copyright 2026 The laln Authors.
// SPDX-License-Identifier: Apache-2.0

#include "laln/numkernel/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "laln/error.hpp"

namespace laln::nk {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("Array: data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
}

Array Array::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Array(Shape{n}, std::move(v));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Array(Shape{rows, cols}, std::move(v));
}

double Array::item() const {
  if (data_.size() != 1) throw ShapeError("item: array of shape " + shape_str(shape_) + " is not a scalar");
  return data_[0];
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Array& Array::operator+=(const Array& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("+=: shapes " + shape_str(shape_) + " and " + shape_str(other.shape_) + " differ");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Array& Array::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

bool Array::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Array Array::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
  }
  return Array(std::move(shape), data_);
}

double max_abs_diff(const Array& a, const Array& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace laln::nk
