// Copyright 2026 The fewshot-audio Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fsa::ndgrad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles with an optional gradient slot.
//
// Invariants: numel(shape) == data.size(); grad (when present) has the same
// length as data. Finiteness is checked at operation boundaries via
// check_finite(), not on every write.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Changes the shape without touching data; numel must be preserved.
  void reshape(Shape shape);
  Tensor reshaped(Shape shape) const;

  bool has_grad() const { return grad_.has_value(); }
  // Creates a zero gradient slot if missing.
  std::span<double> ensure_grad();
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();
  void drop_grad() { grad_.reset(); }

  // Throws NumericError naming `where` if any value is NaN or Inf.
  void check_finite(std::string_view where) const;

 private:
  Shape shape_;
  std::vector<double> data_;
  std::optional<std::vector<double>> grad_;
};

// Throws DimensionError naming both shapes when they differ.
void require_same_shape(const Shape& a, const Shape& b, std::string_view what);

}  // namespace fsa::ndgrad
