// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace acstep {

/// Row-major array of 64-bit reals with an explicit shape.
///
/// The product of the shape always equals the number of stored values. A
/// rank-0 array (empty shape) holds a single scalar.
class DenseArray {
 public:
  DenseArray() : data_(1, 0.0) {}

  /// Zero-filled array of the given shape.
  explicit DenseArray(std::vector<std::size_t> shape);

  DenseArray(std::vector<std::size_t> shape, std::vector<double> data);

  static DenseArray scalar(double value);
  static DenseArray vector(std::vector<double> values);
  static DenseArray vector(std::initializer_list<double> values);
  static DenseArray zeros(std::size_t n) { return DenseArray({n}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  /// Rows and columns of a rank-2 array.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  /// View of one row of a rank-2 array.
  std::span<const double> row(std::size_t r) const;
  std::span<double> row(std::size_t r);

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const DenseArray& other) const { return shape_ == other.shape_; }

  friend bool operator==(const DenseArray& a, const DenseArray& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

double squared_norm(const DenseArray& a);

}  // namespace acstep
