// SPDX-License-Identifier: Apache-2.0
#include "acstep/dense_array.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "acstep/errors.hpp"

namespace acstep {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

DenseArray::DenseArray(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ContractError("DenseArray: shape " + shape_string(shape_) +
                        " does not match data length " +
                        std::to_string(data_.size()));
  }
}

DenseArray DenseArray::scalar(double value) { return DenseArray({}, {value}); }

DenseArray DenseArray::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return DenseArray({n}, std::move(values));
}

DenseArray DenseArray::vector(std::initializer_list<double> values) {
  return vector(std::vector<double>(values));
}

std::size_t DenseArray::rows() const {
  if (rank() != 2) throw ContractError("rows() requires a rank-2 array");
  return shape_[0];
}

std::size_t DenseArray::cols() const {
  if (rank() != 2) throw ContractError("cols() requires a rank-2 array");
  return shape_[1];
}

std::span<const double> DenseArray::row(std::size_t r) const {
  const std::size_t c = cols();
  if (r >= shape_[0]) throw ContractError("row index out of range");
  return std::span<const double>(data_).subspan(r * c, c);
}

std::span<double> DenseArray::row(std::size_t r) {
  const std::size_t c = cols();
  if (r >= shape_[0]) throw ContractError("row index out of range");
  return std::span<double>(data_).subspan(r * c, c);
}

void DenseArray::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool DenseArray::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double squared_norm(const DenseArray& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

}  // namespace acstep
