// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "acstep/dense_array.hpp"

namespace acstep {

/// A trainable tensor and its gradient slot. Shapes always agree.
struct Param {
  DenseArray value;
  DenseArray grad;
};

/// Named parameters, ordered by name so iteration (and therefore
/// initialization, checkpointing and optimizer updates) is deterministic.
class ParamStore {
 public:
  using Map = std::map<std::string, Param>;

  /// Registers a zero-initialized parameter. Names must be unique.
  DenseArray& add(const std::string& name, std::vector<std::size_t> shape);
  DenseArray& add(const std::string& name, DenseArray value);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  DenseArray& value(const std::string& name);
  const DenseArray& value(const std::string& name) const;
  DenseArray& grad(const std::string& name);
  const DenseArray& grad(const std::string& name) const;

  std::vector<std::string> names() const;
  std::size_t count() const { return params_.size(); }
  /// Total number of scalar entries across all parameters.
  std::size_t scalar_count() const;

  void zero_grad();
  /// Multiplies every gradient entry by `factor`.
  void scale_grad(double factor);

  /// Copies values of every parameter named in `other` (shapes must match).
  void assign_values(const ParamStore& other);

  Map& entries() { return params_; }
  const Map& entries() const { return params_; }

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  Map params_;
};

}  // namespace acstep
