// SPDX-License-Identifier: Apache-2.0
#include "acstep/param_store.hpp"

#include "acstep/errors.hpp"

namespace acstep {

DenseArray& ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
  return add(name, DenseArray(std::move(shape)));
}

DenseArray& ParamStore::add(const std::string& name, DenseArray value) {
  if (params_.count(name)) throw ContractError("duplicate parameter name: " + name);
  DenseArray grad(value.shape());
  auto [it, _] = params_.emplace(name, Param{std::move(value), std::move(grad)});
  return it->second.value;
}

DenseArray& ParamStore::value(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second.value;
}

const DenseArray& ParamStore::value(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second.value;
}

DenseArray& ParamStore::grad(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second.grad;
}

const DenseArray& ParamStore::grad(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second.grad;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.fill(0.0);
}

void ParamStore::scale_grad(double factor) {
  for (auto& [_, p] : params_) {
    for (double& g : p.grad.data()) g *= factor;
  }
}

void ParamStore::assign_values(const ParamStore& other) {
  for (const auto& [name, p] : other.params_) {
    DenseArray& dst = value(name);
    if (!dst.same_shape(p.value)) {
      throw ContractError("shape mismatch assigning parameter " + name);
    }
    dst = p.value;
  }
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.params_.size() != b.params_.size()) return false;
  auto it = b.params_.begin();
  for (const auto& [name, p] : a.params_) {
    if (name != it->first || !(p.value == it->second.value)) return false;
    ++it;
  }
  return true;
}

}  // namespace acstep
