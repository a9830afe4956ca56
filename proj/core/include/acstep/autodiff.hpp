// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode differentiation over DenseArray values.
//
// A Tape records every operation applied to its Vars together with a
// closure that propagates the output gradient to the operands. Tapes are
// rebuilt per utterance; a tape constructed with `record = false` computes
// the same values without keeping backward closures (inference).
#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "acstep/dense_array.hpp"
#include "acstep/param_store.hpp"

namespace acstep {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const DenseArray& value() const;
  std::size_t size() const { return value().size(); }
  /// Value of a single-entry node.
  double item() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const DenseArray& out_grad)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(DenseArray value);
  Var zeros(std::size_t n) { return constant(DenseArray::zeros(n)); }
  Var scalar(double v) { return constant(DenseArray::scalar(v)); }

  /// Leaf bound to a trainable parameter. Repeated calls with the same store
  /// and name return the same node. Gradients reaching a leaf from a
  /// mutable store are added to the store's gradient slot by backward().
  Var param(ParamStore& store, const std::string& name);
  /// Read-only leaf; gradients are never written back.
  Var param(const ParamStore& store, const std::string& name);

  const DenseArray& value(Var v) const { return nodes_[v.id()].value; }
  /// Gradient accumulated at a node by the last backward(); zeros if the
  /// node was not reached.
  DenseArray grad(Var v) const;

  /// Propagates d(loss)/d(node) to every node and accumulates parameter
  /// gradients into their stores. `loss` must hold exactly one entry.
  void backward(Var loss);

  /// Appends an operation result. Throws NumericError on non-finite values.
  Var record(DenseArray value, Backward backward, const char* op);
  /// Gradient slot of a node, allocated on first use.
  DenseArray& grad_slot(Var v);

 private:
  struct Node {
    DenseArray value;
    DenseArray grad;
    bool has_grad = false;
    Backward backward;
  };
  struct Leaf {
    ParamStore* store = nullptr;  // null for read-only leaves
    std::string name;
    std::size_t id = 0;
  };

  Var leaf(const ParamStore& store, ParamStore* mutable_store, const std::string& name);

  std::vector<Node> nodes_;
  std::vector<Leaf> leaves_;
  std::map<std::pair<const ParamStore*, std::string>, std::size_t> leaf_index_;
  bool record_;
};

// Elementwise ops require operands of equal size; results take the shape of
// the first operand.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var v, double c);
/// v * s for a single-entry s.
Var scale(Var v, Var s);
/// c - v, elementwise.
Var rsub(double c, Var v);
/// v + c, elementwise.
Var shift(Var v, double c);
/// min(v, c), elementwise. Gradient is zero where the bound is active.
Var clamp_max(Var v, double c);
/// Elementwise clamp into [lo, hi]; zero gradient where a bound is active.
Var clamp(Var v, double lo, double hi);
/// 1 / s for a single-entry s.
Var reciprocal(Var s);

Var sigmoid(Var v);
Var tanh(Var v);
Var relu(Var v);
Var square(Var v);

/// W x for W of shape [m, n] and x of size n.
Var matvec(Var w, Var x);
Var dot(Var a, Var b);
Var sum(Var v);
/// Left-to-right sum of single-entry nodes: ((s0 + s1) + s2) + ...
Var add_n(std::span<const Var> scalars);

Var concat(std::span<const Var> parts);
Var slice(Var v, std::size_t offset, std::size_t length);
/// Row `r` of a rank-2 table (embedding lookup).
Var row(Var table, std::size_t r);
/// Entry `i` of a vector as a scalar.
Var pick(Var v, std::size_t i);

Var log_softmax(Var v);

}  // namespace acstep
