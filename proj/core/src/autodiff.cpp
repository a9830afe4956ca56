// SPDX-License-Identifier: Apache-2.0
#include "acstep/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "acstep/errors.hpp"

namespace acstep {

namespace {

void require_same_size(Var a, Var b, const char* op) {
  if (a.size() != b.size()) {
    throw ContractError(std::string(op) + ": operand sizes differ (" +
                        std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

void require_scalar(Var s, const char* op) {
  if (s.size() != 1) throw ContractError(std::string(op) + ": expected a single-entry operand");
}

Tape& tape_of(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands belong to different tapes");
  return a.tape();
}

// Applies f elementwise and records dout * f'(in, out).
template <typename F, typename D>
Var unary(Var v, const char* op, F f, D df) {
  DenseArray out(v.value().shape());
  const auto in = v.value().data();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  Tape& t = v.tape();
  return t.record(std::move(out),
                  [v, df](Tape& t, const DenseArray& g) {
                    const auto x = t.value(v).data();
                    DenseArray& gx = t.grad_slot(v);
                    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * df(x[i]);
                  },
                  op);
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const DenseArray& Var::value() const { return tape_->value(*this); }

double Var::item() const {
  const DenseArray& v = value();
  if (v.size() != 1) throw ContractError("item() on a node with " + std::to_string(v.size()) + " entries");
  return v[0];
}

Var Tape::constant(DenseArray value) {
  return record(std::move(value), nullptr, "constant");
}

Var Tape::leaf(const ParamStore& store, ParamStore* mutable_store, const std::string& name) {
  auto key = std::make_pair(&store, name);
  if (auto it = leaf_index_.find(key); it != leaf_index_.end()) return Var(this, it->second);
  Var v = record(store.value(name), nullptr, "param");
  leaf_index_.emplace(std::move(key), v.id());
  leaves_.push_back(Leaf{mutable_store, name, v.id()});
  return v;
}

Var Tape::param(ParamStore& store, const std::string& name) { return leaf(store, &store, name); }

Var Tape::param(const ParamStore& store, const std::string& name) {
  return leaf(store, nullptr, name);
}

Var Tape::record(DenseArray value, Backward backward, const char* op) {
  if (!value.all_finite()) throw NumericError(std::string(op) + ": non-finite value");
  Node node;
  node.value = std::move(value);
  if (record_) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

DenseArray& Tape::grad_slot(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.has_grad) {
    n.grad = DenseArray(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

DenseArray Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : DenseArray(n.value.shape());
}

void Tape::backward(Var loss) {
  if (!record_) throw StateError("backward() on a tape that does not record");
  if (&loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (loss.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got " + std::to_string(loss.size()) +
                        " entries");
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
  }
  grad_slot(loss)[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, n.grad);
  }
  for (const Leaf& leaf : leaves_) {
    const Node& n = nodes_[leaf.id];
    if (!leaf.store || !n.has_grad) continue;
    DenseArray& g = leaf.store->grad(leaf.name);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
  }
}

Var add(Var a, Var b) {
  require_same_size(a, b, "add");
  Tape& t = tape_of(a, b);
  DenseArray out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return t.record(std::move(out),
                  [a, b](Tape& t, const DenseArray& g) {
                    DenseArray& ga = t.grad_slot(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                    DenseArray& gb = t.grad_slot(b);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                  },
                  "add");
}

Var sub(Var a, Var b) {
  require_same_size(a, b, "sub");
  Tape& t = tape_of(a, b);
  DenseArray out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return t.record(std::move(out),
                  [a, b](Tape& t, const DenseArray& g) {
                    DenseArray& ga = t.grad_slot(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                    DenseArray& gb = t.grad_slot(b);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                  },
                  "sub");
}

Var mul(Var a, Var b) {
  require_same_size(a, b, "mul");
  Tape& t = tape_of(a, b);
  DenseArray out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return t.record(std::move(out),
                  [a, b](Tape& t, const DenseArray& g) {
                    const auto av = t.value(a).data();
                    const auto bv = t.value(b).data();
                    DenseArray& ga = t.grad_slot(a);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                    DenseArray& gb = t.grad_slot(b);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                  },
                  "mul");
}

Var scale(Var v, double c) {
  return unary(v, "scale", [c](double x) { return c * x; }, [c](double) { return c; });
}

Var scale(Var v, Var s) {
  require_scalar(s, "scale");
  Tape& t = tape_of(v, s);
  const double sv = s.item();
  DenseArray out = v.value();
  for (double& x : out.data()) x *= sv;
  return t.record(std::move(out),
                  [v, s](Tape& t, const DenseArray& g) {
                    const double sv = t.value(s)[0];
                    const auto vv = t.value(v).data();
                    DenseArray& gv = t.grad_slot(v);
                    double gs = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      gv[i] += g[i] * sv;
                      gs += g[i] * vv[i];
                    }
                    t.grad_slot(s)[0] += gs;
                  },
                  "scale");
}

Var rsub(double c, Var v) {
  return unary(v, "rsub", [c](double x) { return c - x; }, [](double) { return -1.0; });
}

Var shift(Var v, double c) {
  return unary(v, "shift", [c](double x) { return x + c; }, [](double) { return 1.0; });
}

Var clamp_max(Var v, double c) {
  return unary(
      v, "clamp_max", [c](double x) { return std::min(x, c); },
      [c](double x) { return x < c ? 1.0 : 0.0; });
}

Var clamp(Var v, double lo, double hi) {
  if (!(lo <= hi)) throw ContractError("clamp: empty interval");
  return unary(
      v, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var reciprocal(Var s) {
  require_scalar(s, "reciprocal");
  if (s.item() == 0.0) throw NumericError("reciprocal: division by zero");
  return unary(s, "reciprocal", [](double x) { return 1.0 / x; },
               [](double x) { return -1.0 / (x * x); });
}

Var sigmoid(Var v) {
  return unary(v, "sigmoid", sigmoid_scalar, [](double x) {
    const double s = sigmoid_scalar(x);
    return s * (1.0 - s);
  });
}

Var tanh(Var v) {
  return unary(v, "tanh", [](double x) { return std::tanh(x); },
               [](double x) {
                 const double y = std::tanh(x);
                 return 1.0 - y * y;
               });
}

Var relu(Var v) {
  return unary(v, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(Var v) {
  return unary(v, "square", [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var matvec(Var w, Var x) {
  Tape& t = tape_of(w, x);
  const DenseArray& wv = w.value();
  const DenseArray& xv = x.value();
  if (wv.rank() != 2 || wv.cols() != xv.size()) {
    throw ContractError("matvec: matrix " + shape_string(wv.shape()) + " vs vector of size " +
                        std::to_string(xv.size()));
  }
  const std::size_t m = wv.rows();
  const std::size_t n = wv.cols();
  DenseArray out({m});
  for (std::size_t i = 0; i < m; ++i) {
    const double* wr = wv.data().data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += wr[j] * xv[j];
    out[i] = acc;
  }
  return t.record(std::move(out),
                  [w, x, m, n](Tape& t, const DenseArray& g) {
                    const double* wv = t.value(w).data().data();
                    const double* xv = t.value(x).data().data();
                    double* gw = t.grad_slot(w).data().data();
                    double* gx = t.grad_slot(x).data().data();
                    for (std::size_t i = 0; i < m; ++i) {
                      const double gi = g[i];
                      if (gi == 0.0) continue;
                      const double* wr = wv + i * n;
                      double* gwr = gw + i * n;
                      for (std::size_t j = 0; j < n; ++j) {
                        gwr[j] += gi * xv[j];
                        gx[j] += gi * wr[j];
                      }
                    }
                  },
                  "matvec");
}

Var dot(Var a, Var b) {
  require_same_size(a, b, "dot");
  Tape& t = tape_of(a, b);
  const auto av = a.value().data();
  const auto bv = b.value().data();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return t.record(DenseArray::scalar(acc),
                  [a, b](Tape& t, const DenseArray& g) {
                    const auto av = t.value(a).data();
                    const auto bv = t.value(b).data();
                    DenseArray& ga = t.grad_slot(a);
                    for (std::size_t i = 0; i < av.size(); ++i) ga[i] += g[0] * bv[i];
                    DenseArray& gb = t.grad_slot(b);
                    for (std::size_t i = 0; i < av.size(); ++i) gb[i] += g[0] * av[i];
                  },
                  "dot");
}

Var sum(Var v) {
  double acc = 0.0;
  for (double x : v.value().data()) acc += x;
  return v.tape().record(DenseArray::scalar(acc),
                         [v](Tape& t, const DenseArray& g) {
                           DenseArray& gv = t.grad_slot(v);
                           for (double& x : gv.data()) x += g[0];
                         },
                         "sum");
}

Var add_n(std::span<const Var> scalars) {
  if (scalars.empty()) throw ContractError("add_n: no operands");
  for (Var s : scalars) require_scalar(s, "add_n");
  Tape& t = scalars.front().tape();
  double acc = scalars.front().item();
  for (std::size_t i = 1; i < scalars.size(); ++i) acc += scalars[i].item();
  std::vector<Var> parts(scalars.begin(), scalars.end());
  return t.record(DenseArray::scalar(acc),
                  [parts = std::move(parts)](Tape& t, const DenseArray& g) {
                    for (Var p : parts) t.grad_slot(p)[0] += g[0];
                  },
                  "add_n");
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat: no operands");
  Tape& t = parts.front().tape();
  std::size_t total = 0;
  for (Var p : parts) {
    if (&p.tape() != &t) throw ContractError("operands belong to different tapes");
    total += p.size();
  }
  DenseArray out({total});
  std::size_t off = 0;
  for (Var p : parts) {
    const auto pv = p.value().data();
    std::copy(pv.begin(), pv.end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += pv.size();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(std::move(out),
                  [ps = std::move(ps)](Tape& t, const DenseArray& g) {
                    std::size_t off = 0;
                    for (Var p : ps) {
                      DenseArray& gp = t.grad_slot(p);
                      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
                      off += gp.size();
                    }
                  },
                  "concat");
}

Var slice(Var v, std::size_t offset, std::size_t length) {
  if (offset + length > v.size()) throw ContractError("slice: range exceeds operand");
  const auto vv = v.value().data();
  DenseArray out({length}, std::vector<double>(vv.begin() + static_cast<std::ptrdiff_t>(offset),
                                               vv.begin() + static_cast<std::ptrdiff_t>(offset + length)));
  return v.tape().record(std::move(out),
                         [v, offset](Tape& t, const DenseArray& g) {
                           DenseArray& gv = t.grad_slot(v);
                           for (std::size_t i = 0; i < g.size(); ++i) gv[offset + i] += g[i];
                         },
                         "slice");
}

Var row(Var table, std::size_t r) {
  const DenseArray& tv = table.value();
  if (tv.rank() != 2) throw ContractError("row: table must be rank 2");
  if (r >= tv.rows()) {
    throw ContractError("row: index " + std::to_string(r) + " out of range for " +
                        std::to_string(tv.rows()) + " rows");
  }
  const auto rv = tv.row(r);
  DenseArray out = DenseArray::vector(std::vector<double>(rv.begin(), rv.end()));
  return table.tape().record(std::move(out),
                             [table, r](Tape& t, const DenseArray& g) {
                               auto gr = t.grad_slot(table).row(r);
                               for (std::size_t i = 0; i < g.size(); ++i) gr[i] += g[i];
                             },
                             "row");
}

Var pick(Var v, std::size_t i) {
  if (i >= v.size()) throw ContractError("pick: index out of range");
  return v.tape().record(DenseArray::scalar(v.value()[i]),
                         [v, i](Tape& t, const DenseArray& g) { t.grad_slot(v)[i] += g[0]; },
                         "pick");
}

Var log_softmax(Var v) {
  const auto x = v.value().data();
  if (x.empty()) throw ContractError("log_softmax: empty operand");
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double xi : x) z += std::exp(xi - mx);
  const double lse = mx + std::log(z);
  DenseArray out(v.value().shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
  return v.tape().record(std::move(out),
                  [v](Tape& t, const DenseArray& g) {
                    // d/dx_i = g_i - softmax_i * sum(g)
                    const auto x = t.value(v).data();
                    const double mx = *std::max_element(x.begin(), x.end());
                    double z = 0.0;
                    for (double xi : x) z += std::exp(xi - mx);
                    double gs = 0.0;
                    for (double gi : g.data()) gs += gi;
                    DenseArray& gv = t.grad_slot(v);
                    for (std::size_t i = 0; i < x.size(); ++i) {
                      gv[i] += g[i] - std::exp(x[i] - mx) / z * gs;
                    }
                  },
                  "log_softmax");
}

}  // namespace acstep
