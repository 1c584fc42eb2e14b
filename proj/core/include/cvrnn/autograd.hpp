// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cvrnn/tensor.hpp"

namespace cvrnn {

/// A named trainable tensor. Names are hierarchical, e.g. "prior.head_mean.weight".
struct Parameter {
  std::string name;
  Tensor value;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode autodiff tape. One tape per forward pass; it is not shared
/// between threads, but parameters it references may be read by many tapes
/// at once.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  /// With `record_gradients == false` no backward closures are kept, which is
  /// what evaluation wants.
  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Differentiable input that is not a model parameter.
  Var leaf(Tensor value);
  /// Leaf that aliases `p.value` without copying. Repeated calls return the same Var.
  Var parameter(const Parameter& p);

  /// Records an op output. `fn` runs during backward only if some input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  bool recording() const noexcept { return recording_; }
  bool requires_grad(const Var& v) const { return node(v).requires_grad; }
  const Tensor& value(const Var& v) const { return node(v).value(); }

  /// Seeds d(root)/d(root) = 1 and propagates. `root` must hold one element.
  void backward(const Var& root);

  /// Gradient buffer of `v`, allocated as zeros on first use. For op backward closures.
  Tensor& grad_buffer(const Var& v);
  /// Gradient after backward; zeros if nothing reached `v`.
  Tensor grad(const Var& v) const;

  /// (parameter, gradient) for every parameter leaf that received a gradient.
  std::vector<std::pair<const Parameter*, const Tensor*>> parameter_grads() const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    const Parameter* param = nullptr;
    BackwardFn backward;

    const Tensor& value() const { return external ? *external : owned; }
  };

  const Node& node(const Var& v) const;
  Node& node(const Var& v);
  Var push(Node n);

  bool recording_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_ids_;
};

}  // namespace cvrnn
