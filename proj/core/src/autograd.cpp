// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/autograd.hpp"

#include "cvrnn/errors.hpp"

namespace cvrnn {

const Tensor& Var::value() const { return tape_->value(*this); }

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw ContractError("variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id_)];
}

Tape::Node& Tape::node(const Var& v) {
  return const_cast<Node&>(static_cast<const Tape*>(this)->node(v));
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = recording_;
  return push(std::move(n));
}

Var Tape::parameter(const Parameter& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var(this, it->second);
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = recording_;
  Var v = push(std::move(n));
  param_ids_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  if (recording_) {
    for (const Var& in : inputs) {
      if (node(in).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor& Tape::grad_buffer(const Var& v) {
  Node& n = node(v);
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value().shape());
    n.has_grad = true;
  }
  return n.grad;
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = node(v);
  return n.has_grad ? n.grad : Tensor::zeros(n.value().shape());
}

void Tape::backward(const Var& root) {
  Node& r = node(root);
  if (r.value().size() != 1) {
    throw DimensionError("backward root must be a scalar, got " + shape_str(r.value().shape()));
  }
  if (!r.requires_grad) return;
  grad_buffer(root)[0] += 1.0;
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.has_grad && n.backward) n.backward(*this, n.grad);
  }
}

std::vector<std::pair<const Parameter*, const Tensor*>> Tape::parameter_grads() const {
  std::vector<std::pair<const Parameter*, const Tensor*>> out;
  for (const Node& n : nodes_) {
    if (n.param && n.has_grad) out.emplace_back(n.param, &n.grad);
  }
  return out;
}

}  // namespace cvrnn
