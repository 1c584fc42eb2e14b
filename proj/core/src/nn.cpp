// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/nn.hpp"

#include <cmath>

#include "cvrnn/errors.hpp"
#include "cvrnn/ops.hpp"

namespace cvrnn {

std::size_t ParameterStore::add(std::string name, Shape shape) {
  if (find(name) != size()) throw ConfigError("duplicate parameter name " + name);
  params_.push_back(Parameter{std::move(name), Tensor(std::move(shape))});
  return params_.size() - 1;
}

std::size_t ParameterStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return params_.size();
}

std::size_t ParameterStore::numel() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

void init_fan_in_uniform(Tensor& t, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
}

Conv2d Conv2d::create(ParameterStore& store, const std::string& prefix, int in_ch, int out_ch,
                      int kernel, int stride, int pad, Rng& rng) {
  Conv2d c;
  c.weight = store.add(prefix + ".weight", {out_ch, in_ch, kernel, kernel});
  c.bias = store.add(prefix + ".bias", {out_ch});
  c.stride = stride;
  c.pad = pad;
  const int fan_in = in_ch * kernel * kernel;
  init_fan_in_uniform(store[c.weight].value, fan_in, rng);
  init_fan_in_uniform(store[c.bias].value, fan_in, rng);
  return c;
}

Var Conv2d::operator()(Tape& tape, const ParameterStore& store, const Var& x) const {
  return ops::conv2d(x, tape.parameter(store[weight]), tape.parameter(store[bias]), stride, pad);
}

ConvTranspose2d ConvTranspose2d::create(ParameterStore& store, const std::string& prefix,
                                        int in_ch, int out_ch, int kernel, int stride, int pad,
                                        Rng& rng) {
  ConvTranspose2d c;
  c.weight = store.add(prefix + ".weight", {in_ch, out_ch, kernel, kernel});
  c.bias = store.add(prefix + ".bias", {out_ch});
  c.stride = stride;
  c.pad = pad;
  // Each output pixel of a stride-s transposed conv sees in_ch * (k/s)^2 inputs.
  const int taps = kernel / stride;
  const int fan_in = in_ch * taps * taps;
  init_fan_in_uniform(store[c.weight].value, fan_in, rng);
  init_fan_in_uniform(store[c.bias].value, fan_in, rng);
  return c;
}

Var ConvTranspose2d::operator()(Tape& tape, const ParameterStore& store, const Var& x) const {
  return ops::conv_transpose2d(x, tape.parameter(store[weight]), tape.parameter(store[bias]),
                               stride, pad);
}

Linear Linear::create(ParameterStore& store, const std::string& prefix, int in, int out,
                      Rng& rng) {
  Linear l;
  l.weight = store.add(prefix + ".weight", {out, in});
  l.bias = store.add(prefix + ".bias", {out});
  init_fan_in_uniform(store[l.weight].value, in, rng);
  init_fan_in_uniform(store[l.bias].value, in, rng);
  return l;
}

Var Linear::operator()(Tape& tape, const ParameterStore& store, const Var& x) const {
  return ops::linear(x, tape.parameter(store[weight]), tape.parameter(store[bias]));
}

ConvLstmCell ConvLstmCell::create(ParameterStore& store, const std::string& prefix, int in_ch,
                                  int hidden_ch, Rng& rng) {
  ConvLstmCell cell;
  cell.gates = Conv2d::create(store, prefix + ".gates", in_ch + hidden_ch, 4 * hidden_ch, 3, 1, 1, rng);
  cell.hidden_ch = hidden_ch;
  return cell;
}

std::pair<Var, Var> ConvLstmCell::operator()(Tape& tape, const ParameterStore& store,
                                             const Var& input, const Var& hidden,
                                             const Var& cell) const {
  const Var z = gates(tape, store, ops::concat_channels({input, hidden}));
  const int h = hidden_ch;
  const Var in_gate = ops::sigmoid(ops::slice_channels(z, 0, h));
  const Var forget_gate = ops::sigmoid(ops::slice_channels(z, h, 2 * h));
  const Var out_gate = ops::sigmoid(ops::slice_channels(z, 2 * h, 3 * h));
  const Var candidate = ops::tanh(ops::slice_channels(z, 3 * h, 4 * h));
  const Var next_cell = ops::add(ops::mul(forget_gate, cell), ops::mul(in_gate, candidate));
  const Var next_hidden = ops::mul(out_gate, ops::tanh(next_cell));
  return {next_hidden, next_cell};
}

}  // namespace cvrnn
