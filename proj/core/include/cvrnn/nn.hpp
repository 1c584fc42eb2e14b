// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <utility>

#include "cvrnn/autograd.hpp"

namespace cvrnn {

using Rng = std::mt19937_64;

/// Ordered collection of named parameters. Layers refer to entries by index,
/// so a store (and any model holding one) can be copied freely.
class ParameterStore {
 public:
  std::size_t add(std::string name, Shape shape);

  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }
  std::size_t size() const noexcept { return params_.size(); }

  /// Index of `name`, or size() when absent.
  std::size_t find(const std::string& name) const;
  std::size_t numel() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
};

/// Fills `t` from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_fan_in_uniform(Tensor& t, int fan_in, Rng& rng);

struct Conv2d {
  std::size_t weight = 0, bias = 0;
  int stride = 1, pad = 0;

  static Conv2d create(ParameterStore& store, const std::string& prefix, int in_ch, int out_ch,
                       int kernel, int stride, int pad, Rng& rng);
  Var operator()(Tape& tape, const ParameterStore& store, const Var& x) const;
};

/// Weight layout [in, out, k, k].
struct ConvTranspose2d {
  std::size_t weight = 0, bias = 0;
  int stride = 1, pad = 0;

  static ConvTranspose2d create(ParameterStore& store, const std::string& prefix, int in_ch,
                                int out_ch, int kernel, int stride, int pad, Rng& rng);
  Var operator()(Tape& tape, const ParameterStore& store, const Var& x) const;
};

struct Linear {
  std::size_t weight = 0, bias = 0;

  static Linear create(ParameterStore& store, const std::string& prefix, int in, int out, Rng& rng);
  Var operator()(Tape& tape, const ParameterStore& store, const Var& x) const;
};

/// Convolutional LSTM cell. One 3x3 convolution over concat(input, hidden)
/// produces the input, forget, output and candidate gates, in that channel order.
struct ConvLstmCell {
  Conv2d gates;
  int hidden_ch = 0;

  static ConvLstmCell create(ParameterStore& store, const std::string& prefix, int in_ch,
                             int hidden_ch, Rng& rng);
  /// Returns (hidden, cell).
  std::pair<Var, Var> operator()(Tape& tape, const ParameterStore& store, const Var& input,
                                 const Var& hidden, const Var& cell) const;
};

}  // namespace cvrnn
