// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the unit and acceptance suites.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cvrnn/autograd.hpp"
#include "cvrnn/config.hpp"
#include "cvrnn/conv_vrnn.hpp"
#include "cvrnn/tensor.hpp"

namespace cvrnn::testing {

inline Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

/// Smallest model that still exercises every layer.
inline ModelConfig toy_model_config() {
  ModelConfig m;
  m.image_size = 16;
  m.channels = 1;
  m.horizon = 4;
  m.z_dim = 4;
  m.feat_hw = 4;
  m.feat_ch = 4;
  m.hidden_ch = 4;
  m.base_ch = 4;
  m.seed = 7;
  return m;
}

inline TrainConfig toy_train_config() {
  TrainConfig cfg;
  cfg.model = toy_model_config();
  cfg.loss.msssim_scales = 2;
  cfg.loss.msssim_window = 5;
  cfg.loss.msssim_sigma = 1.0;
  return cfg;
}

struct GradCheckResult {
  double worst_rel = 0.0;  // max |a - n| / max(|a|, |n|) over checked entries with a visible gradient
  double worst_abs = 0.0;
  int checked = 0;
  double worst_analytic = 0.0;  // the entry behind worst_rel
  double worst_numeric = 0.0;
};

/// Central-difference check of d f / d inputs[k] against the tape gradient.
/// `floor` keeps entries with near-zero gradient from dominating the relative error.
inline GradCheckResult grad_check(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                                  std::vector<Tensor> inputs, double h = 1e-6, double floor = 1e-6) {
  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  const Var out = f(tape, leaves);
  tape.backward(out);
  GradCheckResult r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = tape.grad(leaves[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      auto eval = [&](double x) {
        inputs[k][i] = x;
        Tape t2(false);
        std::vector<Var> l2;
        for (const Tensor& t : inputs) l2.push_back(t2.constant(t));
        return f(t2, l2).value()[0];
      };
      const double numeric = (eval(x0 + h) - eval(x0 - h)) / (2 * h);
      inputs[k][i] = x0;
      const double a = analytic[i];
      const double diff = std::abs(a - numeric);
      r.worst_abs = std::max(r.worst_abs, diff);
      const double rel = diff / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > r.worst_rel) {
        r.worst_rel = rel;
        r.worst_analytic = a;
        r.worst_numeric = numeric;
      }
      ++r.checked;
    }
  }
  return r;
}

/// Same check against model parameters; at most `per_tensor` entries of each tensor are probed.
inline GradCheckResult param_grad_check(FramePredictor& model,
                                        const std::function<Var(Tape&)>& objective,
                                        int per_tensor, double h = 1e-5, double floor = 1e-6) {
  Tape tape;
  const Var out = objective(tape);
  tape.backward(out);
  std::vector<Tensor> analytic(model.parameters().size());
  for (std::size_t p = 0; p < model.parameters().size(); ++p) {
    analytic[p] = Tensor::zeros(model.parameters()[p].value.shape());
  }
  for (const auto& [param, grad] : tape.parameter_grads()) {
    analytic[model.parameters().find(param->name)] = *grad;
  }
  GradCheckResult r;
  std::mt19937_64 pick(11);
  for (std::size_t p = 0; p < model.parameters().size(); ++p) {
    Tensor& value = model.parameters()[p].value;
    const int n = static_cast<int>(value.size());
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::shuffle(idx.begin(), idx.end(), pick);
    idx.resize(static_cast<std::size_t>(std::min(n, per_tensor)));
    for (int i : idx) {
      const double x0 = value[static_cast<std::size_t>(i)];
      auto eval = [&](double x) {
        value[static_cast<std::size_t>(i)] = x;
        Tape t2(false);
        return objective(t2).value()[0];
      };
      const double numeric = (eval(x0 + h) - eval(x0 - h)) / (2 * h);
      value[static_cast<std::size_t>(i)] = x0;
      const double a = analytic[p][static_cast<std::size_t>(i)];
      const double diff = std::abs(a - numeric);
      r.worst_abs = std::max(r.worst_abs, diff);
      const double rel = diff / std::max({std::abs(a), std::abs(numeric), floor});
      if (rel > r.worst_rel) {
        r.worst_rel = rel;
        r.worst_analytic = a;
        r.worst_numeric = numeric;
      }
      ++r.checked;
    }
  }
  return r;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cvrnn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cvrnn::testing
