// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cvrnn/checkpoint.hpp"
#include "cvrnn/config.hpp"
#include "cvrnn/dataio.hpp"

namespace cvrnn {

/// Batch means of one optimization step. Disabled loss terms are still
/// measured so every arm logs the same columns.
struct LossLogRow {
  int step = 0;
  double total = 0.0;
  double kl = 0.0;
  double l1 = 0.0;
  double msssim = 0.0;
  double gdl = 0.0;
};

/// Adaptive-moment optimizer (decay 0.9 / 0.999, epsilon 1e-8).
class Adam {
 public:
  Adam(const ParameterStore& params, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8);

  /// Applies one update; `grads` is aligned with the store order.
  void step(ParameterStore& params, const std::vector<Tensor>& grads);
  int steps_taken() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Tensor> m_, v_;
};

/// Scales `grads` so their global L2 norm is at most `max_norm`; returns the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

struct TrainOptions {
  std::optional<std::filesystem::path> loss_log;        ///< CSV step,total,kl,l1,msssim,gdl
  std::optional<std::filesystem::path> checkpoint_dir;  ///< receives step_NNNNNN.ckpt and final.ckpt
  std::function<void(const LossLogRow&)> on_step;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossLogRow> history;
};

/// Minimizes beta * sum_t KL_t + prediction loss over seeded random batches
/// of training windows. Every window starts from a zero recurrent state.
/// Throws DataError when no window is available and NumericError, naming the
/// term, when a loss becomes non-finite.
TrainResult train(const std::vector<VideoRecord>& videos, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

/// Objective of one window and its parts, recorded on `tape`.
struct WindowObjective {
  Var total;
  Var kl;  ///< unweighted sum of the KL terms (empty Var for beta-free models)
  PredictionLossTerms prediction;
};

WindowObjective window_objective(Tape& tape, const FramePredictor& model,
                                 const std::vector<Tensor>& frames, const Tensor& target,
                                 const TrainConfig& cfg, LatentMode mode, Rng* rng);

}  // namespace cvrnn
