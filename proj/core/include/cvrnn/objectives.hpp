// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "cvrnn/autograd.hpp"
#include "cvrnn/conv_vrnn.hpp"

namespace cvrnn {

/// Which frame-prediction terms are active and how MS-SSIM is computed.
struct LossConfig {
  bool use_l1 = true;
  bool use_msssim = true;
  bool use_gdl = true;
  int msssim_scales = 3;
  int msssim_window = 11;  ///< odd side of the local-statistics window
  double msssim_sigma = 1.5;
  bool msssim_gaussian = true;  ///< false selects a uniform (box) window
  double gdl_alpha = 1.0;

  /// Throws ConfigError if no term is enabled or MS-SSIM cannot run at `image_size`.
  void validate(int image_size) const;
};

/// Stabilizers for unit dynamic range.
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Per-scale exponents, the standard five truncated to `scales` and renormalized.
std::vector<double> msssim_weights(int scales);
/// Normalized `size` x `size` window (Gaussian or box).
Tensor ssim_window(int size, double sigma, bool gaussian);

// Differentiable forms. Images are NCHW and every loss is a mean over pixels.

Var l1_loss(const Var& a, const Var& b);
/// 1 - MS-SSIM(a, b).
Var msssim_loss(const Var& a, const Var& b, const LossConfig& cfg);
Var gdl_loss(const Var& a, const Var& b, double alpha);

struct PredictionLossTerms {
  Var l1;
  Var msssim;
  Var gdl;
  Var total;  ///< sum of the enabled terms
};

/// Computes every term (so all can be logged) and sums the enabled ones.
PredictionLossTerms prediction_loss_terms(const Var& pred, const Var& target, const LossConfig& cfg);
Var prediction_loss(const Var& pred, const Var& target, const LossConfig& cfg);

/// beta * sum(kl_terms) + pred_loss; each KL term may be [1] or [N] (summed).
Var total_objective(const std::vector<Var>& kl_terms, const Var& pred_loss, double beta);

// Value-level forms; images may be [C,H,W] or [N,C,H,W].

double l1_loss(const Tensor& a, const Tensor& b);
double msssim_loss(const Tensor& a, const Tensor& b, const LossConfig& cfg);
double gdl_loss(const Tensor& a, const Tensor& b, double alpha);
double prediction_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg);

/// Closed-form KL(q || p) for diagonal Gaussians, summed over every element.
double kl_gauss(const LatentGaussian& q, const LatentGaussian& p);

double total_objective(std::span<const double> kl_terms, double pred_loss, double beta);

}  // namespace cvrnn
