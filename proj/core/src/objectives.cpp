// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cvrnn/errors.hpp"
#include "cvrnn/ops.hpp"

namespace cvrnn {
namespace {

constexpr double kStandardMsssimWeights[] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
// Floor applied to each per-scale factor before the fractional power.
constexpr double kMsssimFloor = 1e-6;

Tensor as_image_batch(const Tensor& x) {
  if (x.rank() == 3) return x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)});
  if (x.rank() != 4) throw DimensionError("expected a [C,H,W] or [N,C,H,W] image, got " + shape_str(x.shape()));
  return x;
}

void same_shape(const Var& a, const Var& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename F>
double eval_pair(const Tensor& a, const Tensor& b, F f) {
  Tape tape(false);
  return f(tape.constant(as_image_batch(a)), tape.constant(as_image_batch(b))).value()[0];
}

}  // namespace

void LossConfig::validate(int image_size) const {
  if (!use_l1 && !use_msssim && !use_gdl) throw ConfigError("no prediction-loss term is enabled");
  if (msssim_scales < 1 || msssim_scales > 5) {
    throw ConfigError("msssim_scales must be in [1, 5], got " + std::to_string(msssim_scales));
  }
  if (msssim_window < 1 || msssim_window % 2 == 0) {
    throw ConfigError("msssim_window must be a positive odd integer, got " +
                      std::to_string(msssim_window));
  }
  if (!(gdl_alpha > 0.0)) throw ConfigError("gdl_alpha must be positive");
  if (!(msssim_sigma > 0.0)) throw ConfigError("msssim_sigma must be positive");
  if (use_msssim && (image_size >> (msssim_scales - 1)) < msssim_window) {
    throw ConfigError("image size " + std::to_string(image_size) + " is too small for " +
                      std::to_string(msssim_scales) + " MS-SSIM scales with window " +
                      std::to_string(msssim_window));
  }
}

std::vector<double> msssim_weights(int scales) {
  if (scales < 1 || scales > 5) throw ConfigError("msssim_scales must be in [1, 5]");
  std::vector<double> w(kStandardMsssimWeights, kStandardMsssimWeights + scales);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
  return w;
}

Tensor ssim_window(int size, double sigma, bool gaussian) {
  Tensor k({size, size});
  if (!gaussian) {
    k.fill(1.0 / (static_cast<double>(size) * size));
    return k;
  }
  std::vector<double> g(static_cast<std::size_t>(size));
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) g[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2 * sigma * sigma));
  const double s = std::accumulate(g.begin(), g.end(), 0.0);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      k[static_cast<std::size_t>(i * size + j)] = g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)] / (s * s);
    }
  }
  return k;
}

Var l1_loss(const Var& a, const Var& b) {
  same_shape(a, b, "l1_loss");
  return ops::mean(ops::abs(ops::sub(a, b)));
}

Var msssim_loss(const Var& a, const Var& b, const LossConfig& cfg) {
  same_shape(a, b, "msssim_loss");
  if (a.value().rank() != 4) throw DimensionError("msssim_loss expects NCHW images");
  const int side = std::min(a.shape()[2], a.shape()[3]);
  if ((side >> (cfg.msssim_scales - 1)) < cfg.msssim_window) {
    throw ConfigError("image of side " + std::to_string(side) + " is too small for " +
                      std::to_string(cfg.msssim_scales) + " MS-SSIM scales with window " +
                      std::to_string(cfg.msssim_window));
  }
  const Tensor window = ssim_window(cfg.msssim_window, cfg.msssim_sigma, cfg.msssim_gaussian);
  const std::vector<double> weights = msssim_weights(cfg.msssim_scales);
  Var x = a;
  Var y = b;
  Var product;
  for (int s = 0; s < cfg.msssim_scales; ++s) {
    if (s > 0) {
      x = ops::avg_pool2(x);
      y = ops::avg_pool2(y);
    }
    const Var mu_x = ops::filter2d_valid(x, window);
    const Var mu_y = ops::filter2d_valid(y, window);
    const Var mu_xx = ops::mul(mu_x, mu_x);
    const Var mu_yy = ops::mul(mu_y, mu_y);
    const Var mu_xy = ops::mul(mu_x, mu_y);
    const Var var_x = ops::sub(ops::filter2d_valid(ops::mul(x, x), window), mu_xx);
    const Var var_y = ops::sub(ops::filter2d_valid(ops::mul(y, y), window), mu_yy);
    const Var cov = ops::sub(ops::filter2d_valid(ops::mul(x, y), window), mu_xy);
    Var map = ops::div(ops::add_scalar(ops::scale(cov, 2.0), kSsimC2),
                       ops::add_scalar(ops::add(var_x, var_y), kSsimC2));
    if (s == cfg.msssim_scales - 1) {
      const Var lum = ops::div(ops::add_scalar(ops::scale(mu_xy, 2.0), kSsimC1),
                               ops::add_scalar(ops::add(mu_xx, mu_yy), kSsimC1));
      map = ops::mul(lum, map);
    }
    const Var factor = ops::pow(ops::clamp_min(ops::mean(map), kMsssimFloor),
                                weights[static_cast<std::size_t>(s)]);
    product = product.valid() ? ops::mul(product, factor) : factor;
  }
  return ops::add_scalar(ops::scale(product, -1.0), 1.0);
}

Var gdl_loss(const Var& a, const Var& b, double alpha) {
  same_shape(a, b, "gdl_loss");
  const Var dw = ops::abs(ops::sub(ops::abs(ops::diff_w(a)), ops::abs(ops::diff_w(b))));
  const Var dh = ops::abs(ops::sub(ops::abs(ops::diff_h(a)), ops::abs(ops::diff_h(b))));
  return ops::add(ops::mean(ops::pow(dw, alpha)), ops::mean(ops::pow(dh, alpha)));
}

PredictionLossTerms prediction_loss_terms(const Var& pred, const Var& target, const LossConfig& cfg) {
  if (!cfg.use_l1 && !cfg.use_msssim && !cfg.use_gdl) {
    throw ConfigError("no prediction-loss term is enabled");
  }
  PredictionLossTerms t;
  t.l1 = l1_loss(pred, target);
  t.gdl = gdl_loss(pred, target, cfg.gdl_alpha);
  const int side = std::min(pred.shape()[2], pred.shape()[3]);
  if (cfg.use_msssim || (side >> (cfg.msssim_scales - 1)) >= cfg.msssim_window) {
    t.msssim = msssim_loss(pred, target, cfg);
  }
  std::vector<Var> enabled;
  if (cfg.use_l1) enabled.push_back(t.l1);
  if (cfg.use_msssim) enabled.push_back(t.msssim);
  if (cfg.use_gdl) enabled.push_back(t.gdl);
  t.total = enabled.front();
  for (std::size_t i = 1; i < enabled.size(); ++i) t.total = ops::add(t.total, enabled[i]);
  return t;
}

Var prediction_loss(const Var& pred, const Var& target, const LossConfig& cfg) {
  return prediction_loss_terms(pred, target, cfg).total;
}

Var total_objective(const std::vector<Var>& kl_terms, const Var& pred_loss, double beta) {
  Var total = pred_loss;
  if (kl_terms.empty() || beta == 0.0) return total;
  Var kl = ops::sum(kl_terms.front());
  for (std::size_t i = 1; i < kl_terms.size(); ++i) kl = ops::add(kl, ops::sum(kl_terms[i]));
  return ops::add(ops::scale(kl, beta), total);
}

double l1_loss(const Tensor& a, const Tensor& b) {
  return eval_pair(a, b, [](const Var& x, const Var& y) { return l1_loss(x, y); });
}

double msssim_loss(const Tensor& a, const Tensor& b, const LossConfig& cfg) {
  return eval_pair(a, b, [&cfg](const Var& x, const Var& y) { return msssim_loss(x, y, cfg); });
}

double gdl_loss(const Tensor& a, const Tensor& b, double alpha) {
  return eval_pair(a, b, [alpha](const Var& x, const Var& y) { return gdl_loss(x, y, alpha); });
}

double prediction_loss(const Tensor& pred, const Tensor& target, const LossConfig& cfg) {
  return eval_pair(pred, target,
                   [&cfg](const Var& x, const Var& y) { return prediction_loss(x, y, cfg); });
}

double kl_gauss(const LatentGaussian& q, const LatentGaussian& p) {
  require_shape(q.log_var, q.mean.shape(), "kl_gauss q.log_var");
  require_shape(p.mean, q.mean.shape(), "kl_gauss p.mean");
  require_shape(p.log_var, q.mean.shape(), "kl_gauss p.log_var");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.mean.size(); ++i) {
    const double dm = q.mean[i] - p.mean[i];
    kl += 0.5 * (p.log_var[i] - q.log_var[i]) +
          (std::exp(q.log_var[i]) + dm * dm) / (2.0 * std::exp(p.log_var[i])) - 0.5;
  }
  return kl;
}

double total_objective(std::span<const double> kl_terms, double pred_loss, double beta) {
  double kl = 0.0;
  for (double v : kl_terms) kl += v;
  return beta * kl + pred_loss;
}

}  // namespace cvrnn
