// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cvrnn/errors.hpp"
#include "cvrnn/ops.hpp"

namespace fs = std::filesystem;

namespace cvrnn {
namespace {

struct WindowRef {
  std::size_t video;
  std::size_t start;
};

Tensor batch_of_one(const Tensor& frame) {
  return frame.rank() == 3 ? frame.reshaped({1, frame.dim(0), frame.dim(1), frame.dim(2)}) : frame;
}

double value_or_zero(const Var& v) { return v.valid() ? v.value()[0] : 0.0; }

void check_finite(double v, const char* term, int step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite ") + term + " loss at step " + std::to_string(step));
  }
}

std::string step_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06d.ckpt", step);
  return buf;
}

}  // namespace

Adam::Adam(const ParameterStore& params, double learning_rate, double beta1, double beta2,
           double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (const Parameter& p : params) {
    m_.push_back(Tensor::zeros(p.value.shape()));
    v_.push_back(Tensor::zeros(p.value.shape()));
  }
}

void Adam::step(ParameterStore& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw DimensionError("optimizer state does not match the parameter store");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, t_);
  const double c2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = params[k].value;
    const Tensor& g = grads[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Tensor& g : grads) g *= s;
  }
  return norm;
}

WindowObjective window_objective(Tape& tape, const FramePredictor& model,
                                 const std::vector<Tensor>& frames, const Tensor& target,
                                 const TrainConfig& cfg, LatentMode mode, Rng* rng) {
  std::vector<Var> inputs;
  for (const Tensor& f : frames) inputs.push_back(tape.constant(batch_of_one(f)));
  const Var target_var = tape.constant(batch_of_one(target));
  const ForwardVars fw = model.forward(tape, inputs, mode, rng);

  WindowObjective out;
  out.prediction = prediction_loss_terms(fw.prediction, target_var, cfg.loss);
  Var pred = out.prediction.total;
  if (cfg.per_step_loss) {
    // Step t predicts input t+1; the last step is the target term above.
    for (std::size_t t = 0; t + 1 < fw.step_predictions.size(); ++t) {
      pred = ops::add(pred, prediction_loss(fw.step_predictions[t], inputs[t + 1], cfg.loss));
    }
  }
  if (!fw.kl_terms.empty()) {
    out.kl = ops::sum(fw.kl_terms.front());
    for (std::size_t i = 1; i < fw.kl_terms.size(); ++i) out.kl = ops::add(out.kl, ops::sum(fw.kl_terms[i]));
  }
  out.total = total_objective(fw.kl_terms, pred, cfg.beta);
  return out;
}

TrainResult train(const std::vector<VideoRecord>& videos, const TrainConfig& cfg,
                  const TrainOptions& opts) {
  cfg.validate();
  const std::size_t horizon = static_cast<std::size_t>(cfg.model.horizon);
  std::vector<WindowRef> windows;
  for (std::size_t v = 0; v < videos.size(); ++v) {
    const std::size_t n = videos[v].frames.size();
    for (std::size_t s = 0; s + horizon < n; s += static_cast<std::size_t>(cfg.train_stride)) {
      windows.push_back({v, s});
    }
  }
  if (windows.empty()) throw DataError("no training window of " + std::to_string(horizon + 1) + " frames");

  std::unique_ptr<FramePredictor> model = make_model(cfg.model_kind, cfg.model);
  ParameterStore& params = model->parameters();
  Adam optimizer(params, cfg.learning_rate);
  Rng rng(cfg.seed);

  std::ofstream log;
  if (opts.loss_log) {
    log.open(*opts.loss_log, std::ios::binary | std::ios::trunc);
    if (!log) throw DataError("cannot write loss log " + opts.loss_log->string());
    log << "step,total,kl,l1,msssim,gdl\n";
  }
  if (opts.checkpoint_dir) fs::create_directories(*opts.checkpoint_dir);

  TrainResult result;
  std::vector<std::size_t> order(windows.size());
  std::size_t cursor = order.size();
  const double inv_batch = 1.0 / cfg.batch_size;

  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Tensor> grads;
    for (const Parameter& p : params) grads.push_back(Tensor::zeros(p.value.shape()));
    LossLogRow row;
    row.step = step;

    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const WindowRef w = windows[order[cursor++]];
      const VideoRecord& video = videos[w.video];
      const std::vector<Tensor> frames(video.frames.begin() + static_cast<std::ptrdiff_t>(w.start),
                                       video.frames.begin() + static_cast<std::ptrdiff_t>(w.start + horizon));
      Tape tape;
      const WindowObjective obj = window_objective(tape, *model, frames, video.frames[w.start + horizon],
                                                   cfg, LatentMode::kTrainSample, &rng);
      const double total = obj.total.value()[0];
      const double kl = value_or_zero(obj.kl);
      check_finite(kl, "KL", step);
      check_finite(obj.prediction.l1.value()[0], "L1", step);
      if (cfg.loss.use_msssim) check_finite(value_or_zero(obj.prediction.msssim), "MS-SSIM", step);
      check_finite(obj.prediction.gdl.value()[0], "GDL", step);
      check_finite(total, "total", step);

      tape.backward(obj.total);
      for (const auto& [param, grad] : tape.parameter_grads()) {
        Tensor& dst = grads[params.find(param->name)];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += inv_batch * (*grad)[i];
      }
      row.total += inv_batch * total;
      row.kl += inv_batch * kl;
      row.l1 += inv_batch * obj.prediction.l1.value()[0];
      row.msssim += inv_batch * value_or_zero(obj.prediction.msssim);
      row.gdl += inv_batch * obj.prediction.gdl.value()[0];
    }

    for (const Tensor& g : grads) {
      if (!g.all_finite()) throw NumericError("non-finite gradient at step " + std::to_string(step));
    }
    if (cfg.grad_clip) clip_global_norm(grads, *cfg.grad_clip);
    optimizer.step(params, grads);

    result.history.push_back(row);
    if (log) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", row.step, row.total, row.kl,
                    row.l1, row.msssim, row.gdl);
      log << buf;
    }
    if (opts.on_step) opts.on_step(row);
    if (opts.checkpoint_dir && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 &&
        step + 1 < cfg.steps) {
      save_checkpoint(make_checkpoint(*model, cfg, step + 1, rng), *opts.checkpoint_dir / step_name(step + 1));
    }
  }

  result.checkpoint = make_checkpoint(*model, cfg, cfg.steps, rng);
  if (opts.checkpoint_dir) save_checkpoint(result.checkpoint, *opts.checkpoint_dir / "final.ckpt");
  return result;
}

}  // namespace cvrnn
