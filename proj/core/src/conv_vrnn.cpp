// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/conv_vrnn.hpp"

#include <cmath>

#include "cvrnn/errors.hpp"
#include "cvrnn/ops.hpp"

namespace cvrnn {
namespace {

constexpr int kEncKernel = 3;
constexpr int kDecKernel = 4;

// Output channels of each stride-2 stage from image to feature resolution.
std::vector<int> encoder_channels(int stages, int base, int feat) {
  std::vector<int> out;
  for (int i = 0; i < stages; ++i) out.push_back(i == stages - 1 ? feat : (i == 0 ? base : 2 * base));
  return out;
}

// Output channels of each upsampling stage; mirrors encoder_channels.
std::vector<int> decoder_channels(int stages, int base, int out_ch) {
  const std::vector<int> enc = encoder_channels(stages, base, 0);
  std::vector<int> out;
  for (int i = 0; i < stages; ++i) out.push_back(i == stages - 1 ? out_ch : enc[static_cast<std::size_t>(stages - 2 - i)]);
  return out;
}

std::vector<Conv2d> make_encoder(ParameterStore& store, const std::string& prefix, int in_ch,
                                 const ModelConfig& cfg, Rng& rng) {
  std::vector<Conv2d> layers;
  int c = in_ch;
  int i = 0;
  for (int out : encoder_channels(cfg.stages(), cfg.base_ch, cfg.feat_ch)) {
    layers.push_back(Conv2d::create(store, prefix + ".conv" + std::to_string(i++), c, out,
                                    kEncKernel, 2, 1, rng));
    c = out;
  }
  return layers;
}

std::vector<ConvTranspose2d> make_decoder(ParameterStore& store, int in_ch, const ModelConfig& cfg,
                                          Rng& rng) {
  std::vector<ConvTranspose2d> layers;
  int c = in_ch;
  int i = 0;
  for (int out : decoder_channels(cfg.stages(), cfg.base_ch, cfg.channels)) {
    layers.push_back(ConvTranspose2d::create(store, "decoder.deconv" + std::to_string(i++), c, out,
                                             kDecKernel, 2, 1, rng));
    c = out;
  }
  return layers;
}

Var run_encoder(Tape& tape, const ParameterStore& store, const std::vector<Conv2d>& layers, Var x) {
  for (const Conv2d& conv : layers) x = ops::leaky_relu(conv(tape, store, x), kLeakySlope);
  return x;
}

Var run_decoder(Tape& tape, const ParameterStore& store,
                const std::vector<ConvTranspose2d>& layers, Var x) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](tape, store, x);
    x = (i + 1 == layers.size()) ? ops::sigmoid(x) : ops::leaky_relu(x, kLeakySlope);
  }
  return x;
}

Var flatten(const Var& x) {
  const Shape& s = x.shape();
  return ops::reshape(x, {s[0], static_cast<int>(x.value().size() / static_cast<std::size_t>(s[0]))});
}

// Accepts [C,H,W] or [N,C,H,W] and returns the 4-D form after checking it against cfg.
Tensor as_frame_batch(const Tensor& x, const ModelConfig& cfg) {
  Tensor b = x.rank() == 3 ? x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)}) : x;
  if (b.rank() != 4 || b.dim(1) != cfg.channels || b.dim(2) != cfg.image_size ||
      b.dim(3) != cfg.image_size) {
    throw DimensionError("frame shape " + shape_str(x.shape()) + " does not match [" +
                         std::to_string(cfg.channels) + "x" + std::to_string(cfg.image_size) + "x" +
                         std::to_string(cfg.image_size) + "]");
  }
  return b;
}

void check_frame_var(const Var& x, const ModelConfig& cfg) {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != cfg.channels || s[2] != cfg.image_size || s[3] != cfg.image_size) {
    throw DimensionError("frame shape " + shape_str(s) + " does not match model config");
  }
}

void check_state(const Shape& s, const ModelConfig& cfg, const char* what) {
  if (s.size() != 4 || s[1] != cfg.hidden_ch || s[2] != cfg.feat_hw || s[3] != cfg.feat_hw) {
    throw DimensionError(std::string(what) + " shape " + shape_str(s) + " does not match [N x " +
                         std::to_string(cfg.hidden_ch) + "x" + std::to_string(cfg.feat_hw) + "x" +
                         std::to_string(cfg.feat_hw) + "]");
  }
}

double batch_sum(const Var& v) { return v.value().sum(); }

LatentGaussian to_value(const GaussianVars& g) { return {g.mean.value(), g.log_var.value()}; }

RecurrentState to_value(const StateVars& s) { return {s.hidden.value(), s.cell.value()}; }

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be positive, got " + std::to_string(v));
  };
  positive(image_size, "image_size");
  positive(channels, "channels");
  positive(horizon, "horizon");
  positive(z_dim, "z_dim");
  positive(feat_hw, "feat_hw");
  positive(feat_ch, "feat_ch");
  positive(hidden_ch, "hidden_ch");
  positive(base_ch, "base_ch");
  if (image_size % feat_hw != 0) {
    throw ConfigError("image_size " + std::to_string(image_size) + " is not a multiple of feat_hw " +
                      std::to_string(feat_hw));
  }
  const int f = image_size / feat_hw;
  if (f < 2 || (f & (f - 1)) != 0) {
    throw ConfigError("downsampling factor image_size/feat_hw = " + std::to_string(f) +
                      " must be a power of two >= 2");
  }
}

int ModelConfig::stages() const {
  int s = 0;
  for (int f = downsample_factor(); f > 1; f /= 2) ++s;
  return s;
}

Tensor reparameterize(const LatentGaussian& g, const Tensor& noise) {
  require_shape(g.log_var, g.mean.shape(), "reparameterize log_var");
  require_shape(noise, g.mean.shape(), "reparameterize noise");
  Tensor z(g.mean.shape());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = g.mean[i] + std::exp(0.5 * g.log_var[i]) * noise[i];
  return z;
}

Tensor standard_normal(const Shape& shape, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t(shape);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kConvVrnn: return "conv-vrnn";
    case ModelKind::kConvVae1: return "conv-vae-1";
    case ModelKind::kConvVae4: return "conv-vae-4";
  }
  return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "conv-vrnn") return ModelKind::kConvVrnn;
  if (name == "conv-vae-1") return ModelKind::kConvVae1;
  if (name == "conv-vae-4") return ModelKind::kConvVae4;
  throw ConfigError("unknown model '" + name + "' (expected conv-vrnn, conv-vae-1 or conv-vae-4)");
}

std::vector<Tensor> FramePredictor::predict_video(const std::vector<Tensor>& frames,
                                                  bool /*thread_state*/) const {
  const int horizon = cfg_.horizon;
  std::vector<Tensor> out;
  for (std::size_t t = static_cast<std::size_t>(horizon); t < frames.size(); ++t) {
    Tape tape(false);
    std::vector<Var> inputs;
    for (std::size_t k = t - static_cast<std::size_t>(horizon); k < t; ++k) {
      inputs.push_back(tape.constant(as_frame_batch(frames[k], cfg_)));
    }
    out.push_back(forward(tape, inputs, LatentMode::kEvalMean, nullptr).prediction.value());
  }
  return out;
}

// ---------------------------------------------------------------------------
// ConvVrnn

ConvVrnn::ConvVrnn(const ModelConfig& cfg) : FramePredictor(cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int flat = cfg.feat_ch * cfg.feat_hw * cfg.feat_hw;
  phi_h_ = Conv2d::create(params_, "phi_h.conv", cfg.hidden_ch, cfg.feat_ch, 3, 1, 1, rng);
  prior_mean_ = Linear::create(params_, "prior.head_mean", flat, cfg.z_dim, rng);
  prior_log_var_ = Linear::create(params_, "prior.head_log_var", flat, cfg.z_dim, rng);
  enc_cnn_ = make_encoder(params_, "encoder.cnn", cfg.channels, cfg, rng);
  enc_fuse_ = Conv2d::create(params_, "encoder.fuse", cfg.feat_ch + cfg.hidden_ch, cfg.feat_ch, 3, 1,
                             1, rng);
  enc_mean_ = Linear::create(params_, "encoder.head_mean", flat, cfg.z_dim, rng);
  enc_log_var_ = Linear::create(params_, "encoder.head_log_var", flat, cfg.z_dim, rng);
  spatialize_ = Linear::create(params_, "spatialize.fc", cfg.z_dim, flat, rng);
  phi_x_ = make_encoder(params_, "phi_x", cfg.channels, cfg, rng);
  lstm_ = ConvLstmCell::create(params_, "convlstm", 2 * cfg.feat_ch, cfg.hidden_ch, rng);
  decoder_ = make_decoder(params_, 2 * cfg.feat_ch, cfg, rng);
}

RecurrentState ConvVrnn::init_state(int batch) const {
  if (batch <= 0) throw ConfigError("batch must be positive, got " + std::to_string(batch));
  const Shape s{batch, cfg_.hidden_ch, cfg_.feat_hw, cfg_.feat_hw};
  return {Tensor::zeros(s), Tensor::zeros(s)};
}

StateVars ConvVrnn::state_vars(Tape& tape, const RecurrentState& state) const {
  check_state(state.hidden.shape(), cfg_, "hidden state");
  require_shape(state.cell, state.hidden.shape(), "cell state");
  return {tape.constant(state.hidden), tape.constant(state.cell)};
}

Var ConvVrnn::phi_h(Tape& tape, const StateVars& h_prev) const {
  check_state(h_prev.hidden.shape(), cfg_, "hidden state");
  return ops::leaky_relu(phi_h_(tape, params_, h_prev.hidden), kLeakySlope);
}

GaussianVars ConvVrnn::prior_net(Tape& tape, const StateVars& h_prev) const {
  const Var feat = flatten(phi_h(tape, h_prev));
  return {prior_mean_(tape, params_, feat), prior_log_var_(tape, params_, feat)};
}

GaussianVars ConvVrnn::encoder(Tape& tape, const Var& x, const StateVars& h_prev) const {
  check_frame_var(x, cfg_);
  check_state(h_prev.hidden.shape(), cfg_, "hidden state");
  const Var fx = run_encoder(tape, params_, enc_cnn_, x);
  const Var fused = ops::leaky_relu(
      enc_fuse_(tape, params_, ops::concat_channels({fx, h_prev.hidden})), kLeakySlope);
  const Var flat = flatten(fused);
  return {enc_mean_(tape, params_, flat), enc_log_var_(tape, params_, flat)};
}

Var ConvVrnn::spatialize(Tape& tape, const Var& z) const {
  if (z.value().rank() != 2 || z.shape()[1] != cfg_.z_dim) {
    throw DimensionError("latent shape " + shape_str(z.shape()) + " does not match z_dim " +
                         std::to_string(cfg_.z_dim));
  }
  return ops::reshape(spatialize_(tape, params_, z),
                      {z.shape()[0], cfg_.feat_ch, cfg_.feat_hw, cfg_.feat_hw});
}

StateVars ConvVrnn::recurrence(Tape& tape, const Var& x, const Var& z_r,
                               const StateVars& state) const {
  check_frame_var(x, cfg_);
  check_state(state.hidden.shape(), cfg_, "hidden state");
  const Var fx = run_encoder(tape, params_, phi_x_, x);
  auto [h, c] = lstm_(tape, params_, ops::concat_channels({fx, z_r}), state.hidden, state.cell);
  return {h, c};
}

Var ConvVrnn::decoder(Tape& tape, const Var& z_r, const StateVars& h_prev) const {
  return run_decoder(tape, params_, decoder_, ops::concat_channels({z_r, phi_h(tape, h_prev)}));
}

StepVars ConvVrnn::step(Tape& tape, const Var& x, const StateVars& state, LatentMode mode,
                        Rng* rng) const {
  StepVars out;
  const Var ph = phi_h(tape, state);
  const Var ph_flat = flatten(ph);
  out.prior = {prior_mean_(tape, params_, ph_flat), prior_log_var_(tape, params_, ph_flat)};
  out.posterior = encoder(tape, x, state);
  if (mode == LatentMode::kTrainSample) {
    if (rng == nullptr) throw ContractError("train-sample mode needs a random generator");
    out.z = ops::reparameterize(out.posterior.mean, out.posterior.log_var,
                                standard_normal(out.posterior.mean.shape(), *rng));
  } else {
    out.z = out.posterior.mean;
  }
  const Var z_r = spatialize(tape, out.z);
  out.prediction = run_decoder(tape, params_, decoder_, ops::concat_channels({z_r, ph}));
  out.state = recurrence(tape, x, z_r, state);
  out.kl = ops::kl_diag_gauss(out.posterior.mean, out.posterior.log_var, out.prior.mean,
                              out.prior.log_var);
  return out;
}

std::vector<StepVars> ConvVrnn::rollout(Tape& tape, const std::vector<Var>& frames,
                                        const StateVars& state0, LatentMode mode, Rng* rng) const {
  if (static_cast<int>(frames.size()) != cfg_.horizon) {
    throw ContractError("rollout needs exactly " + std::to_string(cfg_.horizon) + " frames, got " +
                        std::to_string(frames.size()));
  }
  std::vector<StepVars> steps;
  StateVars state = state0;
  for (const Var& x : frames) {
    steps.push_back(step(tape, x, state, mode, rng));
    state = steps.back().state;
  }
  return steps;
}

ForwardVars ConvVrnn::forward(Tape& tape, const std::vector<Var>& frames, LatentMode mode,
                              Rng* rng) const {
  if (frames.empty()) throw ContractError("forward needs at least one frame");
  const int batch = frames.front().shape()[0];
  const std::vector<StepVars> steps =
      rollout(tape, frames, state_vars(tape, init_state(batch)), mode, rng);
  ForwardVars out;
  for (const StepVars& s : steps) {
    out.kl_terms.push_back(s.kl);
    out.step_predictions.push_back(s.prediction);
  }
  out.prediction = steps.back().prediction;
  return out;
}

std::vector<Tensor> ConvVrnn::predict_video(const std::vector<Tensor>& frames,
                                            bool thread_state) const {
  if (!thread_state) return FramePredictor::predict_video(frames, false);
  // Carrying the state left after a window's first step into the next window
  // reproduces the states of one sequential pass, so a single pass suffices.
  std::vector<Tensor> out;
  RecurrentState state = init_state(1);
  for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
    Tape tape(false);
    const Var x = tape.constant(as_frame_batch(frames[t], cfg_));
    const StepVars s = step(tape, x, state_vars(tape, state), LatentMode::kEvalMean, nullptr);
    if (t + 1 >= static_cast<std::size_t>(cfg_.horizon)) out.push_back(s.prediction.value());
    state = to_value(s.state);
  }
  return out;
}

LatentGaussian ConvVrnn::prior_net(const RecurrentState& h_prev) const {
  Tape tape(false);
  return to_value(prior_net(tape, state_vars(tape, h_prev)));
}

LatentGaussian ConvVrnn::encoder(const Tensor& x, const RecurrentState& h_prev) const {
  Tape tape(false);
  return to_value(encoder(tape, tape.constant(as_frame_batch(x, cfg_)), state_vars(tape, h_prev)));
}

Tensor ConvVrnn::spatialize(const Tensor& z) const {
  Tape tape(false);
  const Tensor zb = z.rank() == 1 ? z.reshaped({1, z.dim(0)}) : z;
  return spatialize(tape, tape.constant(zb)).value();
}

RecurrentState ConvVrnn::recurrence(const Tensor& x, const Tensor& z_r,
                                    const RecurrentState& state) const {
  Tape tape(false);
  const Tensor zb = z_r.rank() == 3 ? z_r.reshaped({1, z_r.dim(0), z_r.dim(1), z_r.dim(2)}) : z_r;
  return to_value(recurrence(tape, tape.constant(as_frame_batch(x, cfg_)), tape.constant(zb),
                             state_vars(tape, state)));
}

Tensor ConvVrnn::decoder(const Tensor& z_r, const RecurrentState& h_prev) const {
  Tape tape(false);
  const Tensor zb = z_r.rank() == 3 ? z_r.reshaped({1, z_r.dim(0), z_r.dim(1), z_r.dim(2)}) : z_r;
  return decoder(tape, tape.constant(zb), state_vars(tape, h_prev)).value();
}

StepOutput ConvVrnn::step(const Tensor& x, const RecurrentState& state, LatentMode mode,
                          Rng* rng) const {
  Tape tape(false);
  const StepVars s =
      step(tape, tape.constant(as_frame_batch(x, cfg_)), state_vars(tape, state), mode, rng);
  return {s.prediction.value(), batch_sum(s.kl), to_value(s.prior), to_value(s.posterior),
          s.z.value(), to_value(s.state)};
}

RolloutOutput ConvVrnn::rollout(const ClipWindow& clip, const RecurrentState& state0,
                                LatentMode mode, Rng* rng) const {
  if (static_cast<int>(clip.inputs.size()) != cfg_.horizon) {
    throw ContractError("clip has " + std::to_string(clip.inputs.size()) + " inputs, expected " +
                        std::to_string(cfg_.horizon));
  }
  RolloutOutput out;
  RecurrentState state = state0;
  for (const Tensor& x : clip.inputs) {
    out.per_step.push_back(step(x, state, mode, rng));
    state = out.per_step.back().state;
    out.kl_sum += out.per_step.back().kl;
  }
  out.prediction = out.per_step.back().prediction;
  return out;
}

// ---------------------------------------------------------------------------
// ConvVae

ConvVae::ConvVae(const ModelConfig& cfg, int input_frames)
    : FramePredictor(cfg), input_frames_(input_frames) {
  cfg.validate();
  if (input_frames != 1 && input_frames != cfg.horizon) {
    throw ContractError("Conv-VAE takes 1 or " + std::to_string(cfg.horizon) +
                        " input frames, got " + std::to_string(input_frames));
  }
  Rng rng(cfg.seed);
  const int flat = cfg.feat_ch * cfg.feat_hw * cfg.feat_hw;
  enc_cnn_ = make_encoder(params_, "encoder.cnn", cfg.channels * input_frames, cfg, rng);
  enc_mean_ = Linear::create(params_, "encoder.head_mean", flat, cfg.z_dim, rng);
  enc_log_var_ = Linear::create(params_, "encoder.head_log_var", flat, cfg.z_dim, rng);
  spatialize_ = Linear::create(params_, "spatialize.fc", cfg.z_dim, flat, rng);
  decoder_ = make_decoder(params_, cfg.feat_ch, cfg, rng);
}

std::pair<Var, Var> ConvVae::predict(Tape& tape, const std::vector<Var>& frames, LatentMode mode,
                                     Rng* rng) const {
  if (static_cast<int>(frames.size()) != input_frames_) {
    throw ContractError("this Conv-VAE takes " + std::to_string(input_frames_) +
                        " frames, got " + std::to_string(frames.size()));
  }
  for (const Var& f : frames) check_frame_var(f, cfg_);
  const Var x = frames.size() == 1 ? frames.front() : ops::concat_channels(frames);
  const Var flat = flatten(run_encoder(tape, params_, enc_cnn_, x));
  const Var mean = enc_mean_(tape, params_, flat);
  const Var log_var = enc_log_var_(tape, params_, flat);
  Var z = mean;
  if (mode == LatentMode::kTrainSample) {
    if (rng == nullptr) throw ContractError("train-sample mode needs a random generator");
    z = ops::reparameterize(mean, log_var, standard_normal(mean.shape(), *rng));
  }
  const Var z_r = ops::reshape(spatialize_(tape, params_, z),
                               {z.shape()[0], cfg_.feat_ch, cfg_.feat_hw, cfg_.feat_hw});
  const Var prediction = run_decoder(tape, params_, decoder_, z_r);
  const Var zeros = tape.constant(Tensor::zeros(mean.shape()));
  return {prediction, ops::kl_diag_gauss(mean, log_var, zeros, zeros)};
}

std::pair<Tensor, double> ConvVae::predict(const std::vector<Tensor>& frames, LatentMode mode,
                                           Rng* rng) const {
  if (frames.size() != 1 && static_cast<int>(frames.size()) != cfg_.horizon) {
    throw ContractError("Conv-VAE takes 1 or " + std::to_string(cfg_.horizon) +
                        " frames, got " + std::to_string(frames.size()));
  }
  Tape tape(false);
  std::vector<Var> vars;
  for (const Tensor& f : frames) vars.push_back(tape.constant(as_frame_batch(f, cfg_)));
  auto [pred, kl] = predict(tape, vars, mode, rng);
  return {pred.value(), batch_sum(kl)};
}

ForwardVars ConvVae::forward(Tape& tape, const std::vector<Var>& frames, LatentMode mode,
                             Rng* rng) const {
  if (static_cast<int>(frames.size()) != cfg_.horizon) {
    throw ContractError("forward needs exactly " + std::to_string(cfg_.horizon) + " frames, got " +
                        std::to_string(frames.size()));
  }
  const std::vector<Var> used =
      input_frames_ == 1 ? std::vector<Var>{frames.back()} : frames;
  auto [pred, kl] = predict(tape, used, mode, rng);
  return {pred, {kl}, {}};
}

std::unique_ptr<FramePredictor> make_model(ModelKind kind, const ModelConfig& cfg) {
  switch (kind) {
    case ModelKind::kConvVrnn: return std::make_unique<ConvVrnn>(cfg);
    case ModelKind::kConvVae1: return std::make_unique<ConvVae>(cfg, 1);
    case ModelKind::kConvVae4: return std::make_unique<ConvVae>(cfg, cfg.horizon);
  }
  throw ConfigError("unknown model kind");
}

}  // namespace cvrnn
