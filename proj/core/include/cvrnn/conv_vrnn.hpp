// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cvrnn/autograd.hpp"
#include "cvrnn/nn.hpp"

namespace cvrnn {

/// Architecture of the recurrent predictor and of the Conv-VAE baselines.
struct ModelConfig {
  int image_size = 128;  ///< H = W of every frame
  int channels = 3;      ///< C, 1 for grayscale
  int horizon = 4;       ///< T, observed frames per clip
  int z_dim = 20;
  int feat_hw = 16;    ///< side of the feature maps (H' = W')
  int feat_ch = 32;    ///< F, channels of the feature maps
  int hidden_ch = 64;  ///< ConvLSTM hidden/cell channels
  int base_ch = 32;    ///< width of the first backbone stage; inner stages use 2x
  std::uint64_t seed = 0;

  /// Throws ConfigError on an unusable combination.
  void validate() const;
  int downsample_factor() const { return image_size / feat_hw; }
  /// Number of stride-2 stages between image and feature resolution.
  int stages() const;
};

/// Diagonal Gaussian over the latent; mean and log_var are [N, z_dim].
struct LatentGaussian {
  Tensor mean;
  Tensor log_var;
};

/// ConvLSTM hidden and cell tensors, each [N, hidden_ch, feat_hw, feat_hw].
struct RecurrentState {
  Tensor hidden;
  Tensor cell;
};

/// A clip of `inputs.size()` consecutive frames and the frame that follows.
/// Frames are [C, H, W] with values in [0, 1].
struct ClipWindow {
  std::vector<Tensor> inputs;
  Tensor target;
  std::string video_id;
  int start_index = 0;
};

/// How the latent is chosen at each step.
enum class LatentMode {
  kTrainSample,  ///< z ~ q via the reparameterization trick
  kEvalMean,     ///< z = posterior mean; the forward pass is deterministic
};

/// Value-level result of one cell step.
struct StepOutput {
  Tensor prediction;  ///< x'(t+1), [N, C, H, W]
  double kl = 0.0;    ///< KL(posterior || prior), summed over the batch
  LatentGaussian prior;
  LatentGaussian posterior;
  Tensor z;
  RecurrentState state;
};

struct RolloutOutput {
  Tensor prediction;  ///< x'(T+1)
  double kl_sum = 0.0;
  std::vector<StepOutput> per_step;
};

/// mean + exp(0.5 * log_var) * noise, elementwise.
Tensor reparameterize(const LatentGaussian& g, const Tensor& noise);

/// Draws a standard-normal tensor of `shape` from `rng`.
Tensor standard_normal(const Shape& shape, Rng& rng);

/// Graph-level handles used while a forward pass is being recorded.
struct GaussianVars {
  Var mean;
  Var log_var;
};

struct StateVars {
  Var hidden;
  Var cell;
};

struct StepVars {
  Var prediction;
  Var kl;  ///< [N]
  GaussianVars prior;
  GaussianVars posterior;
  Var z;
  StateVars state;
};

/// Result of a differentiable forward pass over one clip.
struct ForwardVars {
  Var prediction;                     ///< prediction of the frame after the clip
  std::vector<Var> kl_terms;          ///< one [N] tensor per latent draw
  std::vector<Var> step_predictions;  ///< prediction after each input frame (VRNN only)
};

enum class ModelKind { kConvVrnn, kConvVae1, kConvVae4 };

std::string to_string(ModelKind kind);
/// Accepts "conv-vrnn", "conv-vae-1", "conv-vae-4".
ModelKind parse_model_kind(const std::string& name);

/// Common surface of every next-frame predictor, used by the trainer and scorer.
class FramePredictor {
 public:
  virtual ~FramePredictor() = default;

  virtual ModelKind kind() const = 0;
  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }

  /// `frames` holds exactly T tensors of shape [N, C, H, W].
  virtual ForwardVars forward(Tape& tape, const std::vector<Var>& frames, LatentMode mode,
                              Rng* rng) const = 0;

  /// Predictions x'(t) for every t in [T, frames.size()), evaluated with
  /// posterior means. `thread_state` carries recurrent state across successive
  /// windows; models without recurrence ignore it.
  virtual std::vector<Tensor> predict_video(const std::vector<Tensor>& frames,
                                            bool thread_state) const;

  virtual std::unique_ptr<FramePredictor> clone() const = 0;

 protected:
  explicit FramePredictor(const ModelConfig& cfg) : cfg_(cfg) {}

  ModelConfig cfg_;
  ParameterStore params_;
};

/// Convolutional variational recurrent cell: learned prior from h(t-1),
/// posterior from (x(t), h(t-1)), decoder from (z_r(t), phi_h(h(t-1))) and a
/// ConvLSTM recurrence over (phi_x(x(t)), z_r(t)).
class ConvVrnn final : public FramePredictor {
 public:
  explicit ConvVrnn(const ModelConfig& cfg);

  ModelKind kind() const override { return ModelKind::kConvVrnn; }
  std::unique_ptr<FramePredictor> clone() const override {
    return std::make_unique<ConvVrnn>(*this);
  }

  RecurrentState init_state(int batch) const;
  StateVars state_vars(Tape& tape, const RecurrentState& state) const;

  // Graph-level building blocks.
  Var phi_h(Tape& tape, const StateVars& h_prev) const;
  GaussianVars prior_net(Tape& tape, const StateVars& h_prev) const;
  GaussianVars encoder(Tape& tape, const Var& x, const StateVars& h_prev) const;
  Var spatialize(Tape& tape, const Var& z) const;
  StateVars recurrence(Tape& tape, const Var& x, const Var& z_r, const StateVars& state) const;
  Var decoder(Tape& tape, const Var& z_r, const StateVars& h_prev) const;
  StepVars step(Tape& tape, const Var& x, const StateVars& state, LatentMode mode, Rng* rng) const;
  /// Steps over every frame threading the state; the last step's prediction is x'(T+1).
  std::vector<StepVars> rollout(Tape& tape, const std::vector<Var>& frames, const StateVars& state0,
                                LatentMode mode, Rng* rng) const;

  ForwardVars forward(Tape& tape, const std::vector<Var>& frames, LatentMode mode,
                      Rng* rng) const override;
  std::vector<Tensor> predict_video(const std::vector<Tensor>& frames,
                                    bool thread_state) const override;

  // Value-level wrappers; frames are [C, H, W] or [N, C, H, W].
  LatentGaussian prior_net(const RecurrentState& h_prev) const;
  LatentGaussian encoder(const Tensor& x, const RecurrentState& h_prev) const;
  Tensor spatialize(const Tensor& z) const;
  RecurrentState recurrence(const Tensor& x, const Tensor& z_r, const RecurrentState& state) const;
  Tensor decoder(const Tensor& z_r, const RecurrentState& h_prev) const;
  StepOutput step(const Tensor& x, const RecurrentState& state, LatentMode mode, Rng* rng) const;
  /// Throws ContractError unless the clip has exactly T inputs.
  RolloutOutput rollout(const ClipWindow& clip, const RecurrentState& state0, LatentMode mode,
                        Rng* rng) const;

 private:
  std::vector<Conv2d> phi_x_;
  std::vector<Conv2d> enc_cnn_;
  Conv2d enc_fuse_;
  Linear enc_mean_, enc_log_var_;
  Conv2d phi_h_;
  Linear prior_mean_, prior_log_var_;
  Linear spatialize_;
  ConvLstmCell lstm_;
  std::vector<ConvTranspose2d> decoder_;
};

/// Non-recurrent ablation: the frames are stacked along channels, encoded to
/// a latent with a fixed N(0, I) prior, and decoded into the next frame.
class ConvVae final : public FramePredictor {
 public:
  /// `input_frames` must be 1 (the last observed frame) or T (all of them).
  ConvVae(const ModelConfig& cfg, int input_frames);

  ModelKind kind() const override {
    return input_frames_ == 1 ? ModelKind::kConvVae1 : ModelKind::kConvVae4;
  }
  std::unique_ptr<FramePredictor> clone() const override {
    return std::make_unique<ConvVae>(*this);
  }
  int input_frames() const noexcept { return input_frames_; }

  /// `frames` holds 1 or T tensors; returns (prediction, KL against N(0, I) per sample).
  std::pair<Var, Var> predict(Tape& tape, const std::vector<Var>& frames, LatentMode mode,
                              Rng* rng) const;
  /// Value-level form; the KL is summed over the batch.
  std::pair<Tensor, double> predict(const std::vector<Tensor>& frames, LatentMode mode,
                                    Rng* rng) const;

  ForwardVars forward(Tape& tape, const std::vector<Var>& frames, LatentMode mode,
                      Rng* rng) const override;

 private:
  int input_frames_;
  std::vector<Conv2d> enc_cnn_;
  Linear enc_mean_, enc_log_var_;
  Linear spatialize_;
  std::vector<ConvTranspose2d> decoder_;
};

std::unique_ptr<FramePredictor> make_model(ModelKind kind, const ModelConfig& cfg);

/// Leaky-ReLU slope used after every hidden backbone layer.
inline constexpr double kLeakySlope = 0.2;

}  // namespace cvrnn
