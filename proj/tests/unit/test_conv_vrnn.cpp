// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "cvrnn/conv_vrnn.hpp"
#include "cvrnn/errors.hpp"
#include "cvrnn/objectives.hpp"
#include "cvrnn/ops.hpp"
#include "cvrnn/trainer.hpp"
#include "support.hpp"

namespace cvrnn {
namespace {

using testing::random_tensor;
using testing::toy_model_config;

ClipWindow random_clip(const ModelConfig& cfg, std::uint64_t seed) {
  ClipWindow clip;
  const Shape frame{cfg.channels, cfg.image_size, cfg.image_size};
  for (int t = 0; t < cfg.horizon; ++t) clip.inputs.push_back(random_tensor(frame, seed + static_cast<std::uint64_t>(t)));
  clip.target = random_tensor(frame, seed + 99);
  return clip;
}

TEST(ConvVrnn, ShapesAndRangeAcrossImageSizes) {
  for (int size : {32, 64, 128}) {
    ModelConfig cfg;
    cfg.image_size = size;
    cfg.channels = 3;
    cfg.feat_hw = size / 8;
    cfg.feat_ch = 8;
    cfg.hidden_ch = 8;
    cfg.base_ch = 8;
    const ConvVrnn model(cfg);
    const ClipWindow clip = random_clip(cfg, 1);
    Rng rng(3);
    const RolloutOutput out = model.rollout(clip, model.init_state(1), LatentMode::kTrainSample, &rng);
    EXPECT_EQ(out.prediction.shape(), (Shape{1, 3, size, size}));
    EXPECT_GE(out.prediction.min(), 0.0);
    EXPECT_LE(out.prediction.max(), 1.0);
    ASSERT_EQ(out.per_step.size(), 4u);
    for (const StepOutput& s : out.per_step) {
      EXPECT_GE(s.kl, 0.0);
      EXPECT_EQ(s.z.shape(), (Shape{1, cfg.z_dim}));
      EXPECT_EQ(s.prior.mean.shape(), (Shape{1, cfg.z_dim}));
      EXPECT_EQ(s.state.hidden.shape(), (Shape{1, cfg.hidden_ch, cfg.feat_hw, cfg.feat_hw}));
      EXPECT_EQ(s.state.cell.shape(), s.state.hidden.shape());
      EXPECT_TRUE(s.prediction.all_finite());
    }
  }
}

TEST(ConvVrnn, BuildingBlockShapes) {
  const ModelConfig cfg = toy_model_config();
  const ConvVrnn model(cfg);
  const RecurrentState h0 = model.init_state(2);
  const Tensor x = random_tensor({2, 1, 16, 16}, 4);
  EXPECT_EQ(model.prior_net(h0).mean.shape(), (Shape{2, 4}));
  EXPECT_EQ(model.encoder(x, h0).log_var.shape(), (Shape{2, 4}));
  const Tensor zr = model.spatialize(random_tensor({2, 4}, 5));
  EXPECT_EQ(zr.shape(), (Shape{2, cfg.feat_ch, 4, 4}));
  EXPECT_EQ(model.decoder(zr, h0).shape(), (Shape{2, 1, 16, 16}));
  EXPECT_EQ(model.recurrence(x, zr, h0).hidden.shape(), (Shape{2, cfg.hidden_ch, 4, 4}));
}

TEST(ConvVrnn, EvalMeanIsDeterministicAndUsesPosteriorMean) {
  const ConvVrnn model(toy_model_config());
  const ClipWindow clip = random_clip(model.config(), 7);
  const RolloutOutput a = model.rollout(clip, model.init_state(1), LatentMode::kEvalMean, nullptr);
  const RolloutOutput b = model.rollout(clip, model.init_state(1), LatentMode::kEvalMean, nullptr);
  EXPECT_EQ(a.prediction, b.prediction);
  for (const StepOutput& s : a.per_step) EXPECT_EQ(s.z, s.posterior.mean);
  Rng r1(1), r2(2);
  const RolloutOutput c = model.rollout(clip, model.init_state(1), LatentMode::kTrainSample, &r1);
  const RolloutOutput d = model.rollout(clip, model.init_state(1), LatentMode::kTrainSample, &r2);
  EXPECT_GT(max_abs_diff(c.prediction, d.prediction), 0.0);
  EXPECT_THROW(model.rollout(clip, model.init_state(1), LatentMode::kTrainSample, nullptr), ContractError);
}

TEST(ConvVrnn, StepKlMatchesClosedForm) {
  const ConvVrnn model(toy_model_config());
  const Tensor x = random_tensor({1, 1, 16, 16}, 8);
  RecurrentState h = model.init_state(1);
  h.hidden = random_tensor(h.hidden.shape(), 9, -1, 1);
  const StepOutput s = model.step(x, h, LatentMode::kEvalMean, nullptr);
  EXPECT_NEAR(s.kl, kl_gauss(s.posterior, s.prior), 1e-12);
  EXPECT_EQ(kl_gauss(s.prior, s.prior), 0.0);
}

TEST(ConvVrnn, RolloutRejectsWrongClipLength) {
  const ConvVrnn model(toy_model_config());
  ClipWindow clip = random_clip(model.config(), 1);
  clip.inputs.pop_back();
  EXPECT_THROW(model.rollout(clip, model.init_state(1), LatentMode::kEvalMean, nullptr), ContractError);
}

TEST(ConvVrnn, GraphAndValueFormsAgree) {
  const ConvVrnn model(toy_model_config());
  const ClipWindow clip = random_clip(model.config(), 2);
  const RolloutOutput value = model.rollout(clip, model.init_state(1), LatentMode::kEvalMean, nullptr);
  Tape tape(false);
  std::vector<Var> frames;
  for (const Tensor& f : clip.inputs) frames.push_back(tape.constant(f.reshaped({1, 1, 16, 16})));
  const ForwardVars fw = model.forward(tape, frames, LatentMode::kEvalMean, nullptr);
  EXPECT_EQ(fw.prediction.value(), value.prediction);
  ASSERT_EQ(fw.kl_terms.size(), 4u);
  double kl = 0;
  for (const Var& k : fw.kl_terms) kl += k.value().sum();
  EXPECT_NEAR(kl, value.kl_sum, 1e-12);
}

TEST(ConvVrnn, ThreadedVideoPredictionMatchesSequentialSteps) {
  const ConvVrnn model(toy_model_config());
  std::vector<Tensor> frames;
  for (int t = 0; t < 9; ++t) frames.push_back(random_tensor({1, 16, 16}, 40 + static_cast<std::uint64_t>(t)));
  const std::vector<Tensor> threaded = model.predict_video(frames, true);
  const std::vector<Tensor> reset = model.predict_video(frames, false);
  ASSERT_EQ(threaded.size(), 5u);
  ASSERT_EQ(reset.size(), 5u);
  // The first window starts from zero state either way.
  EXPECT_EQ(threaded[0], reset[0]);
  // Every window equals a rollout started from the state of a sequential pass.
  RecurrentState state = model.init_state(1);
  for (int w = 0; w < 5; ++w) {
    ClipWindow clip;
    for (int t = w; t < w + 4; ++t) clip.inputs.push_back(frames[static_cast<std::size_t>(t)]);
    const RolloutOutput r = model.rollout(clip, state, LatentMode::kEvalMean, nullptr);
    EXPECT_LT(max_abs_diff(r.prediction, threaded[static_cast<std::size_t>(w)]), 1e-12) << w;
    state = r.per_step.front().state;
    const RolloutOutput fresh = model.rollout(clip, model.init_state(1), LatentMode::kEvalMean, nullptr);
    EXPECT_EQ(fresh.prediction, reset[static_cast<std::size_t>(w)]);
  }
}

TEST(ConvLstm, ZeroGateAlgebra) {
  ParameterStore store;
  Rng rng(1);
  const ConvLstmCell cell = ConvLstmCell::create(store, "cell", 2, 3, rng);
  for (Parameter& p : store) p.value.fill(0.0);
  Tape tape(false);
  const Tensor c_prev = random_tensor({1, 3, 4, 4}, 2, -1, 1);
  const auto [h, c] = cell(tape, store, tape.constant(random_tensor({1, 2, 4, 4}, 3)),
                           tape.constant(random_tensor({1, 3, 4, 4}, 4)), tape.constant(c_prev));
  // i = f = o = sigmoid(0) = 1/2 and g = tanh(0) = 0.
  for (std::size_t k = 0; k < c_prev.size(); ++k) {
    EXPECT_NEAR(c.value()[k], 0.5 * c_prev[k], 1e-15);
    EXPECT_NEAR(h.value()[k], 0.5 * std::tanh(0.5 * c_prev[k]), 1e-15);
  }
}

TEST(ConvVae, VariantsShapesAndInputs) {
  const ModelConfig cfg = toy_model_config();
  const ConvVae one(cfg, 1), four(cfg, 4);
  EXPECT_EQ(one.kind(), ModelKind::kConvVae1);
  EXPECT_EQ(four.kind(), ModelKind::kConvVae4);
  EXPECT_THROW(ConvVae(cfg, 2), ContractError);
  std::vector<Tensor> frames;
  for (int t = 0; t < 4; ++t) frames.push_back(random_tensor({1, 1, 16, 16}, 60 + static_cast<std::uint64_t>(t)));
  const auto [p4, kl4] = four.predict(frames, LatentMode::kEvalMean, nullptr);
  EXPECT_EQ(p4.shape(), (Shape{1, 1, 16, 16}));
  EXPECT_GE(kl4, 0.0);
  EXPECT_GE(p4.min(), 0.0);
  EXPECT_LE(p4.max(), 1.0);

  // The 1-frame variant only looks at the last observed frame.
  Tape t1(false), t2(false);
  std::vector<Var> a, b;
  for (int t = 0; t < 4; ++t) {
    a.push_back(t1.constant(frames[static_cast<std::size_t>(t)]));
    b.push_back(t2.constant(t == 3 ? frames[3] : random_tensor({1, 1, 16, 16}, 90 + static_cast<std::uint64_t>(t))));
  }
  EXPECT_EQ(one.forward(t1, a, LatentMode::kEvalMean, nullptr).prediction.value(),
            one.forward(t2, b, LatentMode::kEvalMean, nullptr).prediction.value());
}

TEST(Models, FactoryNamesAndValidation) {
  for (ModelKind k : {ModelKind::kConvVrnn, ModelKind::kConvVae1, ModelKind::kConvVae4}) {
    EXPECT_EQ(parse_model_kind(to_string(k)), k);
    EXPECT_EQ(make_model(k, toy_model_config())->kind(), k);
  }
  EXPECT_THROW(parse_model_kind("lstm"), ConfigError);
  ModelConfig bad = toy_model_config();
  bad.feat_hw = 5;
  EXPECT_THROW(ConvVrnn{bad}, ConfigError);
  bad.feat_hw = 16;  // factor 1
  EXPECT_THROW(ConvVrnn{bad}, ConfigError);
}

TEST(Models, SameSeedSameParametersAndCloneIsIndependent) {
  const ConvVrnn a(toy_model_config()), b(toy_model_config());
  ASSERT_EQ(a.parameters().size(), b.parameters().size());
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    EXPECT_EQ(a.parameters()[i].value, b.parameters()[i].value);
  }
  auto c = a.clone();
  c->parameters()[0].value.fill(0.0);
  EXPECT_NE(a.parameters()[0].value, c->parameters()[0].value);
}

// Full step objective (KL + prediction loss) in eval-mean mode on the toy config.
TEST(Models, StepObjectiveGradients) {
  TrainConfig cfg = testing::toy_train_config();
  std::vector<Tensor> frames;
  for (int t = 0; t < 4; ++t) frames.push_back(random_tensor({1, 16, 16}, 70 + static_cast<std::uint64_t>(t)));
  const Tensor target = random_tensor({1, 16, 16}, 80);
  for (ModelKind kind : {ModelKind::kConvVrnn, ModelKind::kConvVae4}) {
    cfg.model_kind = kind;
    auto model = make_model(kind, cfg.model);
    auto objective = [&](Tape& tape) {
      return window_objective(tape, *model, frames, target, cfg, LatentMode::kEvalMean, nullptr).total;
    };
    const auto r = testing::param_grad_check(*model, objective, 4);
    EXPECT_LT(r.worst_rel, 1e-3) << to_string(kind) << " checked " << r.checked;
  }
}

}  // namespace
}  // namespace cvrnn
