// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "cvrnn/config.hpp"
#include "cvrnn/dataio.hpp"
#include "cvrnn/errors.hpp"
#include "cvrnn/scoring.hpp"
#include "support.hpp"

namespace cvrnn {
namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      if (s[i] > s[j]) num += 1;
      else if (s[i] == s[j]) num += 0.5;
    }
  }
  return num / pairs;
}

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(2, 500);
  std::uniform_int_distribution<int> levels(2, 40);  // few levels -> many ties
  const int n = len(rng);
  const int l = levels(rng);
  std::uniform_int_distribution<int> lvl(0, l - 1);
  std::bernoulli_distribution coin(0.3);
  Instance in;
  for (int i = 0; i < n; ++i) {
    in.scores.push_back(lvl(rng) / static_cast<double>(l));
    in.labels.push_back(coin(rng) ? 1 : 0);
  }
  in.labels[0] = 1;
  in.labels[1] = 0;
  return in;
}

TEST(Normalize, KnownValuesAndDegenerateCases) {
  const std::vector<double> l = {2, 4, 6};
  EXPECT_EQ(normalize_scores(l), (std::vector<double>{0, 0.5, 1}));
  const std::vector<double> c = {3, 3, 3};
  EXPECT_EQ(normalize_scores(c), (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(normalize_scores(std::vector<double>{}), ContractError);
}

TEST(Normalize, AffineInvariance) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1), a(0.01, 100), b(-50, 50);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> l(50), t(50);
    const double sa = a(rng), sb = b(rng);
    for (std::size_t i = 0; i < l.size(); ++i) {
      l[i] = u(rng);
      t[i] = sa * l[i] + sb;
    }
    const auto x = normalize_scores(l), y = normalize_scores(t);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], y[i], 1e-12);
  }
}

TEST(Auc, MatchesPairCounting) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Instance in = random_instance(rng);
    EXPECT_NEAR(roc_auc(in.scores, in.labels), brute_auc(in.scores, in.labels), 1e-12);
  }
}

TEST(Auc, SymmetriesAndEdgeCases) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Instance in = random_instance(rng);
    const double auc = roc_auc(in.scores, in.labels);
    std::vector<int> flipped;
    std::vector<double> negated, cubed;
    for (int y : in.labels) flipped.push_back(1 - y);
    for (double s : in.scores) {
      negated.push_back(-s);
      cubed.push_back(s * s * s + 2.0);
    }
    EXPECT_NEAR(roc_auc(in.scores, flipped), 1 - auc, 1e-12);
    EXPECT_NEAR(roc_auc(negated, in.labels), 1 - auc, 1e-12);
    EXPECT_NEAR(roc_auc(cubed, in.labels), auc, 1e-12);
  }
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{0, 1, 0}), 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedMetricError);
  EXPECT_THROW(roc_auc(std::vector<double>{0.1}, std::vector<int>{0, 1}), DimensionError);
}

class ScoringWithModel : public ::testing::Test {
 protected:
  void SetUp() override {
    model_ = make_model(ModelKind::kConvVrnn, testing::toy_model_config());
    opts_.loss = testing::toy_train_config().loss;
    for (int i = 0; i < 2; ++i) {
      SynthSpec s;
      s.video_id = "clip" + std::to_string(i);
      s.image_size = 16;
      s.sprite_size = 4;
      s.velocity = 1;
      s.num_frames = 14;
      s.anomaly_kind = AnomalyKind::kIntruderSprite;
      s.anomaly_begin = 8;
      s.anomaly_end = 12;
      s.seed = static_cast<std::uint64_t>(i);
      videos_.push_back(synth_video(s));
    }
  }
  std::unique_ptr<FramePredictor> model_;
  ScoringOptions opts_;
  std::vector<VideoRecord> videos_;
};

TEST_F(ScoringWithModel, SeriesLayoutAndAuc) {
  const EvalReport r = evaluate(*model_, videos_, opts_);
  ASSERT_EQ(r.per_video.size(), 2u);
  for (const ScoreSeries& s : r.per_video) {
    ASSERT_EQ(s.losses.size(), 10u);
    EXPECT_EQ(s.frame_indices.front(), 4);
    EXPECT_EQ(s.frame_indices.back(), 13);
    EXPECT_EQ(s.labels.size(), 10u);
    for (double l : s.losses) EXPECT_GE(l, 0.0);
    for (double v : s.scores) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(r.num_positive, 8);
  EXPECT_EQ(r.num_negative, 12);
  std::vector<double> all;
  std::vector<int> lab;
  for (const ScoreSeries& s : r.per_video) {
    all.insert(all.end(), s.scores.begin(), s.scores.end());
    lab.insert(lab.end(), s.labels.begin(), s.labels.end());
  }
  EXPECT_NEAR(r.auc, brute_auc(all, lab), 1e-12);

  // A second run is bitwise identical.
  const EvalReport again = evaluate(*model_, videos_, opts_);
  EXPECT_EQ(again.auc, r.auc);
  EXPECT_EQ(again.per_video[1].losses, r.per_video[1].losses);
}

TEST_F(ScoringWithModel, OptionsChangeOnlyWhatTheySay) {
  ScoringOptions reset = opts_;
  reset.thread_state = false;
  const auto threaded = score_videos(*model_, videos_, opts_);
  const auto fresh = score_videos(*model_, videos_, reset);
  EXPECT_EQ(threaded[0].losses.front(), fresh[0].losses.front());
  ScoringOptions global = opts_;
  global.global_normalization = true;
  const auto g = score_videos(*model_, videos_, global);
  double lo = 1, hi = 0;
  for (const auto& s : g) {
    EXPECT_EQ(s.losses, threaded[&s - g.data()].losses);
    for (double v : s.scores) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  EXPECT_EQ(lo, 0.0);
  EXPECT_EQ(hi, 1.0);
}

TEST_F(ScoringWithModel, CsvAndReportRoundTrip) {
  const auto dir = testing::scratch_dir("scoring_csv");
  const EvalReport r = evaluate(*model_, videos_, opts_);
  write_score_csv(r.per_video, dir / "scores.csv");
  const auto back = read_score_csv(dir / "scores.csv");
  ASSERT_EQ(back.size(), r.per_video.size());
  std::vector<double> all;
  std::vector<int> lab;
  for (std::size_t v = 0; v < back.size(); ++v) {
    EXPECT_EQ(back[v].video_id, r.per_video[v].video_id);
    EXPECT_EQ(back[v].scores, r.per_video[v].scores);
    EXPECT_EQ(back[v].labels, r.per_video[v].labels);
    EXPECT_EQ(back[v].frame_indices, r.per_video[v].frame_indices);
    all.insert(all.end(), back[v].scores.begin(), back[v].scores.end());
    lab.insert(lab.end(), back[v].labels.begin(), back[v].labels.end());
  }
  EXPECT_EQ(roc_auc(all, lab), r.auc);

  write_report(r, {{"config_hash", "abc"}}, dir / "report.txt");
  const KeyValues kv = load_key_values((dir / "report.txt").string());
  EXPECT_EQ(std::stod(kv.at("auc")), r.auc);
  EXPECT_EQ(kv.at("config_hash"), "abc");
  EXPECT_EQ(kv.at("num_positive"), "8");
  std::filesystem::remove_all(dir);
}

TEST_F(ScoringWithModel, UnlabeledVideosAndShortVideos) {
  videos_[0].labels.reset();
  EXPECT_THROW(evaluate(*model_, videos_, opts_), DataError);
  const auto series = score_videos(*model_, videos_, opts_);
  EXPECT_TRUE(series[0].labels.empty());
  EXPECT_EQ(series[1].labels.size(), 10u);
  videos_[0].frames.resize(4);
  EXPECT_TRUE(frame_losses(*model_, videos_[0], opts_).empty());
}

}  // namespace
}  // namespace cvrnn
