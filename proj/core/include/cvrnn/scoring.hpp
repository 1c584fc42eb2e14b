// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cvrnn/conv_vrnn.hpp"
#include "cvrnn/dataio.hpp"
#include "cvrnn/objectives.hpp"

namespace cvrnn {

/// Per-frame losses and normalized scores of one video. Higher score means
/// more anomalous.
struct ScoreSeries {
  std::string video_id;
  std::vector<int> frame_indices;  ///< starts at T
  std::vector<double> losses;
  std::vector<double> scores;
  std::vector<int> labels;  ///< empty when the video is unlabeled
};

struct EvalReport {
  std::vector<ScoreSeries> per_video;
  double auc = 0.0;
  int num_positive = 0;
  int num_negative = 0;
};

struct ScoringOptions {
  LossConfig loss;
  /// Carry recurrent state through the video instead of resetting per window.
  bool thread_state = true;
  /// Min-max normalize over all videos at once instead of per video.
  bool global_normalization = false;
};

/// prediction_loss(x'(t), x(t)) for every t in [T, N) in eval-mean mode.
std::vector<double> frame_losses(const FramePredictor& model, const VideoRecord& video,
                                 const ScoringOptions& opts);

/// (L - min L) / (max L - min L); all zeros when the losses are constant.
/// Throws ContractError on an empty series.
std::vector<double> normalize_scores(std::span<const double> losses);

/// Area under the ROC curve via the rank statistic, ties counted as 1/2.
/// Label 1 is the anomalous (positive) class. Throws UndefinedMetricError
/// unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Scores every video; labels are copied for frames >= T when present.
std::vector<ScoreSeries> score_videos(const FramePredictor& model,
                                      const std::vector<VideoRecord>& videos,
                                      const ScoringOptions& opts);

/// Scores labeled videos and computes the frame-level AUC over all of them.
/// Frames before T carry no prediction and are excluded.
EvalReport evaluate(const FramePredictor& model, const std::vector<VideoRecord>& videos,
                    const ScoringOptions& opts);

/// Header video_id,frame_index,loss,score,label; losses use 9 significant
/// digits and scores round-trip exactly.
void write_score_csv(const std::vector<ScoreSeries>& series, const std::filesystem::path& path);
std::vector<ScoreSeries> read_score_csv(const std::filesystem::path& path);

/// Flat key=value text with auc, counts and any `extra` entries (e.g. config_hash).
void write_report(const EvalReport& report, const std::map<std::string, std::string>& extra,
                  const std::filesystem::path& path);

}  // namespace cvrnn
