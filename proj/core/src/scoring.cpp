// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cvrnn/errors.hpp"

namespace fs = std::filesystem;

namespace cvrnn {
namespace {

std::string format_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace

std::vector<double> frame_losses(const FramePredictor& model, const VideoRecord& video,
                                 const ScoringOptions& opts) {
  const std::size_t horizon = static_cast<std::size_t>(model.config().horizon);
  if (video.frames.size() <= horizon) return {};
  const std::vector<Tensor> preds = model.predict_video(video.frames, opts.thread_state);
  std::vector<double> losses;
  losses.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    losses.push_back(prediction_loss(preds[i], video.frames[horizon + i], opts.loss));
  }
  return losses;
}

std::vector<double> normalize_scores(std::span<const double> losses) {
  if (losses.empty()) throw ContractError("cannot normalize an empty loss series");
  const auto [lo_it, hi_it] = std::minmax_element(losses.begin(), losses.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  std::vector<double> scores(losses.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < losses.size(); ++i) scores[i] = (losses[i] - lo) / range;
  }
  return scores;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("roc_auc: " + std::to_string(scores.size()) + " scores but " +
                         std::to_string(labels.size()) + " labels");
  }
  double positives = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw ContractError("roc_auc: NaN score");
    if (labels[i] != 0 && labels[i] != 1) throw ContractError("roc_auc: labels must be 0 or 1");
    positives += labels[i];
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw UndefinedMetricError("AUC needs at least one positive and one negative label");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney: sum of (average) ranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

std::vector<ScoreSeries> score_videos(const FramePredictor& model,
                                      const std::vector<VideoRecord>& videos,
                                      const ScoringOptions& opts) {
  const int horizon = model.config().horizon;
  std::vector<ScoreSeries> out;
  for (const VideoRecord& v : videos) {
    ScoreSeries s;
    s.video_id = v.video_id;
    s.losses = frame_losses(model, v, opts);
    for (std::size_t i = 0; i < s.losses.size(); ++i) {
      const int t = horizon + static_cast<int>(i);
      s.frame_indices.push_back(t);
      if (v.labels) s.labels.push_back((*v.labels)[static_cast<std::size_t>(t)]);
    }
    if (!s.losses.empty() && !opts.global_normalization) s.scores = normalize_scores(s.losses);
    out.push_back(std::move(s));
  }
  if (opts.global_normalization) {
    std::vector<double> all;
    for (const ScoreSeries& s : out) all.insert(all.end(), s.losses.begin(), s.losses.end());
    if (!all.empty()) {
      const std::vector<double> scores = normalize_scores(all);
      std::size_t k = 0;
      for (ScoreSeries& s : out) {
        s.scores.assign(scores.begin() + static_cast<std::ptrdiff_t>(k),
                        scores.begin() + static_cast<std::ptrdiff_t>(k + s.losses.size()));
        k += s.losses.size();
      }
    }
  }
  return out;
}

EvalReport evaluate(const FramePredictor& model, const std::vector<VideoRecord>& videos,
                    const ScoringOptions& opts) {
  for (const VideoRecord& v : videos) {
    if (!v.labels) throw DataError("video " + v.video_id + " has no labels");
    if (v.labels->size() != v.frames.size()) {
      throw DataError("video " + v.video_id + ": label count does not match frame count");
    }
  }
  EvalReport report;
  report.per_video = score_videos(model, videos, opts);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const ScoreSeries& s : report.per_video) {
    scores.insert(scores.end(), s.scores.begin(), s.scores.end());
    labels.insert(labels.end(), s.labels.begin(), s.labels.end());
  }
  for (int l : labels) (l == 1 ? report.num_positive : report.num_negative)++;
  report.auc = roc_auc(scores, labels);
  return report;
}

void write_score_csv(const std::vector<ScoreSeries>& series, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "video_id,frame_index,loss,score,label\n";
  for (const ScoreSeries& s : series) {
    for (std::size_t i = 0; i < s.losses.size(); ++i) {
      out << s.video_id << ',' << s.frame_indices[i] << ',' << format_g(s.losses[i], 9) << ','
          << format_g(s.scores[i], 17) << ',';
      if (!s.labels.empty()) out << s.labels[i];
      out << '\n';
    }
  }
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<ScoreSeries> read_score_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "video_id,frame_index,loss,score,label") {
    throw ParseError(path.string() + ": unexpected score CSV header", 1);
  }
  std::vector<ScoreSeries> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() == 4 && line.back() == ',') cols.emplace_back();
    if (cols.size() != 5) throw ParseError(path.string() + ": expected 5 columns", line_no);
    if (out.empty() || out.back().video_id != cols[0]) {
      out.emplace_back();
      out.back().video_id = cols[0];
    }
    ScoreSeries& s = out.back();
    try {
      s.frame_indices.push_back(std::stoi(cols[1]));
      s.losses.push_back(std::stod(cols[2]));
      s.scores.push_back(std::stod(cols[3]));
      if (!cols[4].empty()) s.labels.push_back(std::stoi(cols[4]));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": malformed number", line_no);
    }
  }
  return out;
}

void write_report(const EvalReport& report, const std::map<std::string, std::string>& extra,
                  const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "auc=" << format_g(report.auc, 17) << '\n';
  out << "num_positive=" << report.num_positive << '\n';
  out << "num_negative=" << report.num_negative << '\n';
  out << "num_videos=" << report.per_video.size() << '\n';
  for (const ScoreSeries& s : report.per_video) {
    if (s.labels.empty()) continue;
    std::size_t pos = 0;
    for (int l : s.labels) pos += static_cast<std::size_t>(l);
    if (pos > 0 && pos < s.labels.size()) {
      out << "auc." << s.video_id << '=' << format_g(roc_auc(s.scores, s.labels), 17) << '\n';
    }
  }
  for (const auto& [k, v] : extra) out << k << '=' << v << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

}  // namespace cvrnn
