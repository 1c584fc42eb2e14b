// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/plot.hpp"

#include <algorithm>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cvrnn/errors.hpp"

namespace cvrnn {

void plot_score_curve(const ScoreSeries& series, const std::filesystem::path& path, int width,
                      int height) {
  constexpr int kMargin = 30;
  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const int plot_w = width - 2 * kMargin;
  const int plot_h = height - 2 * kMargin;
  const std::size_t n = series.scores.size();
  auto x_of = [&](std::size_t i) {
    return kMargin + (n > 1 ? static_cast<int>(i * static_cast<std::size_t>(plot_w) / (n - 1)) : plot_w / 2);
  };
  auto y_of = [&](double s) {
    return kMargin + static_cast<int>((1.0 - std::clamp(s, 0.0, 1.0)) * plot_h);
  };

  // Anomalous spans.
  for (std::size_t i = 0; i < series.labels.size() && i < n; ++i) {
    if (series.labels[i] != 1) continue;
    const int x0 = x_of(i) - (n > 1 ? plot_w / static_cast<int>(2 * (n - 1)) : 1);
    const int x1 = x_of(i) + (n > 1 ? plot_w / static_cast<int>(2 * (n - 1)) : 1);
    cv::rectangle(img, cv::Point(x0, kMargin), cv::Point(x1, kMargin + plot_h),
                  cv::Scalar(200, 200, 255), cv::FILLED);
  }
  cv::rectangle(img, cv::Point(kMargin, kMargin), cv::Point(kMargin + plot_w, kMargin + plot_h),
                cv::Scalar(0, 0, 0), 1);
  for (std::size_t i = 1; i < n; ++i) {
    cv::line(img, cv::Point(x_of(i - 1), y_of(series.scores[i - 1])),
             cv::Point(x_of(i), y_of(series.scores[i])), cv::Scalar(160, 60, 0), 2, cv::LINE_AA);
  }
  cv::putText(img, series.video_id + "  S(t)", cv::Point(kMargin, kMargin - 8),
              cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  if (!series.frame_indices.empty()) {
    cv::putText(img, std::to_string(series.frame_indices.front()),
                cv::Point(kMargin, height - 10), cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0));
    cv::putText(img, std::to_string(series.frame_indices.back()),
                cv::Point(kMargin + plot_w - 20, height - 10), cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0));
  }
  if (!cv::imwrite(path.string(), img)) throw DataError("cannot write plot " + path.string());
}

}  // namespace cvrnn
