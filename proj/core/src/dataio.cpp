// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cvrnn/errors.hpp"

namespace fs = std::filesystem;

namespace cvrnn {
namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

Tensor mat_to_tensor(const cv::Mat& img, int channels) {
  const int h = img.rows;
  const int w = img.cols;
  Tensor t({channels, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (channels == 1) {
        t[static_cast<std::size_t>(y * w + x)] = img.at<std::uint8_t>(y, x) / 255.0;
      } else {
        const cv::Vec3b px = img.at<cv::Vec3b>(y, x);
        for (int c = 0; c < 3; ++c) {
          // OpenCV stores BGR; tensors are RGB.
          t[static_cast<std::size_t>((c * h + y) * w + x)] = px[2 - c] / 255.0;
        }
      }
    }
  }
  return t;
}

cv::Mat tensor_to_mat(const Tensor& t) {
  const int c = t.dim(0);
  const int h = t.dim(1);
  const int w = t.dim(2);
  auto to_byte = [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  if (c == 1) {
    cv::Mat img(h, w, CV_8UC1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) img.at<std::uint8_t>(y, x) = to_byte(t[static_cast<std::size_t>(y * w + x)]);
    }
    return img;
  }
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      cv::Vec3b& px = img.at<cv::Vec3b>(y, x);
      for (int k = 0; k < 3; ++k) px[2 - k] = to_byte(t[static_cast<std::size_t>((k * h + y) * w + x)]);
    }
  }
  return img;
}

// Advances one coordinate by `step`, reflecting off [0, hi].
void reflect_move(int& pos, int& vel, int step, int hi) {
  pos += step;
  while (pos < 0 || pos > hi) {
    if (pos < 0) pos = -pos;
    if (pos > hi) pos = 2 * hi - pos;
    vel = -vel;
  }
}

struct Mover {
  int x, y, vx, vy;

  void advance(int multiplier, int hi) {
    int svx = vx;
    int svy = vy;
    reflect_move(x, svx, vx * multiplier, hi);
    reflect_move(y, svy, vy * multiplier, hi);
    vx = svx;
    vy = svy;
  }
};

void paint_square(Tensor& frame, int x0, int y0, int size) {
  const int c = frame.dim(0);
  const int n = frame.dim(1);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = y0; y < std::min(n, y0 + size); ++y) {
      for (int x = x0; x < std::min(n, x0 + size); ++x) frame[static_cast<std::size_t>((ch * n + y) * n + x)] = 1.0;
    }
  }
}

void paint_cross(Tensor& frame, int x0, int y0, int size) {
  const int c = frame.dim(0);
  const int n = frame.dim(1);
  const int arm = std::max(1, size / 3);
  const int lo = (size - arm) / 2;
  for (int ch = 0; ch < c; ++ch) {
    for (int dy = 0; dy < size; ++dy) {
      for (int dx = 0; dx < size; ++dx) {
        const bool on = (dx >= lo && dx < lo + arm) || (dy >= lo && dy < lo + arm);
        const int x = x0 + dx;
        const int y = y0 + dy;
        if (on && x < n && y < n) frame[static_cast<std::size_t>((ch * n + y) * n + x)] = 1.0;
      }
    }
  }
}

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.png", i);
  return buf;
}

}  // namespace

std::string to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kNone: return "none";
    case AnomalyKind::kIntruderSprite: return "intruder-sprite";
    case AnomalyKind::kSpeedChange: return "speed-change";
  }
  return "unknown";
}

AnomalyKind parse_anomaly_kind(const std::string& name) {
  if (name == "none") return AnomalyKind::kNone;
  if (name == "intruder" || name == "intruder-sprite") return AnomalyKind::kIntruderSprite;
  if (name == "speed" || name == "speed-change") return AnomalyKind::kSpeedChange;
  throw ConfigError("unknown anomaly kind '" + name + "'");
}

void SynthSpec::validate() const {
  if (image_size <= 0 || num_frames <= 0 || sprite_size <= 0 || velocity < 0) {
    throw ConfigError("synthetic video sizes must be positive");
  }
  if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
  if (sprite_size > image_size) {
    throw ConfigError("sprite size " + std::to_string(sprite_size) + " exceeds image size " +
                      std::to_string(image_size));
  }
  if (anomaly_kind != AnomalyKind::kNone &&
      (anomaly_begin < 0 || anomaly_end > num_frames || anomaly_begin >= anomaly_end)) {
    throw ConfigError("anomaly span [" + std::to_string(anomaly_begin) + ", " +
                      std::to_string(anomaly_end) + ") is not inside [0, " +
                      std::to_string(num_frames) + ")");
  }
}

VideoRecord load_video(const fs::path& dir, int image_size, int channels) {
  if (channels != 1 && channels != 3) throw ConfigError("channels must be 1 or 3");
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  if (files.empty()) throw DataError("no image files in " + dir.string());
  std::sort(files.begin(), files.end());

  VideoRecord video;
  video.video_id = dir.filename().string();
  video.frames.reserve(files.size());
  for (const fs::path& f : files) {
    cv::Mat img = cv::imread(f.string(), channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
    if (img.empty()) throw DataError("cannot decode image " + f.string());
    if (img.rows != image_size || img.cols != image_size) {
      cv::Mat resized;
      cv::resize(img, resized, cv::Size(image_size, image_size), 0, 0, cv::INTER_LINEAR);
      img = resized;
    }
    video.frames.push_back(mat_to_tensor(img, channels));
  }
  return video;
}

std::vector<int> parse_labels(const std::string& text) {
  std::vector<int> labels;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  for (const std::string& raw : lines) {
    ++line_no;
    std::string tok = raw;
    while (!tok.empty() && std::isspace(static_cast<unsigned char>(tok.back()))) tok.pop_back();
    std::size_t first = 0;
    while (first < tok.size() && std::isspace(static_cast<unsigned char>(tok[first]))) ++first;
    tok = tok.substr(first);
    if (tok == "0" || tok == "1") {
      labels.push_back(tok == "1" ? 1 : 0);
    } else {
      throw ParseError("label must be 0 or 1, got '" + tok + "'", line_no);
    }
  }
  if (labels.empty()) throw DataError("label file is empty");
  return labels;
}

std::vector<int> load_labels(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open label file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_labels(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": label must be 0 or 1", e.line());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<ClipWindow> window_iter(const VideoRecord& video, int horizon, int stride) {
  if (horizon <= 0 || stride <= 0) throw ConfigError("horizon and stride must be positive");
  std::vector<ClipWindow> windows;
  const int n = static_cast<int>(video.frames.size());
  for (int start = 0; start + horizon < n; start += stride) {
    ClipWindow w;
    w.video_id = video.video_id;
    w.start_index = start;
    w.inputs.assign(video.frames.begin() + start, video.frames.begin() + start + horizon);
    w.target = video.frames[static_cast<std::size_t>(start + horizon)];
    windows.push_back(std::move(w));
  }
  return windows;
}

VideoRecord synth_video(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int hi = spec.image_size - spec.sprite_size;
  std::uniform_int_distribution<int> pos(0, hi);
  std::bernoulli_distribution coin(0.5);
  Mover sprite{pos(rng), pos(rng), coin(rng) ? spec.velocity : -spec.velocity,
               coin(rng) ? spec.velocity : -spec.velocity};

  const int intruder_size = std::min(spec.image_size, spec.sprite_size + 4);
  const int intruder_hi = spec.image_size - intruder_size;
  std::uniform_int_distribution<int> ipos(0, intruder_hi);
  const int iv = spec.velocity + 1;
  Mover intruder{ipos(rng), ipos(rng), coin(rng) ? iv : -iv, coin(rng) ? iv : -iv};

  auto in_span = [&spec](int f) {
    return spec.anomaly_kind != AnomalyKind::kNone && f >= spec.anomaly_begin && f < spec.anomaly_end;
  };

  VideoRecord video;
  video.video_id = spec.video_id;
  video.labels = std::vector<int>(static_cast<std::size_t>(spec.num_frames), 0);
  for (int f = 0; f < spec.num_frames; ++f) {
    if (f > 0) {
      const bool fast = spec.anomaly_kind == AnomalyKind::kSpeedChange && in_span(f);
      sprite.advance(fast ? 3 : 1, hi);
    }
    Tensor frame({spec.channels, spec.image_size, spec.image_size});
    paint_square(frame, sprite.x, sprite.y, spec.sprite_size);
    if (spec.anomaly_kind == AnomalyKind::kIntruderSprite && in_span(f)) {
      if (f > spec.anomaly_begin) intruder.advance(1, intruder_hi);
      paint_cross(frame, intruder.x, intruder.y, intruder_size);
    }
    if (in_span(f)) (*video.labels)[static_cast<std::size_t>(f)] = 1;
    video.frames.push_back(std::move(frame));
  }
  return video;
}

void write_video_frames(const VideoRecord& video, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    const fs::path p = dir / frame_name(i);
    if (!cv::imwrite(p.string(), tensor_to_mat(video.frames[i]))) {
      throw DataError("cannot write " + p.string());
    }
  }
}

void write_labels(const std::vector<int>& labels, const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<VideoRecord> load_split(const DatasetLayout& layout, const std::string& split,
                                    int image_size, int channels, bool require_labels) {
  const fs::path frames_root = layout.frames_dir(split);
  if (!fs::is_directory(frames_root)) throw DataError("missing directory " + frames_root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(frames_root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  if (dirs.empty()) throw DataError("no videos under " + frames_root.string());
  std::sort(dirs.begin(), dirs.end());

  std::vector<VideoRecord> videos;
  for (const fs::path& d : dirs) {
    VideoRecord v = load_video(d, image_size, channels);
    const fs::path label_path = layout.labels_dir(split) / (v.video_id + ".txt");
    if (fs::exists(label_path)) {
      v.labels = load_labels(label_path);
      if (v.labels->size() != v.frames.size()) {
        throw DataError(label_path.string() + " has " + std::to_string(v.labels->size()) +
                        " labels for " + std::to_string(v.frames.size()) + " frames");
      }
    } else if (require_labels) {
      throw DataError("missing labels for video " + v.video_id + " (" + label_path.string() + ")");
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

void export_video(const DatasetLayout& layout, const std::string& split, const VideoRecord& video) {
  write_video_frames(video, layout.frames_dir(split) / video.video_id);
  if (video.labels) write_labels(*video.labels, layout.labels_dir(split) / (video.video_id + ".txt"));
}

}  // namespace cvrnn
