// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cvrnn/conv_vrnn.hpp"
#include "cvrnn/tensor.hpp"

namespace cvrnn {

/// One video as [C, H, W] frames in [0, 1], with optional per-frame labels (1 = anomalous).
struct VideoRecord {
  std::string video_id;
  std::vector<Tensor> frames;
  std::optional<std::vector<int>> labels;
};

enum class AnomalyKind { kNone, kIntruderSprite, kSpeedChange };

std::string to_string(AnomalyKind kind);
/// Accepts "none", "intruder" / "intruder-sprite", "speed" / "speed-change".
AnomalyKind parse_anomaly_kind(const std::string& name);

/// Parameters of a synthetic moving-sprite video.
struct SynthSpec {
  std::string video_id = "synth";
  int image_size = 64;
  int channels = 1;
  int num_frames = 120;
  int sprite_size = 16;
  int velocity = 2;  ///< pixels per frame along each axis
  AnomalyKind anomaly_kind = AnomalyKind::kNone;
  int anomaly_begin = 0;  ///< anomalous frames are [anomaly_begin, anomaly_end)
  int anomaly_end = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Reads every PNG/JPEG in `dir` in lexicographic order, converts to
/// `channels` (1 or 3), bilinearly resizes to image_size x image_size and scales to [0, 1].
VideoRecord load_video(const std::filesystem::path& dir, int image_size, int channels);

/// One 0/1 integer per line; a single trailing newline is allowed.
std::vector<int> load_labels(const std::filesystem::path& path);
std::vector<int> parse_labels(const std::string& text);

/// Windows starting at 0, stride, 2*stride, ... whose target is frame start+T.
/// Returns an empty list for videos shorter than T+1.
std::vector<ClipWindow> window_iter(const VideoRecord& video, int horizon, int stride);

/// Renders a white square sprite on black with constant-velocity motion and
/// edge reflection. An intruder adds a second, cross-shaped sprite during the
/// anomaly span; a speed change triples the velocity there. Labels are 1
/// exactly on the span. Pure function of `spec`.
VideoRecord synth_video(const SynthSpec& spec);

/// Writes frames as 6-digit zero-padded PNGs (8-bit) into `dir`.
void write_video_frames(const VideoRecord& video, const std::filesystem::path& dir);
void write_labels(const std::vector<int>& labels, const std::filesystem::path& path);

/// Canonical dataset layout:
///   root/{training,testing}/frames/<video_id>/NNNNNN.png
///   root/testing/labels/<video_id>.txt
struct DatasetLayout {
  std::filesystem::path root;

  std::filesystem::path frames_dir(const std::string& split) const {
    return root / split / "frames";
  }
  std::filesystem::path labels_dir(const std::string& split) const {
    return root / split / "labels";
  }
};

/// Loads every video of `split` ("training" or "testing"), sorted by id.
/// Labels are attached when present; `require_labels` turns a missing label
/// file into a DataError.
std::vector<VideoRecord> load_split(const DatasetLayout& layout, const std::string& split,
                                    int image_size, int channels, bool require_labels);

/// Writes a video (frames and, when present, labels) into the layout.
void export_video(const DatasetLayout& layout, const std::string& split, const VideoRecord& video);

}  // namespace cvrnn
