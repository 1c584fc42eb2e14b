// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "cvrnn/conv_vrnn.hpp"
#include "cvrnn/objectives.hpp"

namespace cvrnn {

/// Ordered key=value pairs, the format of config files, manifests and the
/// config echo stored in checkpoints.
using KeyValues = std::map<std::string, std::string>;

/// Parses "key=value" lines; blank lines and lines starting with '#' are skipped.
/// Throws ParseError on a line without '='.
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::string& path);
std::string to_text(const KeyValues& kv);

/// 64-bit FNV-1a, printed as 16 hex digits by hash_hex.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

/// Everything that defines a training run.
struct TrainConfig {
  ModelKind model_kind = ModelKind::kConvVrnn;
  ModelConfig model;
  LossConfig loss;
  int steps = 2000;
  int batch_size = 8;
  double learning_rate = 2e-4;
  double beta = 1.0;
  std::optional<double> grad_clip = 5.0;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  ///< 0 keeps only the final checkpoint
  int train_stride = 1;
  /// Also penalize the intermediate next-frame predictions inside a clip.
  bool per_step_loss = false;

  void validate() const;
};

/// Serializes with the CLI flag names as keys (e.g. "image-size", "no-msssim").
KeyValues to_key_values(const TrainConfig& cfg);
/// Overlays `kv` on `base`; unknown keys and malformed values throw ConfigError.
TrainConfig apply_key_values(TrainConfig base, const KeyValues& kv);
/// Hash of the canonical key=value text.
std::string config_hash(const TrainConfig& cfg);

/// Desk-scale defaults: 64x64 grayscale frames, 8x8 features.
TrainConfig desk_scale_config();

}  // namespace cvrnn
