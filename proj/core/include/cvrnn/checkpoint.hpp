// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cvrnn/autograd.hpp"
#include "cvrnn/config.hpp"
#include "cvrnn/conv_vrnn.hpp"
#include "cvrnn/nn.hpp"

namespace cvrnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Trained parameters plus everything needed to rebuild the model.
struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  TrainConfig config;
  std::int64_t step = 0;
  std::string rng_state;  ///< textual std::mt19937_64 state
  std::vector<Parameter> tensors;
};

Checkpoint make_checkpoint(const FramePredictor& model, const TrainConfig& cfg, std::int64_t step,
                           const Rng& rng);

/// Builds the configured model and copies the stored tensors into it.
/// Throws CheckpointError on a missing, extra or mis-shaped tensor.
std::unique_ptr<FramePredictor> restore_model(const Checkpoint& ckpt);

/// Binary little-endian layout:
///   "CVRNNCKP" | u32 version | u64 len, config text | i64 step | u64 len, rng state |
///   u32 count | per tensor: u32 len, name | u32 rank | u64 dims[rank] | u8 dtype | f64 values
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Validates version, structure and shapes; throws CheckpointError on any defect.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cvrnn
