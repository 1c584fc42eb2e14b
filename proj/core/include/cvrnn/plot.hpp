// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "cvrnn/scoring.hpp"

namespace cvrnn {

/// Renders S(t) against frame index as a PNG, shading labeled anomalous frames.
void plot_score_curve(const ScoreSeries& series, const std::filesystem::path& path,
                      int width = 640, int height = 240);

}  // namespace cvrnn
