// Copyright 2026-present the visrec project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "visrec/image.hpp"

namespace visrec::triplets {

struct Lab {
    double l = 0;
    double a = 0;
    double b = 0;
};

/// sRGB (8-bit) to CIELAB under the D65 white point.
Lab
srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

inline constexpr int kBinsPerAxis = 8;
inline constexpr int kHistogramSize = kBinsPerAxis * kBinsPerAxis * kBinsPerAxis;
inline constexpr double kLabLMin = 0.0;
inline constexpr double kLabLMax = 100.0;
inline constexpr double kLabABMin = -110.0;
inline constexpr double kLabABMax = 110.0;

/// Flat bin index (l * 64 + a * 8 + b); out-of-range values clamp to the
/// edge bins.
int
lab_bin(const Lab& lab);

/// Border-seeded flood fill over a near-uniform background. `true` marks
/// foreground. When the border itself is not near-uniform the whole image
/// is foreground.
std::vector<bool>
foreground_mask(const Image& image, int tolerance = 12);

enum class MaskMode { kForeground, kAll };

struct ColorHistogram {
    Eigen::VectorXf bins;  // L1-normalized, kHistogramSize entries
    bool used_fallback = false;  // foreground was empty, whole image used
};

ColorHistogram
colorhist_features(const Image& image, MaskMode mode = MaskMode::kForeground);

}  // namespace visrec::triplets
