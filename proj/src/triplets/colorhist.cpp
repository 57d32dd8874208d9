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

#include "visrec/triplets/colorhist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>

#include "visrec/error.hpp"

namespace visrec::triplets {

namespace {

double
srgb_to_linear(std::uint8_t v) {
    double c = v / 255.0;
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double
lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

int
axis_bin(double v, double lo, double hi) {
    int bin = static_cast<int>(std::floor((v - lo) / (hi - lo) * kBinsPerAxis));
    return std::clamp(bin, 0, kBinsPerAxis - 1);
}

bool
near(const Image& image, std::size_t pixel, const std::array<int, 3>& ref, int tolerance) {
    for (int c = 0; c < 3; ++c) {
        if (std::abs(image.data[pixel * 3 + static_cast<std::size_t>(c)] - ref[static_cast<std::size_t>(c)]) >
            tolerance) {
            return false;
        }
    }
    return true;
}

}  // namespace

Lab
srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    double r = srgb_to_linear(r8);
    double g = srgb_to_linear(g8);
    double b = srgb_to_linear(b8);
    double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    double fx = lab_f(x / 0.95047);
    double fy = lab_f(y / 1.0);
    double fz = lab_f(z / 1.08883);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

int
lab_bin(const Lab& lab) {
    return axis_bin(lab.l, kLabLMin, kLabLMax) * kBinsPerAxis * kBinsPerAxis +
           axis_bin(lab.a, kLabABMin, kLabABMax) * kBinsPerAxis + axis_bin(lab.b, kLabABMin, kLabABMax);
}

std::vector<bool>
foreground_mask(const Image& image, int tolerance) {
    const int w = image.width;
    const int h = image.height;
    std::vector<bool> foreground(image.pixel_count(), true);
    if (w <= 0 || h <= 0) {
        return foreground;
    }
    std::vector<std::size_t> border;
    for (int x = 0; x < w; ++x) {
        border.push_back(static_cast<std::size_t>(x));
        if (h > 1) {
            border.push_back(static_cast<std::size_t>(h - 1) * w + x);
        }
    }
    for (int y = 1; y + 1 < h; ++y) {
        border.push_back(static_cast<std::size_t>(y) * w);
        if (w > 1) {
            border.push_back(static_cast<std::size_t>(y) * w + w - 1);
        }
    }
    // reference background colour: per-channel median of the border
    std::array<int, 3> ref{};
    for (int c = 0; c < 3; ++c) {
        std::vector<int> values;
        values.reserve(border.size());
        for (auto p : border) {
            values.push_back(image.data[p * 3 + static_cast<std::size_t>(c)]);
        }
        std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2), values.end());
        ref[static_cast<std::size_t>(c)] = values[values.size() / 2];
    }
    std::size_t uniform = 0;
    for (auto p : border) {
        uniform += near(image, p, ref, tolerance) ? 1 : 0;
    }
    // a border that is not near-uniform means there is no separable background
    if (uniform * 10 < border.size() * 9) {
        return foreground;
    }
    std::deque<std::size_t> queue;
    for (auto p : border) {
        if (foreground[p] && near(image, p, ref, tolerance)) {
            foreground[p] = false;
            queue.push_back(p);
        }
    }
    while (!queue.empty()) {
        std::size_t p = queue.front();
        queue.pop_front();
        int x = static_cast<int>(p % static_cast<std::size_t>(w));
        int y = static_cast<int>(p / static_cast<std::size_t>(w));
        const std::array<std::array<int, 2>, 4> steps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (const auto& s : steps) {
            int nx = x + s[0];
            int ny = y + s[1];
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                continue;
            }
            std::size_t q = static_cast<std::size_t>(ny) * w + nx;
            if (foreground[q] && near(image, q, ref, tolerance)) {
                foreground[q] = false;
                queue.push_back(q);
            }
        }
    }
    return foreground;
}

ColorHistogram
colorhist_features(const Image& image, MaskMode mode) {
    if (image.width <= 0 || image.height <= 0 || image.data.size() != image.pixel_count() * 3) {
        throw Error(ErrorCode::kImageMalformed, "colorhist: invalid image");
    }
    ColorHistogram out;
    std::vector<bool> mask = mode == MaskMode::kForeground ? foreground_mask(image)
                                                           : std::vector<bool>(image.pixel_count(), true);
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
        mask.assign(image.pixel_count(), true);
        out.used_fallback = true;
    }
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(kHistogramSize);
    double total = 0;
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        if (!mask[p]) {
            continue;
        }
        Lab lab = srgb_to_lab(image.data[p * 3], image.data[p * 3 + 1], image.data[p * 3 + 2]);
        counts[lab_bin(lab)] += 1.0;
        total += 1.0;
    }
    out.bins = (counts / total).cast<float>();
    return out;
}

}  // namespace visrec::triplets
