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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace visrec {

/// 8-bit RGB raster, row-major with interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    static constexpr int kChannels = 3;

    Image() = default;
    Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * kChannels, 0) {
    }

    std::uint8_t&
    at(int x, int y, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }
    std::uint8_t
    at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }

    void
    set_pixel(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        auto* p = &data[(static_cast<std::size_t>(y) * width + x) * kChannels];
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    std::size_t
    pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }

    bool
    operator==(const Image&) const = default;
};

// Binary PPM (P6, maxval 255). Anything else is rejected with
// ErrorCode::kImageMalformed.
Image
decode_ppm(std::span<const std::uint8_t> bytes);
Image
decode_ppm(std::string_view bytes);
std::string
encode_ppm(const Image& image);

Image
read_ppm(const std::filesystem::path& path);
void
write_ppm(const std::filesystem::path& path, const Image& image);

}  // namespace visrec
