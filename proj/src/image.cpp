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

#include "visrec/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "visrec/error.hpp"

namespace visrec {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {
    }

    void
    skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long
    read_int() {
        skip_space_and_comments();
        long value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000) {
                throw Error(ErrorCode::kImageMalformed, "ppm: header value too large");
            }
            ++pos_;
            ++digits;
        }
        if (digits == 0) {
            throw Error(ErrorCode::kImageMalformed, "ppm: expected integer in header");
        }
        return value;
    }

    std::size_t pos_ = 0;
    std::string_view bytes_;
};

}  // namespace

Image
decode_ppm(std::string_view bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw Error(ErrorCode::kImageMalformed, "ppm: missing P6 magic");
    }
    HeaderReader reader(bytes);
    reader.pos_ = 2;
    long width = reader.read_int();
    long height = reader.read_int();
    long maxval = reader.read_int();
    if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::kImageMalformed, "ppm: non-positive dimensions");
    }
    if (maxval != 255) {
        throw Error(ErrorCode::kImageMalformed, "ppm: only maxval 255 is supported");
    }
    // exactly one whitespace byte separates the header from the raster
    if (reader.pos_ >= bytes.size() ||
        !std::isspace(static_cast<unsigned char>(bytes[reader.pos_]))) {
        throw Error(ErrorCode::kImageMalformed, "ppm: truncated header");
    }
    ++reader.pos_;
    Image image(static_cast<int>(width), static_cast<int>(height));
    if (bytes.size() - reader.pos_ != image.data.size()) {
        throw Error(ErrorCode::kImageMalformed,
                    "ppm: raster has " + std::to_string(bytes.size() - reader.pos_) +
                        " bytes, expected " + std::to_string(image.data.size()));
    }
    std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos_), bytes.end(),
              image.data.begin());
    return image;
}

Image
decode_ppm(std::span<const std::uint8_t> bytes) {
    return decode_ppm(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string
encode_ppm(const Image& image) {
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(image.data.data()), image.data.size());
    return out;
}

Image
read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::kIo, "cannot open image " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_ppm(std::string_view(bytes));
}

void
write_ppm(const std::filesystem::path& path, const Image& image) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::kIo, "cannot write image " + path.string());
    }
    auto bytes = encode_ppm(image);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace visrec
