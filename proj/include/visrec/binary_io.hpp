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

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "visrec/error.hpp"

namespace visrec::bin {

// Little-endian encoders used by every on-disk container.

inline void
put_u8(std::string& out, std::uint8_t v) {
    out.push_back(static_cast<char>(v));
}

inline void
put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

inline void
put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

inline void
put_f32(std::string& out, float v) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void
put_str(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

/// Bounds-checked cursor over a byte buffer. Running past the end throws
/// ErrorCode::kFormat.
class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {
    }

    std::size_t
    position() const {
        return pos_;
    }
    std::size_t
    remaining() const {
        return bytes_.size() - pos_;
    }
    bool
    done() const {
        return pos_ == bytes_.size();
    }

    std::string_view
    take(std::size_t n) {
        if (n > remaining()) {
            throw Error(ErrorCode::kFormat, "unexpected end of data at offset " + std::to_string(pos_));
        }
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::uint8_t
    u8() {
        return static_cast<std::uint8_t>(take(1)[0]);
    }
    std::uint32_t
    u32() {
        auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(s[static_cast<std::size_t>(i)]);
        }
        return v;
    }
    std::uint64_t
    u64() {
        auto s = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | static_cast<std::uint8_t>(s[static_cast<std::size_t>(i)]);
        }
        return v;
    }
    float
    f32() {
        return std::bit_cast<float>(u32());
    }
    std::string
    str() {
        auto n = u32();
        return std::string(take(n));
    }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::string
read_file(const std::string& path);
/// Writes via a temporary file and rename so readers never see a torn file.
void
write_file_atomic(const std::string& path, std::string_view bytes);

}  // namespace visrec::bin
