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

#include <stdexcept>
#include <string>
#include <string_view>

namespace visrec {

// Machine-readable failure categories. The string form is what clients of
// the HTTP service and the CLI see.
enum class ErrorCode {
    kConfig,
    kDimensionMismatch,
    kNumeric,
    kDiverged,
    kImageMalformed,
    kImageDimension,
    kIo,
    kFormat,
    kUnknownId,
    kDuplicateId,
    kUnknownBiss,
    kStaleVetting,
    kOutOfOrder,
    kInvalidArgument,
};

constexpr std::string_view
code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::kConfig:
            return "CONFIG";
        case ErrorCode::kDimensionMismatch:
            return "DIM_MISMATCH";
        case ErrorCode::kNumeric:
            return "NUMERIC";
        case ErrorCode::kDiverged:
            return "DIVERGED";
        case ErrorCode::kImageMalformed:
            return "IMG_MALFORMED";
        case ErrorCode::kImageDimension:
            return "IMG_DIM";
        case ErrorCode::kIo:
            return "IO";
        case ErrorCode::kFormat:
            return "FORMAT";
        case ErrorCode::kUnknownId:
            return "UNKNOWN_ID";
        case ErrorCode::kDuplicateId:
            return "DUPLICATE_ID";
        case ErrorCode::kUnknownBiss:
            return "UNKNOWN_BISS";
        case ErrorCode::kStaleVetting:
            return "STALE_VETTING";
        case ErrorCode::kOutOfOrder:
            return "OUT_OF_ORDER";
        case ErrorCode::kInvalidArgument:
            return "INVALID_ARGUMENT";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {
    }

    ErrorCode
    code() const noexcept {
        return code_;
    }

private:
    ErrorCode code_;
};

}  // namespace visrec
