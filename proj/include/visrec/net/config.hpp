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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace visrec::net {

enum class LayerKind { kConv, kMaxPool, kDense };

struct LayerSpec {
    LayerKind kind = LayerKind::kConv;
    int kernel = 3;
    int stride = 1;
    int pad = 0;
    int filters = 0;  // conv
    int units = 0;    // dense
    bool relu = true;

    static LayerSpec
    conv(int kernel, int stride, int pad, int filters) {
        return {LayerKind::kConv, kernel, stride, pad, filters, 0, true};
    }
    static LayerSpec
    pool(int kernel = 2, int stride = 2) {
        return {LayerKind::kMaxPool, kernel, stride, 0, 0, 0, false};
    }
    static LayerSpec
    dense(int units, bool relu = false) {
        return {LayerKind::kDense, 0, 1, 0, 0, units, relu};
    }

    bool
    operator==(const LayerSpec&) const = default;
};

struct TensorShape {
    int channels = 0;
    int height = 0;
    int width = 0;

    int
    size() const {
        return channels * height * width;
    }
    bool
    operator==(const TensorShape&) const = default;
};

enum class ProjectionInit { kHe, kIdentity };

/// Network topology: one deep path and two shallow paths run in parallel on
/// the same input, concatenated, optionally linearly projected, then
/// optionally L2-normalized.
struct NetConfig {
    int input_height = 32;
    int input_width = 32;
    std::array<float, 3> input_mean{0.0F, 0.0F, 0.0F};

    std::vector<LayerSpec> deep;
    std::array<std::vector<LayerSpec>, 2> shallow;

    int reduced_dim = 0;  // 0 disables the projection stage
    ProjectionInit projection_init = ProjectionInit::kHe;
    float margin = 0.2F;
    bool normalize = true;

    /// Desk-scale default: 32x32 input, VGG-style deep path (192-d total).
    static NetConfig
    desk_default();

    /// Throws ErrorCode::kConfig when the topology cannot be evaluated.
    void
    validate() const;

    TensorShape
    input_shape() const {
        return {3, input_height, input_width};
    }
    /// Flattened output size of the given path (0 = deep, 1/2 = shallow).
    int
    path_output_dim(int path) const;
    const std::vector<LayerSpec>&
    path(int index) const {
        return index == 0 ? deep : shallow[static_cast<std::size_t>(index - 1)];
    }
    int
    full_dim() const;
    int
    output_dim() const {
        return reduced_dim > 0 ? reduced_dim : full_dim();
    }

    bool
    operator==(const NetConfig&) const = default;
};

static constexpr int kPathCount = 3;

TensorShape
layer_output_shape(const LayerSpec& layer, const TensorShape& in);

void
to_json(nlohmann::json& j, const NetConfig& config);
void
from_json(const nlohmann::json& j, NetConfig& config);

NetConfig
load_net_config(const std::string& path);

}  // namespace visrec::net
