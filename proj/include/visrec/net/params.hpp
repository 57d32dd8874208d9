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

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "visrec/embedding.hpp"
#include "visrec/net/config.hpp"

namespace visrec::net {

enum class TensorRole {
    kConvWeight,
    kConvBias,
    kDenseWeight,
    kDenseBias,
    kProjectionWeight,
    kProjectionBias,
};

std::string_view
role_name(TensorRole role);

/// One learnable tensor inside the flat parameter vector. Matrices are
/// column-major with `rows x cols`; biases have cols == 1.
struct TensorSlot {
    std::string name;
    TensorRole role;
    Eigen::Index offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index fan_in = 0;

    Eigen::Index
    size() const {
        return rows * cols;
    }
};

/// Declaration order of every tensor: deep path, shallow path 1, shallow
/// path 2 (weight then bias per layer), then the optional projection.
struct ParamLayout {
    std::vector<TensorSlot> slots;
    // slot index of each layer's weight, -1 for parameter-free layers
    std::array<std::vector<int>, kPathCount> layer_slot;
    int projection_slot = -1;
    Eigen::Index total = 0;
    Eigen::Index projection_offset = 0;  // == total when no projection

    static ParamLayout
    from_config(const NetConfig& config);
};

/// All learnable weights of the shared-weight embedding network. There is
/// exactly one copy regardless of how many triplet branches read it.
template <typename Scalar>
struct Params {
    ParamLayout layout;
    VectorX<Scalar> values;

    using ConstMap = Eigen::Map<const MatrixX<Scalar>>;
    using Map = Eigen::Map<MatrixX<Scalar>>;

    ConstMap
    tensor(int slot) const {
        const auto& s = layout.slots[static_cast<std::size_t>(slot)];
        return ConstMap(values.data() + s.offset, s.rows, s.cols);
    }
    Map
    tensor(int slot) {
        const auto& s = layout.slots[static_cast<std::size_t>(slot)];
        return Map(values.data() + s.offset, s.rows, s.cols);
    }

    bool
    has_projection() const {
        return layout.projection_slot >= 0;
    }

    template <typename Other>
    Params<Other>
    cast() const {
        return Params<Other>{layout, values.template cast<Other>()};
    }
};

/// He fan-in initialization, zero biases, deterministic in `seed`.
Params<float>
init_params(const NetConfig& config, std::uint64_t seed);

/// Re-initializes only the projection tensors according to config.projection_init.
void
init_projection(Params<float>& params, const NetConfig& config, std::uint64_t seed);

}  // namespace visrec::net
