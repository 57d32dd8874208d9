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

#include "visrec/net/params.hpp"

namespace visrec::net {

std::string_view
role_name(TensorRole role) {
    switch (role) {
        case TensorRole::kConvWeight:
            return "conv_weight";
        case TensorRole::kConvBias:
            return "conv_bias";
        case TensorRole::kDenseWeight:
            return "dense_weight";
        case TensorRole::kDenseBias:
            return "dense_bias";
        case TensorRole::kProjectionWeight:
            return "projection_weight";
        case TensorRole::kProjectionBias:
            return "projection_bias";
    }
    return "unknown";
}

ParamLayout
ParamLayout::from_config(const NetConfig& config) {
    config.validate();
    ParamLayout layout;
    auto add = [&layout](std::string name, TensorRole role, Eigen::Index rows, Eigen::Index cols,
                         Eigen::Index fan_in) {
        layout.slots.push_back({std::move(name), role, layout.total, rows, cols, fan_in});
        layout.total += rows * cols;
        return static_cast<int>(layout.slots.size() - 1);
    };
    static constexpr std::array<const char*, kPathCount> kPathNames{"deep", "shallow1",
                                                                    "shallow2"};
    for (int p = 0; p < kPathCount; ++p) {
        TensorShape shape = config.input_shape();
        auto& slots = layout.layer_slot[static_cast<std::size_t>(p)];
        const auto& layers = config.path(p);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            std::string base = std::string(kPathNames[static_cast<std::size_t>(p)]) + "." +
                               std::to_string(i);
            if (l.kind == LayerKind::kConv) {
                Eigen::Index fan_in = static_cast<Eigen::Index>(shape.channels) * l.kernel * l.kernel;
                slots.push_back(add(base + ".w", TensorRole::kConvWeight, l.filters, fan_in, fan_in));
                add(base + ".b", TensorRole::kConvBias, l.filters, 1, fan_in);
            } else if (l.kind == LayerKind::kDense) {
                slots.push_back(
                    add(base + ".w", TensorRole::kDenseWeight, l.units, shape.size(), shape.size()));
                add(base + ".b", TensorRole::kDenseBias, l.units, 1, shape.size());
            } else {
                slots.push_back(-1);
            }
            shape = layer_output_shape(l, shape);
        }
    }
    layout.projection_offset = layout.total;
    if (config.reduced_dim > 0) {
        int full = config.full_dim();
        layout.projection_slot = add("projection.w", TensorRole::kProjectionWeight,
                                     config.reduced_dim, full, full);
        add("projection.b", TensorRole::kProjectionBias, config.reduced_dim, 1, full);
    }
    return layout;
}

namespace {

void
fill_he(Params<float>& params, int slot, std::mt19937_64& rng) {
    const auto& s = params.layout.slots[static_cast<std::size_t>(slot)];
    std::normal_distribution<float> dist(0.0F, std::sqrt(2.0F / static_cast<float>(s.fan_in)));
    auto t = params.tensor(slot);
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        t.data()[i] = dist(rng);
    }
}

}  // namespace

Params<float>
init_params(const NetConfig& config, std::uint64_t seed) {
    Params<float> params{ParamLayout::from_config(config), {}};
    params.values = VectorX<float>::Zero(params.layout.total);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < params.layout.slots.size(); ++i) {
        auto role = params.layout.slots[i].role;
        if (role == TensorRole::kConvWeight || role == TensorRole::kDenseWeight) {
            fill_he(params, static_cast<int>(i), rng);
        }
    }
    init_projection(params, config, seed ^ 0x9e3779b97f4a7c15ULL);
    return params;
}

void
init_projection(Params<float>& params, const NetConfig& config, std::uint64_t seed) {
    if (!params.has_projection()) {
        return;
    }
    int slot = params.layout.projection_slot;
    params.tensor(slot + 1).setZero();
    if (config.projection_init == ProjectionInit::kIdentity) {
        params.tensor(slot).setIdentity();
    } else {
        std::mt19937_64 rng(seed);
        // fan-in scaling without the ReLU gain: the projection is linear
        const auto& s = params.layout.slots[static_cast<std::size_t>(slot)];
        std::normal_distribution<float> dist(0.0F, std::sqrt(1.0F / static_cast<float>(s.fan_in)));
        auto t = params.tensor(slot);
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            t.data()[i] = dist(rng);
        }
    }
}

}  // namespace visrec::net
