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

#include "visrec/net/config.hpp"

#include <fstream>

#include "visrec/error.hpp"

namespace visrec::net {

using nlohmann::json;

NetConfig
NetConfig::desk_default() {
    NetConfig c;
    c.deep = {
        LayerSpec::conv(3, 1, 1, 16), LayerSpec::conv(3, 1, 1, 16), LayerSpec::pool(),
        LayerSpec::conv(3, 1, 1, 32), LayerSpec::conv(3, 1, 1, 32), LayerSpec::pool(),
        LayerSpec::conv(3, 1, 1, 64), LayerSpec::conv(3, 1, 1, 64), LayerSpec::pool(),
        LayerSpec::dense(128),
    };
    c.shallow[0] = {LayerSpec::conv(8, 4, 0, 8), LayerSpec::pool(), LayerSpec::dense(32)};
    c.shallow[1] = {LayerSpec::conv(16, 8, 0, 8), LayerSpec::dense(32)};
    return c;
}

TensorShape
layer_output_shape(const LayerSpec& layer, const TensorShape& in) {
    switch (layer.kind) {
        case LayerKind::kConv: {
            int h = (in.height + 2 * layer.pad - layer.kernel) / layer.stride + 1;
            int w = (in.width + 2 * layer.pad - layer.kernel) / layer.stride + 1;
            if (in.height + 2 * layer.pad < layer.kernel || in.width + 2 * layer.pad < layer.kernel) {
                h = w = 0;
            }
            return {layer.filters, h, w};
        }
        case LayerKind::kMaxPool: {
            if (in.height < layer.kernel || in.width < layer.kernel) {
                return {in.channels, 0, 0};
            }
            return {in.channels, (in.height - layer.kernel) / layer.stride + 1,
                    (in.width - layer.kernel) / layer.stride + 1};
        }
        case LayerKind::kDense:
            return {layer.units, 1, 1};
    }
    return {};
}

namespace {

TensorShape
walk_path(const NetConfig& config, int path, bool check) {
    TensorShape shape = config.input_shape();
    const auto& layers = config.path(path);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& layer = layers[i];
        if (check) {
            std::string where = "path " + std::to_string(path) + " layer " + std::to_string(i);
            if (layer.stride <= 0 || (layer.kind != LayerKind::kDense && layer.kernel <= 0)) {
                throw Error(ErrorCode::kConfig, where + ": kernel and stride must be positive");
            }
            if (layer.kind == LayerKind::kConv && (layer.filters <= 0 || layer.pad < 0)) {
                throw Error(ErrorCode::kConfig, where + ": conv needs filters > 0 and pad >= 0");
            }
            if (layer.kind == LayerKind::kDense && layer.units <= 0) {
                throw Error(ErrorCode::kConfig, where + ": dense needs units > 0");
            }
        }
        shape = layer_output_shape(layer, shape);
        if (check && shape.size() <= 0) {
            throw Error(ErrorCode::kConfig,
                        "path " + std::to_string(path) + " layer " + std::to_string(i) +
                            ": spatial size collapses to zero");
        }
    }
    return shape;
}

}  // namespace

int
NetConfig::path_output_dim(int path) const {
    return walk_path(*this, path, false).size();
}

int
NetConfig::full_dim() const {
    int total = 0;
    for (int p = 0; p < kPathCount; ++p) {
        total += path_output_dim(p);
    }
    return total;
}

void
NetConfig::validate() const {
    if (input_height <= 0 || input_width <= 0) {
        throw Error(ErrorCode::kConfig, "input size must be positive");
    }
    for (int p = 0; p < kPathCount; ++p) {
        if (path(p).empty()) {
            throw Error(ErrorCode::kConfig, "path " + std::to_string(p) + " has no layers");
        }
        walk_path(*this, p, true);
    }
    if (reduced_dim < 0) {
        throw Error(ErrorCode::kConfig, "reduced_dim must be >= 0");
    }
    if (reduced_dim > full_dim()) {
        throw Error(ErrorCode::kConfig, "reduced_dim " + std::to_string(reduced_dim) +
                                            " exceeds full embedding dim " +
                                            std::to_string(full_dim()));
    }
    if (!(margin >= 0.0F)) {
        throw Error(ErrorCode::kConfig, "margin must be >= 0");
    }
}

namespace {

json
layer_to_json(const LayerSpec& l) {
    switch (l.kind) {
        case LayerKind::kConv:
            return {{"type", "conv"},       {"kernel", l.kernel}, {"stride", l.stride},
                    {"pad", l.pad},         {"filters", l.filters}, {"relu", l.relu}};
        case LayerKind::kMaxPool:
            return {{"type", "pool"}, {"kernel", l.kernel}, {"stride", l.stride}};
        case LayerKind::kDense:
            return {{"type", "dense"}, {"units", l.units}, {"relu", l.relu}};
    }
    return {};
}

LayerSpec
layer_from_json(const json& j) {
    auto type = j.at("type").get<std::string>();
    LayerSpec l;
    if (type == "conv") {
        l = LayerSpec::conv(j.at("kernel").get<int>(), j.value("stride", 1), j.value("pad", 0),
                            j.at("filters").get<int>());
        l.relu = j.value("relu", true);
    } else if (type == "pool") {
        l = LayerSpec::pool(j.value("kernel", 2), j.value("stride", 2));
    } else if (type == "dense") {
        l = LayerSpec::dense(j.at("units").get<int>(), j.value("relu", false));
    } else {
        throw Error(ErrorCode::kConfig, "unknown layer type '" + type + "'");
    }
    return l;
}

json
path_to_json(const std::vector<LayerSpec>& layers) {
    json arr = json::array();
    for (const auto& l : layers) {
        arr.push_back(layer_to_json(l));
    }
    return arr;
}

std::vector<LayerSpec>
path_from_json(const json& j) {
    std::vector<LayerSpec> layers;
    for (const auto& l : j) {
        layers.push_back(layer_from_json(l));
    }
    return layers;
}

}  // namespace

void
to_json(json& j, const NetConfig& c) {
    j = json{
        {"input", {{"height", c.input_height}, {"width", c.input_width}, {"mean", c.input_mean}}},
        {"deep", path_to_json(c.deep)},
        {"shallow1", path_to_json(c.shallow[0])},
        {"shallow2", path_to_json(c.shallow[1])},
        {"reduced_dim", c.reduced_dim},
        {"projection_init", c.projection_init == ProjectionInit::kIdentity ? "identity" : "he"},
        {"margin", c.margin},
        {"normalize", c.normalize},
    };
}

void
from_json(const json& j, NetConfig& c) {
    try {
        c = NetConfig::desk_default();
        if (j.contains("input")) {
            const auto& in = j.at("input");
            c.input_height = in.value("height", c.input_height);
            c.input_width = in.value("width", c.input_width);
            if (in.contains("mean")) {
                c.input_mean = in.at("mean").get<std::array<float, 3>>();
            }
        }
        if (j.contains("deep")) {
            c.deep = path_from_json(j.at("deep"));
        }
        if (j.contains("shallow1")) {
            c.shallow[0] = path_from_json(j.at("shallow1"));
        }
        if (j.contains("shallow2")) {
            c.shallow[1] = path_from_json(j.at("shallow2"));
        }
        c.reduced_dim = j.value("reduced_dim", 0);
        auto init = j.value("projection_init", std::string("he"));
        if (init != "he" && init != "identity") {
            throw Error(ErrorCode::kConfig, "projection_init must be 'he' or 'identity'");
        }
        c.projection_init = init == "identity" ? ProjectionInit::kIdentity : ProjectionInit::kHe;
        c.margin = j.value("margin", 0.2F);
        c.normalize = j.value("normalize", true);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kConfig, std::string("net config: ") + e.what());
    }
    c.validate();
}

NetConfig
load_net_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::kIo, "cannot open net config " + path);
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kConfig, "net config " + path + ": " + e.what());
    }
    return j.get<NetConfig>();
}

}  // namespace visrec::net
