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

#include "visrec/net/model.hpp"

#include <nlohmann/json.hpp>

#include "visrec/binary_io.hpp"

namespace visrec::net {

using nlohmann::json;

Model::Model(NetConfig c, Params<float> p, bool projected)
    : config(std::move(c)), params(std::move(p)), projection_trained(projected), network_(config) {
    if (params.values.size() != network_.layout().total) {
        throw Error(ErrorCode::kConfig, "parameters do not match the network topology");
    }
    if (projection_trained && !params.has_projection()) {
        throw Error(ErrorCode::kConfig, "model marked projected but has no projection tensors");
    }
}

Embedding
Model::embed(const Image& image) const {
    return network_.embed(params, image, serving_stage());
}

std::string
serialize_model(const Model& model) {
    json tensors = json::array();
    for (const auto& s : model.params.layout.slots) {
        tensors.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
    }
    json header = {{"format", 1},
                   {"config", model.config},
                   {"projection_trained", model.projection_trained},
                   {"param_count", model.params.values.size()},
                   {"tensors", tensors}};
    std::string text = header.dump();
    std::string out(kModelMagic);
    bin::put_u64(out, text.size());
    out += text;
    out.reserve(out.size() + static_cast<std::size_t>(model.params.values.size()) * 4);
    for (Eigen::Index i = 0; i < model.params.values.size(); ++i) {
        bin::put_f32(out, model.params.values[i]);
    }
    return out;
}

Model
deserialize_model(std::string_view bytes) {
    bin::Reader r(bytes);
    if (r.take(kModelMagic.size()) != kModelMagic) {
        throw Error(ErrorCode::kFormat, "not a model file (bad magic)");
    }
    auto header_len = r.u64();
    json header;
    try {
        header = json::parse(r.take(header_len));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kFormat, std::string("model header: ") + e.what());
    }
    NetConfig config = header.at("config").get<NetConfig>();
    Params<float> params{ParamLayout::from_config(config), {}};
    auto count = header.at("param_count").get<Eigen::Index>();
    if (count != params.layout.total) {
        throw Error(ErrorCode::kFormat, "model parameter count does not match its config");
    }
    if (r.remaining() != static_cast<std::size_t>(count) * 4) {
        throw Error(ErrorCode::kFormat, "model weight section has the wrong size");
    }
    params.values.resize(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        params.values[i] = r.f32();
    }
    return Model(std::move(config), std::move(params), header.value("projection_trained", false));
}

void
save_model(const std::string& path, const Model& model) {
    bin::write_file_atomic(path, serialize_model(model));
}

std::shared_ptr<const Model>
load_model(const std::string& path) {
    return std::make_shared<const Model>(deserialize_model(bin::read_file(path)));
}

std::string
embedding_to_json_text(const Embedding& embedding) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < embedding.size(); ++i) {
        arr.push_back(embedding[i]);
    }
    return arr.dump() + "\n";
}

}  // namespace visrec::net
