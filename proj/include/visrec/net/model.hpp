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

#include <memory>
#include <string>

#include "visrec/embedding.hpp"
#include "visrec/image.hpp"
#include "visrec/net/network.hpp"
#include "visrec/net/params.hpp"

namespace visrec::net {

/// A trained embedding network: topology plus one immutable parameter
/// snapshot. Safe to share across threads once constructed.
struct Model {
    NetConfig config;
    Params<float> params;
    bool projection_trained = false;

    Model(NetConfig c, Params<float> p, bool projected = false);

    /// Embedding served by the FV path: projected when the projection has
    /// been trained, full otherwise.
    Embedding
    embed(const Image& image) const;
    Stage
    serving_stage() const {
        return projection_trained ? Stage::kOutput : Stage::kFull;
    }
    int
    embedding_dim() const {
        return projection_trained ? config.reduced_dim : config.full_dim();
    }
    const Network<float>&
    network() const {
        return network_;
    }

private:
    Network<float> network_;
};

inline constexpr std::string_view kModelMagic = "VRNET01";

/// "VRNET01", u64 header length, canonical JSON header, then little-endian
/// f32 tensors in declaration order.
std::string
serialize_model(const Model& model);
Model
deserialize_model(std::string_view bytes);

void
save_model(const std::string& path, const Model& model);
std::shared_ptr<const Model>
load_model(const std::string& path);

/// Canonical text form of an embedding (a JSON array, newline-terminated),
/// shared by the CLI and the extraction endpoint.
std::string
embedding_to_json_text(const Embedding& embedding);

}  // namespace visrec::net
