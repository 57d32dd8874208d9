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

#include "visrec/net/dataset.hpp"

#include "visrec/error.hpp"

namespace visrec::net {

TrainingSet
make_training_set(const Network<float>& net, const std::map<std::string, Image>& images,
                  std::span<const triplets::CandidateTriplet> triplets) {
    TrainingSet set;
    std::map<std::string, std::uint32_t> slot;
    auto position = [&](const std::string& id) {
        auto [it, fresh] = slot.try_emplace(id, static_cast<std::uint32_t>(set.inputs.size()));
        if (fresh) {
            auto img = images.find(id);
            if (img == images.end()) {
                throw Error(ErrorCode::kUnknownId, "triplet references unknown item '" + id + "'");
            }
            set.inputs.push_back(net.preprocess(img->second));
        }
        return it->second;
    };
    set.triplets.reserve(triplets.size());
    for (const auto& t : triplets) {
        set.triplets.push_back({position(t.q), position(t.p), position(t.n)});
    }
    return set;
}

std::map<std::string, Image>
load_images(std::span<const CatalogEntry> entries) {
    std::map<std::string, Image> out;
    for (const auto& e : entries) {
        out.emplace(e.id, read_ppm(e.image));
    }
    return out;
}

std::array<float, 3>
channel_mean(const std::map<std::string, Image>& images) {
    std::array<double, 3> sum{0.0, 0.0, 0.0};
    std::uint64_t pixels = 0;
    for (const auto& [id, image] : images) {
        for (std::size_t i = 0; i < image.data.size(); ++i) {
            sum[i % Image::kChannels] += image.data[i];
        }
        pixels += image.pixel_count();
    }
    std::array<float, 3> mean{0.0F, 0.0F, 0.0F};
    if (pixels > 0) {
        for (std::size_t c = 0; c < 3; ++c) {
            mean[c] = static_cast<float>(sum[c] / (255.0 * static_cast<double>(pixels)));
        }
    }
    return mean;
}

std::map<std::string, Embedding>
embed_all(const Model& model, const std::map<std::string, Image>& images) {
    std::map<std::string, Embedding> out;
    for (const auto& [id, image] : images) {
        out.emplace(id, model.embed(image));
    }
    return out;
}

Model
train_model(const NetConfig& config, const TrainingSet& data, const TrainHyper& hyper,
            const TrainHyper& projection_hyper, const EpochCallback& on_epoch) {
    config.validate();
    Network<float> net(config);
    auto params = init_params(config, hyper.seed);
    train(net, params, data, hyper, on_epoch);
    bool projected = false;
    if (params.has_projection()) {
        init_projection(params, config, projection_hyper.seed);
        train_projection(net, params, data, projection_hyper, on_epoch);
        projected = true;
    }
    return Model(config, std::move(params), projected);
}

}  // namespace visrec::net
