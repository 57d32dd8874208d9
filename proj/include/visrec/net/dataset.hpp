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
#include <map>
#include <span>
#include <string>

#include "visrec/catalog.hpp"
#include "visrec/image.hpp"
#include "visrec/net/model.hpp"
#include "visrec/net/trainer.hpp"
#include "visrec/triplets/generator.hpp"

namespace visrec::net {

/// Preprocesses the images referenced by `triplets` and indexes the
/// triplets into them. Throws kUnknownId for ids missing from `images`.
TrainingSet
make_training_set(const Network<float>& net, const std::map<std::string, Image>& images,
                  std::span<const triplets::CandidateTriplet> triplets);

/// Reads every manifest image, keyed by id.
std::map<std::string, Image>
load_images(std::span<const CatalogEntry> entries);

/// Per-channel mean of the images on the [0, 1] scale, used as the
/// network's input mean.
std::array<float, 3>
channel_mean(const std::map<std::string, Image>& images);

/// Serving embeddings of every image.
std::map<std::string, Embedding>
embed_all(const Model& model, const std::map<std::string, Image>& images);

/// Base training followed, when the config has a reduced dimension, by
/// projection training on the frozen base. Returns the serving model.
Model
train_model(const NetConfig& config, const TrainingSet& data, const TrainHyper& hyper,
            const TrainHyper& projection_hyper, const EpochCallback& on_epoch = {});

}  // namespace visrec::net
