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

#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "visrec/net/loss.hpp"
#include "visrec/net/network.hpp"

namespace visrec::net {

struct TrainHyper {
    float lr = 0.01F;
    float momentum = 0.9F;
    int epochs = 10;
    int batch_size = 16;
    std::uint64_t seed = 1;
    // step decay: lr *= decay_factor every decay_every epochs (0 = constant)
    int decay_every = 0;
    float decay_factor = 0.1F;

    void
    validate() const;
};

void
to_json(nlohmann::json& j, const TrainHyper& h);
void
from_json(const nlohmann::json& j, TrainHyper& h);

struct IndexedTriplet {
    std::uint32_t query = 0;
    std::uint32_t positive = 0;
    std::uint32_t negative = 0;
};

/// Preprocessed images plus triplets that index into them.
struct TrainingSet {
    std::vector<MatrixX<float>> inputs;
    std::vector<IndexedTriplet> triplets;
};

struct TrainReport {
    std::vector<double> epoch_loss;  // mean hinge loss seen during each epoch
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// SGD with momentum over shuffled mini-batches. Bit-reproducible for a
/// fixed seed. Projection tensors, if present, are left untouched.
TrainReport
train(const Network<float>& net, Params<float>& params, const TrainingSet& data, const TrainHyper& hyper,
      const EpochCallback& on_epoch = {});

/// Trains only the projection head on top of frozen base weights; the
/// frozen path outputs are computed once up front.
TrainReport
train_projection(const Network<float>& net, Params<float>& params, const TrainingSet& data,
                 const TrainHyper& hyper, const EpochCallback& on_epoch = {});

}  // namespace visrec::net
