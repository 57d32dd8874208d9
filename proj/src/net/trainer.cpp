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

#include "visrec/net/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace visrec::net {

void
TrainHyper::validate() const {
    if (!(lr >= 0.0F) || !std::isfinite(lr)) {
        throw Error(ErrorCode::kConfig, "lr must be finite and >= 0");
    }
    if (momentum < 0.0F || momentum >= 1.0F) {
        throw Error(ErrorCode::kConfig, "momentum must be in [0, 1)");
    }
    if (epochs < 0 || batch_size <= 0 || decay_every < 0) {
        throw Error(ErrorCode::kConfig, "epochs >= 0, batch_size > 0, decay_every >= 0 required");
    }
}

void
to_json(nlohmann::json& j, const TrainHyper& h) {
    j = {{"lr", h.lr},
         {"momentum", h.momentum},
         {"epochs", h.epochs},
         {"batch_size", h.batch_size},
         {"seed", h.seed},
         {"decay_every", h.decay_every},
         {"decay_factor", h.decay_factor}};
}

void
from_json(const nlohmann::json& j, TrainHyper& h) {
    TrainHyper d;
    h.lr = j.value("lr", d.lr);
    h.momentum = j.value("momentum", d.momentum);
    h.epochs = j.value("epochs", d.epochs);
    h.batch_size = j.value("batch_size", d.batch_size);
    h.seed = j.value("seed", d.seed);
    h.decay_every = j.value("decay_every", d.decay_every);
    h.decay_factor = j.value("decay_factor", d.decay_factor);
}

namespace {

void
check_triplets(const TrainingSet& data) {
    auto n = data.inputs.size();
    for (const auto& t : data.triplets) {
        if (t.query >= n || t.positive >= n || t.negative >= n) {
            throw Error(ErrorCode::kInvalidArgument, "triplet references an image outside the training set");
        }
    }
}

float
epoch_lr(const TrainHyper& h, int epoch) {
    if (h.decay_every <= 0) {
        return h.lr;
    }
    return h.lr * std::pow(h.decay_factor, static_cast<float>(epoch / h.decay_every));
}

// Runs the shared epoch/batch/momentum loop. `step` returns the batch mean
// loss and fills the gradient over [begin, end) of the parameter vector.
template <typename StepFn>
TrainReport
sgd_loop(Params<float>& params, Eigen::Index begin, Eigen::Index end, std::size_t triplet_count,
         const TrainHyper& hyper, const EpochCallback& on_epoch, StepFn&& step) {
    hyper.validate();
    TrainReport report;
    if (triplet_count == 0) {
        throw Error(ErrorCode::kInvalidArgument, "no training triplets");
    }
    std::mt19937_64 rng(hyper.seed);
    std::vector<std::uint32_t> order(triplet_count);
    std::iota(order.begin(), order.end(), 0U);
    VectorX<float> velocity = VectorX<float>::Zero(end - begin);
    VectorX<float> grad;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        float lr = epoch_lr(hyper, epoch);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
            std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
            std::span<const std::uint32_t> batch(order.data() + start, stop - start);
            float loss = step(batch, grad);
            if (!std::isfinite(loss) || !grad.allFinite()) {
                throw Error(ErrorCode::kDiverged, "training diverged at epoch " + std::to_string(epoch) +
                                                      " batch " + std::to_string(batches) +
                                                      " (loss " + std::to_string(loss) + ")");
            }
            velocity = hyper.momentum * velocity - lr * grad.segment(begin, end - begin);
            params.values.segment(begin, end - begin) += velocity;
            loss_sum += loss;
            ++batches;
        }
        double mean = loss_sum / static_cast<double>(batches);
        report.epoch_loss.push_back(mean);
        if (on_epoch) {
            on_epoch(epoch, mean);
        }
    }
    return report;
}

}  // namespace

TrainReport
train(const Network<float>& net, Params<float>& params, const TrainingSet& data, const TrainHyper& hyper,
      const EpochCallback& on_epoch) {
    check_triplets(data);
    std::vector<TripletInputs<float>> batch_inputs;
    float margin = net.config().margin;
    return sgd_loop(params, 0, params.layout.projection_offset, data.triplets.size(), hyper, on_epoch,
                    [&](std::span<const std::uint32_t> batch, VectorX<float>& grad) {
                        batch_inputs.clear();
                        for (auto i : batch) {
                            const auto& t = data.triplets[i];
                            batch_inputs.push_back({&data.inputs[t.query], &data.inputs[t.positive],
                                                    &data.inputs[t.negative]});
                        }
                        return triplet_batch_gradient<float>(net, params, batch_inputs, margin, &grad,
                                                             Stage::kFull);
                    });
}

TrainReport
train_projection(const Network<float>& net, Params<float>& params, const TrainingSet& data,
                 const TrainHyper& hyper, const EpochCallback& on_epoch) {
    if (!params.has_projection()) {
        throw Error(ErrorCode::kConfig, "network has no projection stage (reduced_dim == 0)");
    }
    check_triplets(data);
    std::vector<VectorX<float>> features;
    features.reserve(data.inputs.size());
    for (const auto& input : data.inputs) {
        features.push_back(net.features(params, input));
    }
    float margin = net.config().margin;
    std::array<Trace<float>, 3> traces;
    return sgd_loop(
        params, params.layout.projection_offset, params.layout.total, data.triplets.size(), hyper, on_epoch,
        [&](std::span<const std::uint32_t> batch, VectorX<float>& grad) {
            grad.setZero(params.values.size());
            float total = 0.0F;
            for (std::size_t b = 0; b < batch.size(); ++b) {
                const auto& t = data.triplets[batch[b]];
                std::array<std::uint32_t, 3> ids{t.query, t.positive, t.negative};
                std::array<VectorX<float>, 3> emb;
                for (int k = 0; k < 3; ++k) {
                    emb[k] = net.head(params, features[ids[k]], &traces[k], Stage::kOutput);
                    if (!emb[k].allFinite()) {
                        throw Error(ErrorCode::kNumeric, "non-finite activations at batch index " + std::to_string(b));
                    }
                }
                auto lg = triplet_loss_gradient(emb[0], emb[1], emb[2], margin);
                total += lg.loss;
                if (lg.active) {
                    net.head_backward(params, traces[0], lg.d_query, grad);
                    net.head_backward(params, traces[1], lg.d_positive, grad);
                    net.head_backward(params, traces[2], lg.d_negative, grad);
                }
            }
            grad /= static_cast<float>(batch.size());
            return total / static_cast<float>(batch.size());
        });
}

}  // namespace visrec::net
