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

#include "visrec/triplets/biss.hpp"

#include <algorithm>
#include <numeric>

#include "visrec/error.hpp"
#include "visrec/net/model.hpp"
#include "visrec/triplets/colorhist.hpp"

namespace visrec::triplets {

ColorHistBiss::ColorHistBiss(std::span<const Image> images) {
    histograms_.reserve(images.size());
    for (const auto& image : images) {
        histograms_.push_back(colorhist_features(image).bins);
    }
}

ColorHistBiss::ColorHistBiss(std::vector<Eigen::VectorXf> histograms) : histograms_(std::move(histograms)) {
}

double
ColorHistBiss::distance(std::size_t a, std::size_t b) const {
    const auto& x = histograms_.at(a);
    const auto& y = histograms_.at(b);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        acc += std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
    }
    return acc;
}

EmbeddingBiss::EmbeddingBiss(std::string name, std::vector<Embedding> embeddings)
    : name_(std::move(name)), embeddings_(std::move(embeddings)) {
}

double
EmbeddingBiss::distance(std::size_t a, std::size_t b) const {
    const auto& x = embeddings_.at(a);
    const auto& y = embeddings_.at(b);
    check_same_dim(x.size(), y.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

std::unique_ptr<Biss>
make_biss(std::string_view spec, std::span<const Image> images) {
    if (spec == "colorhist") {
        return std::make_unique<ColorHistBiss>(images);
    }
    if (spec.starts_with("embed:")) {
        std::string path(spec.substr(6));
        auto model = net::load_model(path);
        std::vector<Embedding> embeddings;
        embeddings.reserve(images.size());
        for (const auto& image : images) {
            embeddings.push_back(model->embed(image));
        }
        return std::make_unique<EmbeddingBiss>("embed:" + path, std::move(embeddings));
    }
    throw Error(ErrorCode::kUnknownBiss, "unknown BISS '" + std::string(spec) + "' (expected colorhist or embed:<model>)");
}

BissRanking
biss_rank(const Biss& biss, std::span<const std::string> ids, std::size_t query,
          std::span<const std::size_t> candidates, std::size_t k) {
    if (query >= ids.size() || ids.size() != biss.size()) {
        throw Error(ErrorCode::kInvalidArgument, "biss_rank: query or corpus does not match the scorer");
    }
    std::vector<RankedNeighbor> scored;
    scored.reserve(candidates.size());
    for (auto c : candidates) {
        if (c == query) {
            continue;
        }
        scored.push_back({ids[c], biss.distance(query, c)});
    }
    if (k > scored.size()) {
        throw Error(ErrorCode::kInvalidArgument, "biss_rank: K=" + std::to_string(k) + " exceeds " +
                                                     std::to_string(scored.size()) + " candidates");
    }
    auto less = [](const RankedNeighbor& a, const RankedNeighbor& b) {
        return a.score != b.score ? a.score < b.score : a.id < b.id;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), less);
    scored.resize(k);
    return {biss.name(), ids[query], std::move(scored)};
}

BissRanking
biss_rank(const Biss& biss, std::span<const std::string> ids, std::size_t query, std::size_t k) {
    std::vector<std::size_t> all(ids.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return biss_rank(biss, ids, query, all, k);
}

}  // namespace visrec::triplets
