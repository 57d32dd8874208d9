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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "visrec/embedding.hpp"
#include "visrec/image.hpp"

namespace visrec::triplets {

/// Basic Image Similarity Scorer: a cheap, imperfect distance over a fixed
/// corpus, used only to bootstrap candidate triplets. Items are addressed
/// by their position in the corpus.
class Biss {
public:
    virtual ~Biss() = default;

    virtual const std::string&
    name() const = 0;
    virtual std::size_t
    size() const = 0;
    virtual double
    distance(std::size_t a, std::size_t b) const = 0;
};

/// L1 distance between foreground LAB histograms.
class ColorHistBiss final : public Biss {
public:
    explicit ColorHistBiss(std::span<const Image> images);
    explicit ColorHistBiss(std::vector<Eigen::VectorXf> histograms);

    const std::string&
    name() const override {
        return name_;
    }
    std::size_t
    size() const override {
        return histograms_.size();
    }
    double
    distance(std::size_t a, std::size_t b) const override;

private:
    std::string name_ = "colorhist";
    std::vector<Eigen::VectorXf> histograms_;
};

/// Euclidean distance between embeddings of any trained model.
class EmbeddingBiss final : public Biss {
public:
    EmbeddingBiss(std::string name, std::vector<Embedding> embeddings);

    const std::string&
    name() const override {
        return name_;
    }
    std::size_t
    size() const override {
        return embeddings_.size();
    }
    double
    distance(std::size_t a, std::size_t b) const override;

private:
    std::string name_;
    std::vector<Embedding> embeddings_;
};

/// Builds a scorer from a CLI-style spec: "colorhist" or "embed:<model>".
std::unique_ptr<Biss>
make_biss(std::string_view spec, std::span<const Image> images);

struct RankedNeighbor {
    std::string id;
    double score = 0;  // BISS distance, lower is more similar

    bool
    operator==(const RankedNeighbor&) const = default;
};

struct BissRanking {
    std::string biss;
    std::string query;
    std::vector<RankedNeighbor> neighbors;  // ascending score, ties by id
};

/// Top-`k` of `candidates` (corpus positions, query excluded) by the
/// scorer's distance to `query`. Deterministic: ties break by ascending id.
BissRanking
biss_rank(const Biss& biss, std::span<const std::string> ids, std::size_t query,
          std::span<const std::size_t> candidates, std::size_t k);

/// Same, ranking against the whole corpus.
BissRanking
biss_rank(const Biss& biss, std::span<const std::string> ids, std::size_t query, std::size_t k);

}  // namespace visrec::triplets
