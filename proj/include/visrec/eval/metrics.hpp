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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "visrec/embedding.hpp"
#include "visrec/index/knn_index.hpp"
#include "visrec/triplets/generator.hpp"

namespace visrec::eval {

/// Correct/total counts per triplet class. A triplet is correct only when
/// D(q,p) < D(q,n); ties count as wrong.
struct TripletAccuracy {
    std::uint64_t inclass_correct = 0;
    std::uint64_t inclass_total = 0;
    std::uint64_t outclass_correct = 0;
    std::uint64_t outclass_total = 0;

    std::uint64_t
    correct() const {
        return inclass_correct + outclass_correct;
    }
    std::uint64_t
    total() const {
        return inclass_total + outclass_total;
    }
    /// Percentages; nullopt for an empty class.
    std::optional<double>
    inclass_percent() const;
    std::optional<double>
    outclass_percent() const;
    std::optional<double>
    total_percent() const;

    bool
    operator==(const TripletAccuracy&) const = default;
};

using DistanceFn = std::function<double(const std::string&, const std::string&)>;

TripletAccuracy
triplet_accuracy(std::span<const triplets::CandidateTriplet> set, const DistanceFn& distance);

/// Over precomputed embeddings; throws kUnknownId for ids without one.
TripletAccuracy
triplet_accuracy(std::span<const triplets::CandidateTriplet> set, const std::map<std::string, Embedding>& embeddings);

/// One ground-truth query. An indexed query (by id) uses its stored
/// embedding and never counts itself as a hit.
struct RecallQuery {
    std::string query_id;
    std::optional<Embedding> embedding;  // overrides the stored one
    std::vector<std::string> matches;
    std::string category;  // empty: the first match's category group
};

struct RecallCurve {
    std::string category;  // "all" for the aggregate
    std::vector<std::size_t> ks;
    std::vector<std::uint64_t> hits;  // hits[i] for ks[i]
    std::uint64_t queries = 0;

    double
    recall_percent(std::size_t i) const {
        return queries == 0 ? 0.0 : 100.0 * static_cast<double>(hits[i]) / static_cast<double>(queries);
    }
    bool
    operator==(const RecallCurve&) const = default;
};

/// Recall@k per category (search pruned to the category group) plus an
/// "all" row first. A query hits at k when its top-k intersects the match
/// set. Throws kUnknownId listing every ground-truth id absent from the
/// index, kInvalidArgument for an empty match set.
std::vector<RecallCurve>
recall_curves(const index::KnnIndex& index, std::span<const RecallQuery> queries, std::vector<std::size_t> ks);

/// Ground truth JSONL: {query_id | query_image, matches: [ids], category?}.
/// Image queries are embedded with `embed_image`.
std::vector<RecallQuery>
load_ground_truth(const std::string& path, const std::function<Embedding(const std::string&)>& embed_image = {});

}  // namespace visrec::eval
