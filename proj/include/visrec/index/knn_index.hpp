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
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "visrec/catalog.hpp"
#include "visrec/embedding.hpp"

namespace visrec::index {

/// Shards are keyed by the full pruning tuple (category_group, vertical, gender).
using PartitionKey = ItemMetadata;

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct IndexedItem {
    std::string id;
    Embedding embedding;
    ItemMetadata metadata;
    std::uint64_t version = 0;
};

struct Neighbor {
    std::string id;
    float distance = 0.0F;

    bool
    operator==(const Neighbor&) const = default;
};

/// Ascending distance, ties by ascending id.
inline bool
neighbor_less(const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
}

struct NeighborList {
    std::string owner;
    std::vector<Neighbor> entries;
};

/// All items of one partition. Rows are kept in ascending id order so a
/// shard's layout is a function of its contents alone.
struct IndexShard {
    PartitionKey key;
    std::vector<std::string> ids;
    std::vector<std::uint64_t> versions;
    RowMatrixXf embeddings;
    std::vector<std::vector<Neighbor>> lists;  // lists[i] belongs to ids[i]

    std::size_t
    size() const {
        return ids.size();
    }
    std::optional<std::size_t>
    find(const std::string& id) const;
};

/// Restricts a query to shards whose attributes match every set field.
struct PartitionFilter {
    std::optional<std::string> category_group;
    std::optional<std::string> vertical;
    std::optional<std::string> gender;

    bool
    matches(const PartitionKey& key) const;
    /// Applies "key=value" (keys: category_group, vertical, gender).
    void
    set(std::string_view assignment);
    static PartitionFilter
    exact(const PartitionKey& key) {
        return {key.category_group, key.vertical, key.gender};
    }
};

/// Work counters; queries are exact scans, so these grow linearly with the
/// number of rows in the selected shards.
struct ScanStats {
    std::uint64_t distance_evaluations = 0;
    std::size_t shards_scanned = 0;
    std::size_t owners_rescanned = 0;
};

/// One immutable generation of the exact k-NN index: sharded embeddings
/// plus each item's precomputed top-k neighbor list.
class KnnIndex {
public:
    KnnIndex(int dim, int k);

    int
    dim() const {
        return dim_;
    }
    int
    k() const {
        return k_;
    }
    std::uint64_t
    generation() const {
        return generation_;
    }
    std::size_t
    size() const;

    const std::map<PartitionKey, std::shared_ptr<const IndexShard>>&
    shards() const {
        return shards_;
    }

    struct Location {
        const IndexShard* shard = nullptr;
        std::size_t row = 0;
    };
    std::optional<Location>
    find(const std::string& id) const;

    /// Everything except the generation counter.
    bool
    same_content(const KnnIndex& other) const;

    std::vector<IndexedItem>
    items() const;

private:
    friend KnnIndex
    build(std::span<const IndexedItem>, int, ScanStats*);
    friend KnnIndex
    apply_delta(const KnnIndex&, std::span<const IndexedItem>, std::span<const std::string>, ScanStats*);
    friend KnnIndex
    deserialize_index(std::string_view);

    int dim_;
    int k_;
    std::uint64_t generation_ = 0;
    std::map<PartitionKey, std::shared_ptr<const IndexShard>> shards_;
};

/// Exact top-k neighbor lists for every item, within its partition.
/// Errors: empty input, duplicate ids, embedding dimension mismatch.
KnnIndex
build(std::span<const IndexedItem> items, int k, ScanStats* stats = nullptr);

/// Exact top-k over the shards selected by `filter` (all shards by default).
NeighborList
query(const KnnIndex& index, const Embedding& embedding, std::size_t k, const PartitionFilter& filter = {},
      ScanStats* stats = nullptr);

/// Next generation with `removed` dropped and `added` inserted. The result
/// equals build() over the new item set bit-for-bit, but only added items
/// and owners that lost a neighbor are rescanned; every other list is
/// merged against the added items alone.
KnnIndex
apply_delta(const KnnIndex& index, std::span<const IndexedItem> added, std::span<const std::string> removed,
            ScanStats* stats = nullptr);

struct DuplicatePair {
    std::string first;  // first < second
    std::string second;
    float distance = 0.0F;

    bool
    operator==(const DuplicatePair&) const = default;
};

/// Same-partition pairs at distance <= threshold, read off the maintained
/// neighbor lists. Complete only while every item has fewer than k
/// near-duplicates; beyond that the list is a lower bound.
std::vector<DuplicatePair>
near_duplicates(const KnnIndex& index, float threshold);

inline constexpr std::string_view kIndexMagic = "VRIDX01";

std::string
serialize_index(const KnnIndex& index);
KnnIndex
deserialize_index(std::string_view bytes);
void
save_index(const std::string& path, const KnnIndex& index);
KnnIndex
load_index(const std::string& path);

/// Holder of the currently published generation. Readers pin a generation
/// by copying the shared pointer; publication swaps it in one step.
class Publisher {
public:
    explicit Publisher(std::shared_ptr<const KnnIndex> initial = nullptr) : current_(std::move(initial)) {
    }

    std::shared_ptr<const KnnIndex>
    current() const {
        std::lock_guard lock(mu_);
        return current_;
    }

    void
    publish(std::shared_ptr<const KnnIndex> next) {
        std::lock_guard lock(mu_);
        current_ = std::move(next);
    }

private:
    mutable std::mutex mu_;
    std::shared_ptr<const KnnIndex> current_;
};

}  // namespace visrec::index
