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

#include "visrec/index/knn_index.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "visrec/error.hpp"

namespace visrec::index {

std::optional<std::size_t>
IndexShard::find(const std::string& id) const {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - ids.begin());
}

bool
PartitionFilter::matches(const PartitionKey& key) const {
    return (!category_group || *category_group == key.category_group) && (!vertical || *vertical == key.vertical) &&
           (!gender || *gender == key.gender);
}

void
PartitionFilter::set(std::string_view assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw Error(ErrorCode::kInvalidArgument, "filter must be key=value, got '" + std::string(assignment) + "'");
    }
    auto key = assignment.substr(0, eq);
    std::string value(assignment.substr(eq + 1));
    if (key == "category_group") {
        category_group = value;
    } else if (key == "vertical") {
        vertical = value;
    } else if (key == "gender") {
        gender = value;
    } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown filter key '" + std::string(key) + "'");
    }
}

KnnIndex::KnnIndex(int dim, int k) : dim_(dim), k_(k) {
    if (dim <= 0 || k < 0) {
        throw Error(ErrorCode::kInvalidArgument, "index needs dim > 0 and k >= 0");
    }
}

std::size_t
KnnIndex::size() const {
    std::size_t n = 0;
    for (const auto& [key, shard] : shards_) {
        n += shard->size();
    }
    return n;
}

std::optional<KnnIndex::Location>
KnnIndex::find(const std::string& id) const {
    for (const auto& [key, shard] : shards_) {
        if (auto row = shard->find(id)) {
            return Location{shard.get(), *row};
        }
    }
    return std::nullopt;
}

bool
KnnIndex::same_content(const KnnIndex& other) const {
    if (dim_ != other.dim_ || k_ != other.k_ || shards_.size() != other.shards_.size()) {
        return false;
    }
    for (auto a = shards_.begin(), b = other.shards_.begin(); a != shards_.end(); ++a, ++b) {
        const auto& x = *a->second;
        const auto& y = *b->second;
        if (a->first != b->first || x.ids != y.ids || x.versions != y.versions || x.lists != y.lists ||
            x.embeddings.rows() != y.embeddings.rows()) {
            return false;
        }
        if (std::memcmp(x.embeddings.data(), y.embeddings.data(),
                        static_cast<std::size_t>(x.embeddings.size()) * sizeof(float)) != 0) {
            return false;
        }
    }
    return true;
}

std::vector<IndexedItem>
KnnIndex::items() const {
    std::vector<IndexedItem> out;
    for (const auto& [key, shard] : shards_) {
        for (std::size_t i = 0; i < shard->size(); ++i) {
            out.push_back({shard->ids[i], shard->embeddings.row(static_cast<Eigen::Index>(i)).transpose(), key,
                           shard->versions[i]});
        }
    }
    return out;
}

namespace {

float
row_distance(const IndexShard& shard, std::size_t a, std::size_t b) {
    return stable_distance(shard.embeddings.row(static_cast<Eigen::Index>(a)).data(),
                           shard.embeddings.row(static_cast<Eigen::Index>(b)).data(), shard.embeddings.cols());
}

// Exact top-k of `owner` against every other row of the shard.
std::vector<Neighbor>
scan_owner(const IndexShard& shard, std::size_t owner, std::size_t k, ScanStats* stats) {
    std::vector<Neighbor> all;
    all.reserve(shard.size());
    for (std::size_t j = 0; j < shard.size(); ++j) {
        if (j != owner) {
            all.push_back({shard.ids[j], row_distance(shard, owner, j)});
        }
    }
    if (stats) {
        stats->distance_evaluations += all.size();
        ++stats->owners_rescanned;
    }
    std::size_t keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), neighbor_less);
    all.resize(keep);
    return all;
}

// Inserts `candidate` if it beats the current k-th entry.
void
offer(std::vector<Neighbor>& list, Neighbor candidate, std::size_t k) {
    if (k == 0) {
        return;
    }
    if (list.size() >= k && !neighbor_less(candidate, list.back())) {
        return;
    }
    list.insert(std::upper_bound(list.begin(), list.end(), candidate, neighbor_less), std::move(candidate));
    if (list.size() > k) {
        list.pop_back();
    }
}

void
check_item(const IndexedItem& item, int dim) {
    if (item.embedding.size() != dim) {
        throw Error(ErrorCode::kDimensionMismatch, "item " + item.id + " has dimension " +
                                                       std::to_string(item.embedding.size()) + ", index expects " +
                                                       std::to_string(dim));
    }
    if (!item.embedding.allFinite()) {
        throw Error(ErrorCode::kNumeric, "item " + item.id + " has a non-finite embedding");
    }
}

// Sorted rows for one partition, neighbor lists left empty.
std::shared_ptr<IndexShard>
make_shard(const PartitionKey& key, std::vector<const IndexedItem*> rows, int dim) {
    std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    auto shard = std::make_shared<IndexShard>();
    shard->key = key;
    shard->embeddings.resize(static_cast<Eigen::Index>(rows.size()), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        shard->ids.push_back(rows[i]->id);
        shard->versions.push_back(rows[i]->version);
        shard->embeddings.row(static_cast<Eigen::Index>(i)) = rows[i]->embedding.transpose();
    }
    shard->lists.resize(rows.size());
    return shard;
}

}  // namespace

KnnIndex
build(std::span<const IndexedItem> items, int k, ScanStats* stats) {
    if (items.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "build: no items");
    }
    KnnIndex index(static_cast<int>(items.front().embedding.size()), k);
    std::map<PartitionKey, std::vector<const IndexedItem*>> groups;
    std::unordered_set<std::string> seen;
    for (const auto& item : items) {
        check_item(item, index.dim_);
        if (!seen.insert(item.id).second) {
            throw Error(ErrorCode::kDuplicateId, "build: duplicate id " + item.id);
        }
        groups[item.metadata].push_back(&item);
    }
    for (auto& [key, rows] : groups) {
        auto shard = make_shard(key, std::move(rows), index.dim_);
        for (std::size_t i = 0; i < shard->size(); ++i) {
            shard->lists[i] = scan_owner(*shard, i, static_cast<std::size_t>(k), stats);
        }
        if (stats) {
            ++stats->shards_scanned;
        }
        index.shards_.emplace(key, std::move(shard));
    }
    return index;
}

NeighborList
query(const KnnIndex& index, const Embedding& embedding, std::size_t k, const PartitionFilter& filter,
      ScanStats* stats) {
    check_same_dim(embedding.size(), index.dim());
    NeighborList out;
    if (k == 0) {
        return out;
    }
    for (const auto& [key, shard] : index.shards()) {
        if (!filter.matches(key)) {
            continue;
        }
        for (std::size_t j = 0; j < shard->size(); ++j) {
            float d = stable_distance(embedding.data(), shard->embeddings.row(static_cast<Eigen::Index>(j)).data(),
                                      index.dim());
            offer(out.entries, {shard->ids[j], d}, k);
        }
        if (stats) {
            stats->distance_evaluations += shard->size();
            ++stats->shards_scanned;
        }
    }
    return out;
}

KnnIndex
apply_delta(const KnnIndex& index, std::span<const IndexedItem> added, std::span<const std::string> removed,
            ScanStats* stats) {
    const auto k = static_cast<std::size_t>(index.k());
    // partition -> removed ids in that partition
    std::map<PartitionKey, std::set<std::string>> removed_by_key;
    std::unordered_set<std::string> removed_set;
    for (const auto& id : removed) {
        auto loc = index.find(id);
        if (!loc) {
            throw Error(ErrorCode::kUnknownId, "apply_delta: cannot remove unknown id " + id);
        }
        if (!removed_set.insert(id).second) {
            throw Error(ErrorCode::kDuplicateId, "apply_delta: id removed twice: " + id);
        }
        removed_by_key[loc->shard->key].insert(id);
    }
    std::map<PartitionKey, std::vector<const IndexedItem*>> added_by_key;
    std::unordered_set<std::string> added_set;
    for (const auto& item : added) {
        check_item(item, index.dim());
        bool live = index.find(item.id).has_value() && !removed_set.contains(item.id);
        if (live || !added_set.insert(item.id).second) {
            throw Error(ErrorCode::kDuplicateId, "apply_delta: id already present: " + item.id);
        }
        added_by_key[item.metadata].push_back(&item);
    }

    KnnIndex next = index;
    next.generation_ = index.generation() + 1;
    std::set<PartitionKey> touched;
    for (const auto& [key, ids] : removed_by_key) {
        touched.insert(key);
    }
    for (const auto& [key, items] : added_by_key) {
        touched.insert(key);
    }

    for (const auto& key : touched) {
        auto old_it = index.shards().find(key);
        const IndexShard* old_shard = old_it == index.shards().end() ? nullptr : old_it->second.get();
        const auto& gone = removed_by_key[key];
        const auto& fresh = added_by_key[key];

        // Surviving old rows plus the additions, in id order.
        std::vector<IndexedItem> survivors;
        std::unordered_set<std::string> dirty;
        std::unordered_map<std::string, const std::vector<Neighbor>*> old_lists;
        if (old_shard) {
            for (std::size_t i = 0; i < old_shard->size(); ++i) {
                const auto& id = old_shard->ids[i];
                if (gone.contains(id)) {
                    continue;
                }
                survivors.push_back({id, old_shard->embeddings.row(static_cast<Eigen::Index>(i)).transpose(), key,
                                     old_shard->versions[i]});
                old_lists[id] = &old_shard->lists[i];
                for (const auto& nb : old_shard->lists[i]) {
                    if (gone.contains(nb.id)) {
                        dirty.insert(id);
                        break;
                    }
                }
            }
        }
        std::vector<const IndexedItem*> rows;
        rows.reserve(survivors.size() + fresh.size());
        for (const auto& s : survivors) {
            rows.push_back(&s);
        }
        rows.insert(rows.end(), fresh.begin(), fresh.end());
        if (rows.empty()) {
            next.shards_.erase(key);
            continue;
        }
        auto shard = make_shard(key, std::move(rows), index.dim());

        std::vector<std::size_t> fresh_rows;
        std::unordered_set<std::string> fresh_ids;
        for (const auto* item : fresh) {
            fresh_ids.insert(item->id);
            fresh_rows.push_back(*shard->find(item->id));
        }
        for (std::size_t i = 0; i < shard->size(); ++i) {
            const auto& id = shard->ids[i];
            if (fresh_ids.contains(id) || dirty.contains(id)) {
                shard->lists[i] = scan_owner(*shard, i, k, stats);
                continue;
            }
            auto list = *old_lists.at(id);
            for (auto r : fresh_rows) {
                offer(list, {shard->ids[r], row_distance(*shard, i, r)}, k);
            }
            if (stats) {
                stats->distance_evaluations += fresh_rows.size();
            }
            shard->lists[i] = std::move(list);
        }
        if (stats) {
            ++stats->shards_scanned;
        }
        next.shards_[key] = std::move(shard);
    }
    return next;
}

std::vector<DuplicatePair>
near_duplicates(const KnnIndex& index, float threshold) {
    if (!(threshold >= 0.0F)) {
        throw Error(ErrorCode::kInvalidArgument, "dedup threshold must be >= 0");
    }
    std::map<std::pair<std::string, std::string>, float> pairs;
    for (const auto& [key, shard] : index.shards()) {
        for (std::size_t i = 0; i < shard->size(); ++i) {
            for (const auto& nb : shard->lists[i]) {
                if (nb.distance > threshold) {
                    break;
                }
                const auto& owner = shard->ids[i];
                auto p = owner < nb.id ? std::make_pair(owner, nb.id) : std::make_pair(nb.id, owner);
                pairs.emplace(std::move(p), nb.distance);
            }
        }
    }
    std::vector<DuplicatePair> out;
    out.reserve(pairs.size());
    for (auto& [p, d] : pairs) {
        out.push_back({p.first, p.second, d});
    }
    return out;
}

}  // namespace visrec::index
