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

#include <nlohmann/json.hpp>

#include "visrec/binary_io.hpp"
#include "visrec/error.hpp"
#include "visrec/index/knn_index.hpp"

namespace visrec::index {

using nlohmann::json;

// Layout: magic, u64 header length, JSON header, then for each partition in
// header order: ids + versions, the f32 row matrix, and the neighbor lists
// as (u32 row, f32 distance) pairs.
std::string
serialize_index(const KnnIndex& index) {
    json partitions = json::array();
    for (const auto& [key, shard] : index.shards()) {
        json p = key;
        p["count"] = shard->size();
        partitions.push_back(std::move(p));
    }
    json header = {{"format", 1},
                   {"dim", index.dim()},
                   {"k", index.k()},
                   {"generation", index.generation()},
                   {"partitions", partitions}};
    std::string text = header.dump();
    std::string out(kIndexMagic);
    bin::put_u64(out, text.size());
    out += text;
    for (const auto& [key, shard] : index.shards()) {
        for (std::size_t i = 0; i < shard->size(); ++i) {
            bin::put_str(out, shard->ids[i]);
            bin::put_u64(out, shard->versions[i]);
        }
        for (Eigen::Index i = 0; i < shard->embeddings.size(); ++i) {
            bin::put_f32(out, shard->embeddings.data()[i]);
        }
        for (const auto& list : shard->lists) {
            bin::put_u32(out, static_cast<std::uint32_t>(list.size()));
            for (const auto& nb : list) {
                bin::put_u32(out, static_cast<std::uint32_t>(*shard->find(nb.id)));
                bin::put_f32(out, nb.distance);
            }
        }
    }
    return out;
}

KnnIndex
deserialize_index(std::string_view bytes) {
    bin::Reader r(bytes);
    if (r.take(kIndexMagic.size()) != kIndexMagic) {
        throw Error(ErrorCode::kFormat, "not an index snapshot (bad magic)");
    }
    json header;
    try {
        header = json::parse(r.take(r.u64()));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kFormat, std::string("index header: ") + e.what());
    }
    KnnIndex index(header.at("dim").get<int>(), header.at("k").get<int>());
    index.generation_ = header.at("generation").get<std::uint64_t>();
    for (const auto& p : header.at("partitions")) {
        auto shard = std::make_shared<IndexShard>();
        shard->key = p.get<PartitionKey>();
        auto count = p.at("count").get<std::size_t>();
        for (std::size_t i = 0; i < count; ++i) {
            shard->ids.push_back(r.str());
            shard->versions.push_back(r.u64());
        }
        if (!std::is_sorted(shard->ids.begin(), shard->ids.end())) {
            throw Error(ErrorCode::kFormat, "index snapshot: shard ids are not sorted");
        }
        shard->embeddings.resize(static_cast<Eigen::Index>(count), index.dim());
        for (Eigen::Index i = 0; i < shard->embeddings.size(); ++i) {
            shard->embeddings.data()[i] = r.f32();
        }
        shard->lists.resize(count);
        for (auto& list : shard->lists) {
            auto n = r.u32();
            for (std::uint32_t j = 0; j < n; ++j) {
                auto row = r.u32();
                if (row >= count) {
                    throw Error(ErrorCode::kFormat, "index snapshot: neighbor row out of range");
                }
                list.push_back({shard->ids[row], r.f32()});
            }
        }
        index.shards_.emplace(shard->key, std::move(shard));
    }
    if (!r.done()) {
        throw Error(ErrorCode::kFormat, "index snapshot: trailing bytes");
    }
    return index;
}

void
save_index(const std::string& path, const KnnIndex& index) {
    bin::write_file_atomic(path, serialize_index(index));
}

KnnIndex
load_index(const std::string& path) {
    return deserialize_index(bin::read_file(path));
}

}  // namespace visrec::index
