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

#include "visrec/eval/metrics.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

#include "visrec/catalog.hpp"
#include "visrec/error.hpp"

namespace visrec::eval {

namespace {

std::optional<double>
percent(std::uint64_t correct, std::uint64_t total) {
    if (total == 0) {
        return std::nullopt;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

std::optional<double>
TripletAccuracy::inclass_percent() const {
    return percent(inclass_correct, inclass_total);
}

std::optional<double>
TripletAccuracy::outclass_percent() const {
    return percent(outclass_correct, outclass_total);
}

std::optional<double>
TripletAccuracy::total_percent() const {
    return percent(correct(), total());
}

TripletAccuracy
triplet_accuracy(std::span<const triplets::CandidateTriplet> set, const DistanceFn& distance) {
    TripletAccuracy acc;
    for (const auto& t : set) {
        bool ok = distance(t.q, t.p) < distance(t.q, t.n);
        if (t.cls == triplets::TripletClass::kInClass) {
            ++acc.inclass_total;
            acc.inclass_correct += ok ? 1 : 0;
        } else {
            ++acc.outclass_total;
            acc.outclass_correct += ok ? 1 : 0;
        }
    }
    return acc;
}

TripletAccuracy
triplet_accuracy(std::span<const triplets::CandidateTriplet> set,
                 const std::map<std::string, Embedding>& embeddings) {
    auto lookup = [&](const std::string& id) -> const Embedding& {
        auto it = embeddings.find(id);
        if (it == embeddings.end()) {
            throw Error(ErrorCode::kUnknownId, "no embedding for triplet item '" + id + "'");
        }
        return it->second;
    };
    return triplet_accuracy(set, [&](const std::string& a, const std::string& b) {
        const auto& x = lookup(a);
        const auto& y = lookup(b);
        check_same_dim(x.size(), y.size());
        return static_cast<double>(stable_distance(x.data(), y.data(), x.size()));
    });
}

std::vector<RecallCurve>
recall_curves(const index::KnnIndex& index, std::span<const RecallQuery> queries, std::vector<std::size_t> ks) {
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    std::set<std::string> missing;
    for (const auto& q : queries) {
        if (q.matches.empty()) {
            throw Error(ErrorCode::kInvalidArgument, "query '" + q.query_id + "' has an empty match set");
        }
        if (!q.embedding && !index.find(q.query_id)) {
            missing.insert(q.query_id);
        }
        for (const auto& m : q.matches) {
            if (!index.find(m)) {
                missing.insert(m);
            }
        }
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& id : missing) {
            list += (list.empty() ? "" : ", ") + id;
        }
        throw Error(ErrorCode::kUnknownId, "ground-truth ids not in the catalog: " + list);
    }

    RecallCurve all{"all", ks, std::vector<std::uint64_t>(ks.size(), 0), 0};
    std::map<std::string, RecallCurve> per_category;
    std::size_t k_max = ks.empty() ? 0 : ks.back();
    for (const auto& q : queries) {
        auto self = index.find(q.query_id);
        std::string category = q.category;
        if (category.empty()) {
            category = index.find(q.matches.front())->shard->key.category_group;
        }
        Embedding emb = q.embedding ? *q.embedding : Embedding(self->shard->embeddings.row(self->row).transpose());
        index::PartitionFilter filter;
        filter.category_group = category;
        auto found = index::query(index, emb, k_max + (self ? 1 : 0), filter);

        std::vector<std::string> ranked;
        for (const auto& n : found.entries) {
            if (self && n.id == q.query_id) {
                continue;
            }
            ranked.push_back(n.id);
        }
        std::set<std::string> matches(q.matches.begin(), q.matches.end());
        auto& curve = per_category.try_emplace(category, RecallCurve{category, ks, {}, 0}).first->second;
        curve.hits.resize(ks.size(), 0);
        // first rank at which a match appears; hits for every k beyond it
        std::size_t first_hit = ranked.size();
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            if (matches.contains(ranked[r])) {
                first_hit = r;
                break;
            }
        }
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (first_hit < ks[i]) {
                ++curve.hits[i];
                ++all.hits[i];
            }
        }
        ++curve.queries;
        ++all.queries;
    }
    std::vector<RecallCurve> out{all};
    for (auto& [name, curve] : per_category) {
        out.push_back(std::move(curve));
    }
    return out;
}

std::vector<RecallQuery>
load_ground_truth(const std::string& path, const std::function<Embedding(const std::string&)>& embed_image) {
    std::vector<RecallQuery> out;
    std::size_t row = 0;
    for (const auto& j : read_jsonl(path)) {
        ++row;
        RecallQuery q;
        try {
            q.matches = j.at("matches").get<std::vector<std::string>>();
            q.category = j.value("category", std::string());
            if (j.contains("query_id")) {
                q.query_id = j.at("query_id").get<std::string>();
            } else {
                auto image = j.at("query_image").get<std::string>();
                if (!embed_image) {
                    throw Error(ErrorCode::kInvalidArgument, "image queries need a model");
                }
                q.query_id = image;
                std::filesystem::path p(image);
                if (p.is_relative()) {
                    p = std::filesystem::path(path).parent_path() / p;
                }
                q.embedding = embed_image(p.string());
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::kFormat, path + ": record " + std::to_string(row) + ": " + e.what());
        }
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace visrec::eval
