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
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "visrec/catalog.hpp"
#include "visrec/triplets/biss.hpp"

namespace visrec::triplets {

/// Ranking depths for pool construction. Ranks are 1-based: the positive
/// pool takes ranks [1, positive_top], in-class negatives ranks
/// (inclass_lo, inclass_hi].
struct PoolConfig {
    std::size_t k = 1000;
    std::size_t positive_top = 200;
    std::size_t inclass_lo = 500;
    std::size_t inclass_hi = 1000;

    /// K=1000, top-200 positives, in-class ranks 500-1000.
    static PoolConfig
    catalog_scale();
    /// Catalog scale for groups of >= 1250 items; smaller groups keep the
    /// same proportions: K = ceil(0.8 N), P = ceil(0.2 K), (ceil(0.5 K), K].
    static PoolConfig
    for_group_size(std::size_t group_size);

    void
    validate() const;
    bool
    operator==(const PoolConfig&) const = default;
};

struct Pools {
    // each sorted ascending by id
    std::vector<std::string> positive;
    std::vector<std::string> inclass;
    std::vector<std::string> outclass;
};

/// Pools for one query from the rankings of every BISS (all for `query`,
/// all of depth cfg.k). `group_ids` is the query's category group; the
/// query itself is never pooled. Returns nullopt when the positive pool is
/// empty.
std::optional<Pools>
build_pools(const std::string& query, std::span<const BissRanking> rankings, const PoolConfig& cfg,
            std::span<const std::string> group_ids);

enum class TripletClass { kInClass, kOutOfClass };

std::string_view
class_name(TripletClass c);
TripletClass
parse_class(std::string_view s);

struct CandidateTriplet {
    std::string q;
    std::string p;
    std::string n;
    TripletClass cls = TripletClass::kOutOfClass;
    std::vector<std::string> p_sources;  // BISS names whose positive pool held p
    std::vector<std::string> n_sources;  // BISS names for in-class n, "outclass" otherwise

    std::tuple<std::string, std::string, std::string>
    key() const {
        return {q, p, n};
    }
    bool
    operator==(const CandidateTriplet&) const = default;
};

/// Corpus positions line up with the BISS item positions.
struct TripletCorpus {
    std::vector<std::string> ids;
    std::vector<ItemMetadata> metadata;
};

struct GeneratorConfig {
    std::size_t count = 0;
    double inclass_fraction = 0.3;
    std::uint64_t seed = 1;
    std::optional<PoolConfig> pools;  // unset: PoolConfig::for_group_size per group
};

struct GenerationResult {
    std::vector<CandidateTriplet> triplets;  // canonical order: q, class, n, p
    std::vector<std::string> warnings;
};

/// Samples distinct triplets: q uniform over the corpus, p uniform over its
/// positive pool, n uniform over the pool of the slot's class. Exactly
/// round(inclass_fraction * count) in-class slots.
GenerationResult
generate_candidates(const TripletCorpus& corpus, std::span<const Biss* const> bisses, const GeneratorConfig& cfg);

enum class Verdict { kAccept, kSwap, kReject };

struct VettingRecord {
    std::string q;
    std::string p;
    std::string n;
    Verdict verdict = Verdict::kAccept;
};

/// accept keeps, swap exchanges p and n, reject drops; candidates without a
/// record are kept. A record matching no candidate is ErrorCode::kStaleVetting.
std::vector<CandidateTriplet>
apply_vetting(std::vector<CandidateTriplet> candidates, std::span<const VettingRecord> records);

nlohmann::json
triplet_to_json(const CandidateTriplet& t);
CandidateTriplet
triplet_from_json(const nlohmann::json& j);
std::vector<CandidateTriplet>
load_triplets(const std::string& path);
void
save_triplets(const std::string& path, std::span<const CandidateTriplet> triplets);

std::vector<VettingRecord>
load_vetting(const std::string& path);

}  // namespace visrec::triplets
