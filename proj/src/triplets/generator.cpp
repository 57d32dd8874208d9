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

#include "visrec/triplets/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <unordered_map>

#include "visrec/error.hpp"

namespace visrec::triplets {

using nlohmann::json;

PoolConfig
PoolConfig::catalog_scale() {
    return {};
}

PoolConfig
PoolConfig::for_group_size(std::size_t n) {
    if (n >= 1250) {
        return catalog_scale();
    }
    auto ceil_frac = [](std::size_t v, std::size_t num, std::size_t den) { return (v * num + den - 1) / den; };
    PoolConfig c;
    c.k = std::min(ceil_frac(n, 4, 5), n > 0 ? n - 1 : 0);
    c.positive_top = ceil_frac(c.k, 1, 5);
    c.inclass_lo = ceil_frac(c.k, 1, 2);
    c.inclass_hi = c.k;
    return c;
}

void
PoolConfig::validate() const {
    if (!(positive_top <= k && inclass_lo <= inclass_hi && inclass_hi <= k)) {
        throw Error(ErrorCode::kConfig, "pool config needs positive_top <= k and inclass_lo <= inclass_hi <= k");
    }
}

std::optional<Pools>
build_pools(const std::string& query, std::span<const BissRanking> rankings, const PoolConfig& cfg,
            std::span<const std::string> group_ids) {
    cfg.validate();
    std::set<std::string> positive;
    std::set<std::string> inclass;
    std::set<std::string> near;  // anything inside some ranking's top inclass_hi
    for (const auto& r : rankings) {
        if (r.query != query || r.neighbors.size() != cfg.k) {
            throw Error(ErrorCode::kInvalidArgument,
                        "build_pools: ranking '" + r.biss + "' is not a depth-" + std::to_string(cfg.k) +
                            " ranking for " + query);
        }
        for (std::size_t i = 0; i < cfg.inclass_hi; ++i) {
            const auto& id = r.neighbors[i].id;
            near.insert(id);
            if (i < cfg.positive_top) {
                positive.insert(id);
            } else if (i >= cfg.inclass_lo) {
                inclass.insert(id);
            }
        }
    }
    if (positive.empty()) {
        return std::nullopt;
    }
    Pools pools;
    pools.positive.assign(positive.begin(), positive.end());
    for (const auto& id : inclass) {
        if (!positive.contains(id)) {
            pools.inclass.push_back(id);
        }
    }
    for (const auto& id : group_ids) {
        if (id != query && !near.contains(id)) {
            pools.outclass.push_back(id);
        }
    }
    std::sort(pools.outclass.begin(), pools.outclass.end());
    pools.outclass.erase(std::unique(pools.outclass.begin(), pools.outclass.end()), pools.outclass.end());
    return pools;
}

std::string_view
class_name(TripletClass c) {
    return c == TripletClass::kInClass ? "in-class" : "out-of-class";
}

TripletClass
parse_class(std::string_view s) {
    if (s == "in-class") {
        return TripletClass::kInClass;
    }
    if (s == "out-of-class") {
        return TripletClass::kOutOfClass;
    }
    throw Error(ErrorCode::kFormat, "unknown triplet class '" + std::string(s) + "'");
}

namespace {

struct QueryPools {
    std::optional<Pools> pools;
    // per-BISS membership, for provenance
    std::vector<std::set<std::string>> positive_by_biss;
    std::vector<std::set<std::string>> inclass_by_biss;
};

template <typename Rng>
std::size_t
uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

GenerationResult
generate_candidates(const TripletCorpus& corpus, std::span<const Biss* const> bisses, const GeneratorConfig& cfg) {
    if (cfg.count == 0) {
        throw Error(ErrorCode::kInvalidArgument, "triplet count must be > 0");
    }
    if (!(cfg.inclass_fraction >= 0.0 && cfg.inclass_fraction <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "in-class fraction must be in [0, 1]");
    }
    if (bisses.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "at least one BISS is required");
    }
    const std::size_t n = corpus.ids.size();
    if (n == 0 || corpus.metadata.size() != n) {
        throw Error(ErrorCode::kInvalidArgument, "corpus is empty or metadata is misaligned");
    }
    for (const auto* b : bisses) {
        if (b->size() != n) {
            throw Error(ErrorCode::kInvalidArgument, "BISS '" + b->name() + "' does not cover the corpus");
        }
    }

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) {
        groups[corpus.metadata[i].category_group].push_back(i);
    }

    GenerationResult result;
    std::unordered_map<std::size_t, QueryPools> cache;
    auto pools_for = [&](std::size_t q) -> const QueryPools& {
        auto it = cache.find(q);
        if (it != cache.end()) {
            return it->second;
        }
        const auto& members = groups.at(corpus.metadata[q].category_group);
        PoolConfig pc = cfg.pools.value_or(PoolConfig::for_group_size(members.size()));
        QueryPools qp;
        if (members.size() > pc.k) {
            std::vector<BissRanking> rankings;
            std::vector<std::string> group_ids;
            for (auto m : members) {
                group_ids.push_back(corpus.ids[m]);
            }
            for (const auto* b : bisses) {
                rankings.push_back(biss_rank(*b, corpus.ids, q, members, pc.k));
                auto& pos = qp.positive_by_biss.emplace_back();
                auto& inc = qp.inclass_by_biss.emplace_back();
                const auto& nb = rankings.back().neighbors;
                for (std::size_t i = 0; i < pc.inclass_hi; ++i) {
                    if (i < pc.positive_top) {
                        pos.insert(nb[i].id);
                    } else if (i >= pc.inclass_lo) {
                        inc.insert(nb[i].id);
                    }
                }
            }
            qp.pools = build_pools(corpus.ids[q], rankings, pc, group_ids);
        }
        if (!qp.pools) {
            result.warnings.push_back("skipping query " + corpus.ids[q] + ": empty positive pool");
        }
        return cache.emplace(q, std::move(qp)).first->second;
    };

    const auto inclass_count = static_cast<std::size_t>(std::llround(cfg.inclass_fraction * static_cast<double>(cfg.count)));
    std::vector<TripletClass> slots(cfg.count, TripletClass::kOutOfClass);
    std::fill(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(inclass_count), TripletClass::kInClass);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(slots.begin(), slots.end(), rng);

    std::set<std::tuple<std::string, std::string, std::string>> emitted;
    const std::size_t max_attempts = 200;
    std::size_t dropped = 0;
    for (auto cls : slots) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < max_attempts && !placed; ++attempt) {
            std::size_t q = uniform_index(rng, n);
            const auto& qp = pools_for(q);
            if (!qp.pools) {
                continue;
            }
            const auto& negatives = cls == TripletClass::kInClass ? qp.pools->inclass : qp.pools->outclass;
            if (negatives.empty()) {
                continue;
            }
            const auto& p = qp.pools->positive[uniform_index(rng, qp.pools->positive.size())];
            const auto& neg = negatives[uniform_index(rng, negatives.size())];
            if (!emitted.emplace(corpus.ids[q], p, neg).second) {
                continue;
            }
            CandidateTriplet t{corpus.ids[q], p, neg, cls, {}, {}};
            for (std::size_t b = 0; b < bisses.size(); ++b) {
                if (qp.positive_by_biss[b].contains(p)) {
                    t.p_sources.push_back(bisses[b]->name());
                }
                if (cls == TripletClass::kInClass && qp.inclass_by_biss[b].contains(neg)) {
                    t.n_sources.push_back(bisses[b]->name());
                }
            }
            if (cls == TripletClass::kOutOfClass) {
                t.n_sources.push_back("outclass");
            }
            result.triplets.push_back(std::move(t));
            placed = true;
        }
        dropped += placed ? 0 : 1;
    }
    if (dropped > 0) {
        result.warnings.push_back("pool exhaustion: emitted " + std::to_string(result.triplets.size()) + " of " +
                                  std::to_string(cfg.count) + " triplets");
    }
    std::sort(result.triplets.begin(), result.triplets.end(), [](const auto& a, const auto& b) {
        return std::tie(a.q, a.cls, a.n, a.p) < std::tie(b.q, b.cls, b.n, b.p);
    });
    return result;
}

std::vector<CandidateTriplet>
apply_vetting(std::vector<CandidateTriplet> candidates, std::span<const VettingRecord> records) {
    std::map<std::tuple<std::string, std::string, std::string>, Verdict> verdicts;
    for (const auto& r : records) {
        verdicts[{r.q, r.p, r.n}] = r.verdict;
    }
    std::set<std::tuple<std::string, std::string, std::string>> matched;
    std::vector<CandidateTriplet> out;
    out.reserve(candidates.size());
    for (auto& c : candidates) {
        auto it = verdicts.find(c.key());
        if (it == verdicts.end()) {
            out.push_back(std::move(c));
            continue;
        }
        matched.insert(it->first);
        switch (it->second) {
            case Verdict::kAccept:
                out.push_back(std::move(c));
                break;
            case Verdict::kSwap:
                std::swap(c.p, c.n);
                std::swap(c.p_sources, c.n_sources);
                out.push_back(std::move(c));
                break;
            case Verdict::kReject:
                break;
        }
    }
    for (const auto& [key, verdict] : verdicts) {
        if (!matched.contains(key)) {
            throw Error(ErrorCode::kStaleVetting, "vetting record (" + std::get<0>(key) + ", " + std::get<1>(key) +
                                                      ", " + std::get<2>(key) + ") matches no candidate");
        }
    }
    return out;
}

json
triplet_to_json(const CandidateTriplet& t) {
    return {{"q", t.q},
            {"p", t.p},
            {"n", t.n},
            {"class", class_name(t.cls)},
            {"provenance", {{"p", t.p_sources}, {"n", t.n_sources}}}};
}

CandidateTriplet
triplet_from_json(const json& j) {
    try {
        CandidateTriplet t;
        t.q = j.at("q").get<std::string>();
        t.p = j.at("p").get<std::string>();
        t.n = j.at("n").get<std::string>();
        t.cls = parse_class(j.value("class", std::string("out-of-class")));
        if (j.contains("provenance")) {
            const auto& prov = j.at("provenance");
            t.p_sources = prov.value("p", std::vector<std::string>{});
            t.n_sources = prov.value("n", std::vector<std::string>{});
        }
        return t;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kFormat, std::string("triplet record: ") + e.what());
    }
}

std::vector<CandidateTriplet>
load_triplets(const std::string& path) {
    std::vector<CandidateTriplet> out;
    for (const auto& row : read_jsonl(path)) {
        out.push_back(triplet_from_json(row));
    }
    return out;
}

void
save_triplets(const std::string& path, std::span<const CandidateTriplet> triplets) {
    std::vector<json> rows;
    rows.reserve(triplets.size());
    for (const auto& t : triplets) {
        rows.push_back(triplet_to_json(t));
    }
    write_jsonl(path, rows);
}

std::vector<VettingRecord>
load_vetting(const std::string& path) {
    std::vector<VettingRecord> out;
    for (const auto& row : read_jsonl(path)) {
        VettingRecord r;
        try {
            r.q = row.at("q").get<std::string>();
            r.p = row.at("p").get<std::string>();
            r.n = row.at("n").get<std::string>();
            auto v = row.at("verdict").get<std::string>();
            if (v == "accept") {
                r.verdict = Verdict::kAccept;
            } else if (v == "swap") {
                r.verdict = Verdict::kSwap;
            } else if (v == "reject") {
                r.verdict = Verdict::kReject;
            } else {
                throw Error(ErrorCode::kFormat, path + ": unknown verdict '" + v + "'");
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kFormat, path + ": vetting record: " + e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace visrec::triplets
