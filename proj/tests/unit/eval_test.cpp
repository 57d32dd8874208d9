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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "synthetic.hpp"
#include "visrec/error.hpp"
#include "visrec/eval/metrics.hpp"
#include "visrec/eval/report.hpp"

using namespace visrec;
using namespace visrec::eval;
using triplets::CandidateTriplet;
using triplets::TripletClass;

namespace {

// Points on a number line: D(a, b) = |x_a - x_b|.
std::map<std::string, Embedding>
line(std::initializer_list<std::pair<std::string, float>> points) {
    std::map<std::string, Embedding> out;
    for (const auto& [id, x] : points) {
        Embedding e(1);
        e[0] = x;
        out[id] = e;
    }
    return out;
}

CandidateTriplet
t(const std::string& q, const std::string& p, const std::string& n, TripletClass c = TripletClass::kOutOfClass) {
    return {q, p, n, c, {}, {}};
}

// Items r0..r{n-1} at x = 1..n in group `group`, so a query at the origin
// ranks r_i at position i.
std::vector<index::IndexedItem>
ranked_items(std::size_t n, const std::string& group, const std::string& prefix = "r") {
    std::vector<index::IndexedItem> items;
    for (std::size_t i = 0; i < n; ++i) {
        Embedding e(1);
        e[0] = static_cast<float>(i + 1);
        ItemMetadata m;
        m.category_group = group;
        items.push_back({prefix + std::to_string(i), e, m, 1});
    }
    return items;
}

RecallQuery
origin_query(const std::string& id, std::vector<std::string> matches) {
    return {id, Embedding::Zero(1), std::move(matches), {}};
}

}  // namespace

TEST(TripletAccuracyTest, AllCorrect) {
    auto emb = line({{"q", 0}, {"p", 1}, {"n", 2}});
    std::vector<CandidateTriplet> set = {t("q", "p", "n", TripletClass::kInClass), t("q", "p", "n")};
    auto acc = triplet_accuracy(set, emb);
    EXPECT_EQ(acc.total_percent(), 100.0);
    EXPECT_EQ(acc.inclass_percent(), 100.0);
    EXPECT_EQ(acc.outclass_percent(), 100.0);
}

TEST(TripletAccuracyTest, SevenOfTen) {
    auto emb = line({{"q", 0}, {"p", 1}, {"n", 2}});
    std::vector<CandidateTriplet> set;
    for (int i = 0; i < 7; ++i) {
        set.push_back(t("q", "p", "n"));
    }
    for (int i = 0; i < 3; ++i) {
        set.push_back(t("q", "n", "p"));
    }
    auto acc = triplet_accuracy(set, emb);
    EXPECT_EQ(acc.correct(), 7U);
    EXPECT_EQ(acc.total(), 10U);
    EXPECT_DOUBLE_EQ(*acc.total_percent(), 70.0);
    EXPECT_FALSE(acc.inclass_percent().has_value());
}

TEST(TripletAccuracyTest, TiesScoreZero) {
    auto emb = line({{"q", 0}, {"p", 1}, {"n", -1}});
    std::vector<CandidateTriplet> set = {t("q", "p", "n")};
    EXPECT_EQ(triplet_accuracy(set, emb).correct(), 0U);
}

TEST(TripletAccuracyTest, InvariantUnderMonotoneTransform) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 5);
    std::map<std::pair<std::string, std::string>, double> d;
    std::vector<CandidateTriplet> set;
    for (int i = 0; i < 200; ++i) {
        auto q = "q" + std::to_string(i), p = "p" + std::to_string(i), n = "n" + std::to_string(i);
        d[{q, p}] = u(rng);
        d[{q, n}] = u(rng);
        set.push_back(t(q, p, n, i % 3 == 0 ? TripletClass::kInClass : TripletClass::kOutOfClass));
    }
    DistanceFn base = [&](const std::string& a, const std::string& b) { return d.at({a, b}); };
    DistanceFn squashed = [&](const std::string& a, const std::string& b) { return std::exp(3 * d.at({a, b})) - 7; };
    EXPECT_EQ(triplet_accuracy(set, base), triplet_accuracy(set, squashed));
}

TEST(TripletAccuracyTest, TotalIsWeightedMean) {
    auto emb = line({{"q", 0}, {"p", 1}, {"n", 2}});
    std::vector<CandidateTriplet> set;
    for (int i = 0; i < 9; ++i) {
        set.push_back(t("q", i < 4 ? "p" : "n", i < 4 ? "n" : "p", TripletClass::kInClass));
    }
    for (int i = 0; i < 21; ++i) {
        set.push_back(t("q", i < 17 ? "p" : "n", i < 17 ? "n" : "p"));
    }
    auto acc = triplet_accuracy(set, emb);
    double weighted = (*acc.inclass_percent() * 9 + *acc.outclass_percent() * 21) / 30;
    EXPECT_NEAR(*acc.total_percent(), weighted, 1e-12);
}

TEST(TripletAccuracyTest, UnknownIdIsAnError) {
    auto emb = line({{"q", 0}, {"p", 1}});
    std::vector<CandidateTriplet> set = {t("q", "p", "ghost")};
    try {
        triplet_accuracy(set, emb);
        FAIL() << "expected an unknown id error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kUnknownId);
    }
}

TEST(Recall, KAtCatalogSizeIsFull) {
    auto items = ranked_items(12, "g");
    auto idx = index::build(items, 3);
    std::vector<RecallQuery> queries = {origin_query("a", {"r11"}), origin_query("b", {"r5"})};
    auto curves = recall_curves(idx, queries, {12});
    ASSERT_FALSE(curves.empty());
    EXPECT_EQ(curves[0].category, "all");
    EXPECT_EQ(curves[0].recall_percent(0), 100.0);
}

TEST(Recall, ThreeOfSixPlanted) {
    auto items = ranked_items(30, "g");
    auto idx = index::build(items, 3);
    std::vector<RecallQuery> queries;
    // matches at ranks 0, 3, 4 fall inside top-5; ranks 5, 10, 29 do not
    for (int rank : {0, 3, 4, 5, 10, 29}) {
        queries.push_back(origin_query("q" + std::to_string(rank), {"r" + std::to_string(rank)}));
    }
    auto curves = recall_curves(idx, queries, {5});
    EXPECT_EQ(curves[0].queries, 6U);
    EXPECT_EQ(curves[0].hits[0], 3U);
    EXPECT_DOUBLE_EQ(curves[0].recall_percent(0), 50.0);
}

TEST(Recall, AnyMatchCountsAndSelfIsExcluded) {
    auto items = ranked_items(10, "g");
    auto idx = index::build(items, 3);
    // stored query r0: its nearest other item is r1
    std::vector<RecallQuery> queries = {{"r0", std::nullopt, {"r9", "r1"}, {}}};
    auto curves = recall_curves(idx, queries, {1, 2});
    EXPECT_EQ(curves[0].hits, (std::vector<std::uint64_t>{1, 1}));
    std::vector<RecallQuery> self_only = {{"r0", std::nullopt, {"r0"}, {}}};
    EXPECT_EQ(recall_curves(idx, self_only, {9}).front().hits[0], 0U);
}

TEST(Recall, PerCategoryRowsPrunedToGroup) {
    auto items = ranked_items(10, "tops", "t");
    auto skirts = ranked_items(10, "skirts", "s");
    items.insert(items.end(), skirts.begin(), skirts.end());
    auto idx = index::build(items, 3);
    std::vector<RecallQuery> queries = {origin_query("a", {"t0"}), origin_query("b", {"s0"}), origin_query("c", {"s4"})};
    auto curves = recall_curves(idx, queries, {1, 5});
    ASSERT_EQ(curves.size(), 3U);
    EXPECT_EQ(curves[0].category, "all");
    EXPECT_EQ(curves[1].category, "skirts");
    EXPECT_EQ(curves[2].category, "tops");
    EXPECT_EQ(curves[0].hits, (std::vector<std::uint64_t>{2, 3}));
    EXPECT_EQ(curves[1].hits, (std::vector<std::uint64_t>{1, 2}));
    EXPECT_EQ(curves[2].hits, (std::vector<std::uint64_t>{1, 1}));
}

TEST(Recall, MissingIdsAreListed) {
    auto idx = index::build(ranked_items(5, "g"), 2);
    std::vector<RecallQuery> queries = {{"ghost_q", std::nullopt, {"r1"}, {}}, origin_query("a", {"ghost_m"})};
    try {
        recall_curves(idx, queries, {1});
        FAIL() << "expected an unknown id error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kUnknownId);
        std::string msg = e.what();
        EXPECT_NE(msg.find("ghost_q"), std::string::npos);
        EXPECT_NE(msg.find("ghost_m"), std::string::npos);
    }
    std::vector<RecallQuery> empty_match = {origin_query("a", {})};
    EXPECT_THROW(recall_curves(idx, empty_match, {1}), Error);
}

TEST(Recall, MonotoneInK) {
    auto items = visrec::testing::random_items(300, 8, 3, 4);
    auto idx = index::build(items, 5);
    std::mt19937_64 rng(5);
    std::vector<RecallQuery> queries;
    for (int i = 0; i < 40; ++i) {
        const auto& q = items[rng() % items.size()];
        std::vector<std::string> matches;
        for (const auto& it : items) {
            if (it.metadata.category_group == q.metadata.category_group && it.id != q.id && rng() % 25 == 0) {
                matches.push_back(it.id);
            }
        }
        if (!matches.empty()) {
            queries.push_back({q.id, std::nullopt, matches, {}});
        }
    }
    auto curves = recall_curves(idx, queries, {1, 2, 5, 10, 20, 50});
    for (const auto& c : curves) {
        EXPECT_TRUE(std::is_sorted(c.hits.begin(), c.hits.end())) << c.category;
    }
}

TEST(Recall, GroundTruthFile) {
    visrec::testing::TempDir dir;
    {
        std::ofstream f(dir.file("gt.jsonl"));
        f << R"({"query_id":"r0","matches":["r1","r2"],"category":"tops"})" << "\n"
          << R"({"query_image":"imgs/q.ppm","matches":["r3"]})" << "\n";
    }
    std::vector<std::string> seen;
    auto queries = load_ground_truth(dir.file("gt.jsonl"), [&](const std::string& path) {
        seen.push_back(path);
        return Embedding::Zero(1);
    });
    ASSERT_EQ(queries.size(), 2U);
    EXPECT_EQ(queries[0].category, "tops");
    EXPECT_EQ(queries[0].matches.size(), 2U);
    EXPECT_TRUE(queries[1].embedding.has_value());
    ASSERT_EQ(seen.size(), 1U);
    EXPECT_EQ(seen[0], dir.file("imgs/q.ppm"));
}

namespace {

EvalReport
sample_report() {
    EvalReport r;
    r.triplets = TripletAccuracy{93, 100, 290, 300};
    r.recall.push_back({"all", {1, 5, 20}, {4, 9, 15}, 18});
    r.recall.push_back({"tops", {1, 5, 20}, {1, 3, 7}, 9});
    r.provenance = "held-out toy corpus";
    r.ratings = nlohmann::json::object({{"excellent", 3}});
    return r;
}

std::string
slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST(Report, JsonRoundTrip) {
    auto r = sample_report();
    EXPECT_EQ(report_from_json(report_to_json(r)), r);
}

TEST(Report, CsvRoundTrip) {
    auto r = sample_report();
    auto csv = triplets_csv(r.triplets);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "class,correct,total,accuracy");
    EXPECT_EQ(parse_triplets_csv(csv), r.triplets);
    auto rcsv = recall_csv(r.recall);
    EXPECT_EQ(rcsv.substr(0, rcsv.find('\n')), "category,k,queries,hits,recall");
    EXPECT_EQ(parse_recall_csv(rcsv), r.recall);
}

TEST(Report, EmptyReportIsValid) {
    visrec::testing::TempDir dir;
    EvalReport empty;
    emit_report(empty, dir.file("out"));
    auto j = nlohmann::json::parse(slurp(dir.file("out/report.json")));
    EXPECT_EQ(report_from_json(j), empty);
    EXPECT_TRUE(parse_recall_csv(slurp(dir.file("out/recall.csv"))).empty());
    EXPECT_FALSE(parse_triplets_csv(slurp(dir.file("out/triplets.csv"))).has_value());
    EXPECT_NE(slurp(dir.file("out/recall.svg")).find("<svg"), std::string::npos);
}

TEST(Report, DeterministicBytes) {
    visrec::testing::TempDir dir;
    emit_report(sample_report(), dir.file("a"));
    emit_report(sample_report(), dir.file("b"));
    for (const char* name : {"report.json", "triplets.csv", "recall.csv", "recall.svg"}) {
        auto a = slurp(dir.file(std::string("a/") + name));
        EXPECT_FALSE(a.empty()) << name;
        EXPECT_EQ(a, slurp(dir.file(std::string("b/") + name))) << name;
    }
    EXPECT_EQ(parse_recall_csv(slurp(dir.file("a/recall.csv"))), sample_report().recall);
}

TEST(Report, UnwritablePathIsAnError) {
    visrec::testing::TempDir dir;
    {
        std::ofstream f(dir.file("blocker"));
        f << "x";
    }
    EXPECT_THROW(emit_report(sample_report(), dir.file("blocker/out")), std::exception);
}
