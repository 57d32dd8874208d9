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

#include <fstream>
#include <functional>
#include <random>
#include <thread>

#include "synthetic.hpp"
#include "visrec/error.hpp"
#include "visrec/ingest/events.hpp"
#include "visrec/ingest/feature_store.hpp"
#include "visrec/ingest/pipeline.hpp"

using namespace visrec;
using namespace visrec::ingest;
using namespace std::chrono_literals;

namespace {

constexpr int kDim = 6;

// Deterministic embedding per image path; paths containing "bad" fail.
class HashExtractor final : public FeatureExtractor {
public:
    Embedding
    extract(const std::string& image_path) const override {
        if (image_path.find("bad") != std::string::npos) {
            throw Error(ErrorCode::kImageMalformed, "unreadable " + image_path);
        }
        std::mt19937_64 rng(std::hash<std::string>{}(image_path));
        std::normal_distribution<float> d;
        Embedding e(kDim);
        for (int i = 0; i < kDim; ++i) {
            e[i] = d(rng);
        }
        return e;
    }
};

IngestionEvent
insert(std::uint64_t seq, const std::string& id, const std::string& image, const std::string& group = "g") {
    IngestionEvent e{seq, EventOp::kInsert, id, image, {}};
    e.metadata.category_group = group;
    return e;
}

IngestionEvent
erase(std::uint64_t seq, const std::string& id) {
    return {seq, EventOp::kDelete, id, {}, {}};
}

std::vector<IngestionEvent>
random_events(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<IngestionEvent> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::string id = "item" + std::to_string(rng() % 60);
        std::uint64_t seq = i + 1;
        auto r = rng() % 10;
        if (r < 5) {
            out.push_back(insert(seq, id, "img/" + std::to_string(rng()) + (r == 0 ? "bad" : ""),
                                 "g" + std::to_string(rng() % 2)));
        } else if (r < 8) {
            auto e = insert(seq, id, "img/" + std::to_string(rng()), "g" + std::to_string(rng() % 2));
            e.op = EventOp::kUpdate;
            out.push_back(e);
        } else {
            out.push_back(erase(seq, id));
        }
    }
    return out;
}

std::vector<index::IndexedItem>
live_items(const StoreState& state) {
    std::vector<index::IndexedItem> items;
    for (const auto& [id, rec] : state) {
        items.push_back({id, rec.embedding, rec.metadata, rec.version});
    }
    return items;
}

}  // namespace

TEST(Events, JsonRoundTrip) {
    auto e = insert(7, "a", "x.ppm", "shoes");
    e.metadata.gender = "f";
    auto back = event_from_json(event_to_json(e));
    EXPECT_EQ(back.seq, 7U);
    EXPECT_EQ(back.op, EventOp::kInsert);
    EXPECT_EQ(back.image, "x.ppm");
    EXPECT_EQ(back.metadata, e.metadata);
    EXPECT_EQ(op_name(EventOp::kUpdate), "update");
    EXPECT_THROW(event_from_json(nlohmann::json{{"seq", 1}, {"op", "upsert"}, {"id", "a"}}), Error);
    EXPECT_THROW(event_from_json(nlohmann::json{{"seq", 1}, {"op", "insert"}, {"id", "a"}}), Error);
}

TEST(Events, ReaderTailsCompleteLines) {
    visrec::testing::TempDir dir;
    auto path = dir.file("events.jsonl");
    append_event(path, insert(1, "a", "a.ppm"));
    append_event(path, insert(2, "b", "b.ppm"));
    EventLogReader reader(path);
    EXPECT_EQ(reader.poll(1).size(), 1U);
    EXPECT_EQ(reader.poll().size(), 1U);
    EXPECT_TRUE(reader.poll().empty());
    {
        std::ofstream f(path, std::ios::app);
        f << R"({"seq":3,"op":"delete",)";
    }
    EXPECT_TRUE(reader.poll().empty());
    {
        std::ofstream f(path, std::ios::app);
        f << R"("id":"a"})" << "\n";
    }
    auto rest = reader.poll();
    ASSERT_EQ(rest.size(), 1U);
    EXPECT_EQ(rest[0].op, EventOp::kDelete);
    EXPECT_EQ(reader.last_seq(), 3U);
}

TEST(Events, OutOfOrderIsAnError) {
    visrec::testing::TempDir dir;
    auto path = dir.file("events.jsonl");
    append_event(path, insert(5, "a", "a.ppm"));
    append_event(path, insert(5, "b", "b.ppm"));
    EventLogReader reader(path);
    try {
        reader.poll();
        FAIL() << "expected an out-of-order error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kOutOfOrder);
    }
}

TEST(Events, MissingLogReadsAsEmpty) {
    visrec::testing::TempDir dir;
    EventLogReader reader(dir.file("later.jsonl"));
    EXPECT_TRUE(reader.poll().empty());
}

TEST(Store, InsertThenDeleteResolvesToAbsent) {
    FeatureStore store;
    HashExtractor ex;
    EXPECT_EQ(apply_event(store, insert(1, "a", "a.ppm"), ex), ApplyOutcome::kApplied);
    EXPECT_TRUE(store.state().contains("a"));
    EXPECT_EQ(apply_event(store, erase(2, "a"), ex), ApplyOutcome::kApplied);
    EXPECT_FALSE(store.state().contains("a"));
    EXPECT_EQ(store.last_applied(), 2U);
}

TEST(Store, ReplayedEventIsSkipped) {
    FeatureStore store;
    HashExtractor ex;
    apply_event(store, insert(1, "a", "a.ppm"), ex);
    auto before = store.state_bytes();
    auto records = store.record_count();
    EXPECT_EQ(apply_event(store, insert(1, "a", "other.ppm"), ex), ApplyOutcome::kSkipped);
    EXPECT_EQ(store.state_bytes(), before);
    EXPECT_EQ(store.record_count(), records);
}

TEST(Store, UpdateReplacesEmbeddingAndVersion) {
    FeatureStore store;
    HashExtractor ex;
    apply_event(store, insert(1, "a", "a.ppm"), ex);
    auto upd = insert(4, "a", "a2.ppm");
    upd.op = EventOp::kUpdate;
    apply_event(store, upd, ex);
    const auto& rec = store.state().at("a");
    EXPECT_EQ(rec.version, 4U);
    EXPECT_TRUE(rec.embedding.isApprox(ex.extract("a2.ppm")));
}

TEST(Store, UnreadableImageIsQuarantined) {
    visrec::testing::TempDir dir;
    FeatureStore store;
    HashExtractor ex;
    DeadLetters dead(dir.file("dead.jsonl"));
    EXPECT_EQ(apply_event(store, insert(1, "a", "bad.ppm"), ex, &dead), ApplyOutcome::kQuarantined);
    EXPECT_FALSE(store.state().contains("a"));
    EXPECT_EQ(store.last_applied(), 1U);
    ASSERT_EQ(dead.entries().size(), 1U);
    auto lines = read_jsonl(dir.file("dead.jsonl"));
    ASSERT_EQ(lines.size(), 1U);
    EXPECT_EQ(lines[0].at("id"), "a");
    EXPECT_TRUE(lines[0].contains("error"));
    // the pipeline continues with the next event
    EXPECT_EQ(apply_event(store, insert(2, "b", "b.ppm"), ex, &dead), ApplyOutcome::kApplied);
}

TEST(Store, ReplayReproducesState) {
    FeatureStore store;
    HashExtractor ex;
    for (const auto& e : random_events(1000, 1)) {
        apply_event(store, e, ex);
    }
    auto replayed = FeatureStore::replay(store.log());
    EXPECT_EQ(replayed.state_bytes(), store.state_bytes());
    EXPECT_EQ(replayed.last_applied(), store.last_applied());
    FeatureStore rerun;
    for (const auto& e : random_events(1000, 1)) {
        apply_event(rerun, e, ex);
    }
    EXPECT_EQ(rerun.log(), store.log());
}

TEST(Store, TruncatedLogYieldsLastCompleteRecord) {
    FeatureStore store;
    HashExtractor ex;
    std::vector<std::pair<std::size_t, std::string>> checkpoints = {{store.log().size(), store.state_bytes()}};
    for (const auto& e : random_events(25, 2)) {
        apply_event(store, e, ex);
        checkpoints.emplace_back(store.log().size(), store.state_bytes());
    }
    const auto& log = store.log();
    for (std::size_t cut = checkpoints.front().first; cut <= log.size(); ++cut) {
        auto it = std::upper_bound(checkpoints.begin(), checkpoints.end(), cut,
                                   [](std::size_t c, const auto& cp) { return c < cp.first; });
        auto replayed = FeatureStore::replay(std::string_view(log).substr(0, cut));
        ASSERT_EQ(replayed.state_bytes(), std::prev(it)->second) << "cut at " << cut;
    }
}

TEST(Store, CorruptRecordStopsReplay) {
    FeatureStore store;
    HashExtractor ex;
    apply_event(store, insert(1, "a", "a.ppm"), ex);
    auto after_one = store.state_bytes();
    auto size_one = store.log().size();
    apply_event(store, insert(2, "b", "b.ppm"), ex);
    auto bytes = store.log();
    bytes[bytes.size() - 3] ^= 0x5A;
    auto replayed = FeatureStore::replay(bytes);
    EXPECT_EQ(replayed.state_bytes(), after_one);
    EXPECT_EQ(replayed.log().size(), size_one);
    EXPECT_THROW(FeatureStore::replay("NOTASTORE"), Error);
}

TEST(Store, FileBackedReopenTruncatesTornTail) {
    visrec::testing::TempDir dir;
    auto path = dir.file("store.bin");
    HashExtractor ex;
    std::string expect;
    {
        auto store = FeatureStore::open(path);
        apply_event(store, insert(1, "a", "a.ppm"), ex);
        apply_event(store, insert(2, "b", "b.ppm"), ex);
        expect = store.state_bytes();
    }
    {
        std::ofstream f(path, std::ios::binary | std::ios::app);
        f << "\x10\x00\x00\x00partial";
    }
    auto size_before = std::filesystem::file_size(path);
    {
        auto store = FeatureStore::open(path);
        EXPECT_EQ(store.state_bytes(), expect);
        EXPECT_LT(std::filesystem::file_size(path), size_before);
        apply_event(store, insert(3, "c", "c.ppm"), ex);
        expect = store.state_bytes();
    }
    EXPECT_EQ(FeatureStore::open(path).state_bytes(), expect);
}

TEST(Compaction, NoShadowedRecordsKeepsState) {
    FeatureStore store;
    HashExtractor ex;
    for (int i = 0; i < 10; ++i) {
        apply_event(store, insert(static_cast<std::uint64_t>(i + 1), "id" + std::to_string(i), "p" + std::to_string(i)), ex);
    }
    auto before = store.state_bytes();
    store.compact();
    EXPECT_EQ(store.state_bytes(), before);
    // ten puts plus the record carrying the applied sequence
    EXPECT_EQ(store.record_count(), 11U);
}

TEST(Compaction, AtMostOneRecordPerId) {
    FeatureStore store;
    HashExtractor ex;
    std::uint64_t seq = 0;
    for (int i = 0; i < 100; ++i) {
        std::string id = "id" + std::to_string(i);
        apply_event(store, insert(++seq, id, id + ".ppm"), ex);
        auto upd = insert(++seq, id, id + "_v2.ppm");
        upd.op = EventOp::kUpdate;
        apply_event(store, upd, ex);
        apply_event(store, erase(++seq, id), ex);
    }
    store.compact();
    EXPECT_LE(store.record_count(), 101U);
    EXPECT_TRUE(store.state().empty());
    EXPECT_EQ(store.last_applied(), seq);
    // the applied sequence survives a replay of the compacted log
    EXPECT_EQ(FeatureStore::replay(store.log()).last_applied(), seq);
}

TEST(Compaction, RandomLogsKeepVisibleState) {
    HashExtractor ex;
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        FeatureStore store;
        for (const auto& e : random_events(300, seed)) {
            apply_event(store, e, ex);
        }
        auto before = store.state_bytes();
        store.compact();
        EXPECT_EQ(store.state_bytes(), before);
        EXPECT_EQ(FeatureStore::replay(store.log()).state_bytes(), before);
        EXPECT_LE(store.record_count(), 61U);
    }
}

TEST(Refresh, EmptyDeltaKeepsGeneration) {
    FeatureStore store;
    HashExtractor ex;
    apply_event(store, insert(1, "a", "a.ppm"), ex);
    apply_event(store, insert(2, "b", "b.ppm"), ex);
    auto prev = std::make_shared<const index::KnnIndex>(index::build(live_items(store.state()), 3));
    EXPECT_TRUE(compute_delta(store.state(), *prev).empty());
    EXPECT_EQ(refresh(store.state(), prev), prev);
    EXPECT_THROW(refresh(store.state(), nullptr), Error);
}

TEST(Refresh, InsertVisibleOnlyAfterRefresh) {
    FeatureStore store;
    HashExtractor ex;
    apply_event(store, insert(1, "a", "a.ppm"), ex);
    auto prev = std::make_shared<const index::KnnIndex>(index::build(live_items(store.state()), 3));
    apply_event(store, insert(2, "new", "new.ppm"), ex);
    auto q = ex.extract("new.ppm");
    EXPECT_NE(index::query(*prev, q, 1).entries.front().id, "new");
    auto next = refresh(store.state(), prev);
    EXPECT_EQ(next->generation(), prev->generation() + 1);
    EXPECT_EQ(index::query(*next, q, 1).entries.front().id, "new");
}

TEST(Refresh, InterleavedInsertsAndDeletesMatchRebuild) {
    FeatureStore store;
    HashExtractor ex;
    std::uint64_t seq = 0;
    for (int i = 0; i < 20; ++i) {
        apply_event(store, insert(++seq, "base" + std::to_string(i), "b" + std::to_string(i), "g" + std::to_string(i % 2)), ex);
    }
    auto prev = std::make_shared<const index::KnnIndex>(index::build(live_items(store.state()), 4));
    for (int i = 0; i < 50; ++i) {
        apply_event(store, insert(++seq, "n" + std::to_string(i), "n" + std::to_string(i), "g" + std::to_string(i % 2)), ex);
        if (i % 5 == 0) {
            apply_event(store, erase(++seq, "base" + std::to_string(i / 5)), ex);
        }
    }
    auto delta = compute_delta(store.state(), *prev);
    EXPECT_EQ(delta.added.size(), 50U);
    EXPECT_EQ(delta.removed.size(), 10U);
    auto next = refresh(store.state(), prev);
    EXPECT_TRUE(next->same_content(index::build(live_items(store.state()), 4)));
}

TEST(Refresh, VersionChangeIsRemovePlusAdd) {
    FeatureStore store;
    HashExtractor ex;
    apply_event(store, insert(1, "a", "a.ppm"), ex);
    apply_event(store, insert(2, "b", "b.ppm"), ex);
    auto prev = index::build(live_items(store.state()), 2);
    auto upd = insert(3, "a", "a_v2.ppm");
    upd.op = EventOp::kUpdate;
    apply_event(store, upd, ex);
    auto delta = compute_delta(store.state(), prev);
    EXPECT_EQ(delta.removed, std::vector<std::string>{"a"});
    ASSERT_EQ(delta.added.size(), 1U);
    EXPECT_EQ(delta.added[0].version, 3U);
}

TEST(Policy, Durations) {
    EXPECT_EQ(parse_duration("30m"), 30min);
    EXPECT_EQ(parse_duration("30s"), 30s);
    EXPECT_EQ(parse_duration("1500ms"), 1500ms);
    EXPECT_EQ(parse_duration("2h"), 2h);
    EXPECT_EQ(parse_duration("45"), 45s);
    EXPECT_THROW(parse_duration("soon"), Error);
    EXPECT_THROW(parse_duration("5d"), Error);
    RefreshPolicy p;
    EXPECT_EQ(p.interval, 30min);
    p.interval = 0ms;
    EXPECT_THROW(p.validate(), Error);
}

TEST(Pipeline, FreshnessAndNoEventLoss) {
    visrec::testing::TempDir dir;
    auto events_path = dir.file("events.jsonl");
    FeatureStore store;
    HashExtractor ex;
    DeadLetters dead;
    apply_event(store, insert(1, "seed", "seed.ppm"), ex);
    index::Publisher pub(std::make_shared<const index::KnnIndex>(index::build(live_items(store.state()), 3)));
    IngestPipeline pipeline(store, ex, pub, RefreshPolicy{200ms, 10}, &dead);
    EventLogReader reader(events_path);
    pipeline.start(&reader, 10ms);
    auto events = random_events(60, 7);
    for (auto& e : events) {
        e.seq += 1;
        append_event(events_path, e);
    }
    auto deadline = std::chrono::steady_clock::now() + 10s;
    while (store.last_applied() < 61 && std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(10ms);
    }
    EXPECT_TRUE(pipeline.refresh_now() || pub.current()->same_content(index::build(live_items(pipeline.snapshot_state()), 3)));
    pipeline.stop();
    EXPECT_EQ(pipeline.last_error(), "");
    EXPECT_EQ(reader.last_seq(), 61U);

    std::size_t bad = 0;
    for (const auto& e : events) {
        bad += e.op != EventOp::kDelete && e.image.find("bad") != std::string::npos ? 1 : 0;
    }
    EXPECT_EQ(dead.entries().size(), bad);
    auto state = pipeline.snapshot_state();
    EXPECT_TRUE(pub.current()->same_content(index::build(live_items(state), 3)));
    EXPECT_GE(pipeline.refreshes(), 1U);
}

TEST(Pipeline, RefreshWithoutChangesDoesNotRepublish) {
    FeatureStore store;
    HashExtractor ex;
    apply_event(store, insert(1, "a", "a.ppm"), ex);
    auto first = std::make_shared<const index::KnnIndex>(index::build(live_items(store.state()), 3));
    index::Publisher pub(first);
    IngestPipeline pipeline(store, ex, pub, RefreshPolicy{1h, 5});
    EXPECT_FALSE(pipeline.refresh_now());
    EXPECT_EQ(pub.current(), first);
    EXPECT_EQ(pipeline.submit(insert(2, "b", "b.ppm")), ApplyOutcome::kApplied);
    EXPECT_EQ(pipeline.submit(insert(2, "b", "b.ppm")), ApplyOutcome::kSkipped);
    EXPECT_TRUE(pipeline.refresh_now());
    EXPECT_EQ(pub.current()->generation(), 1U);
}
