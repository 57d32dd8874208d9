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
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "visrec/catalog.hpp"
#include "visrec/embedding.hpp"
#include "visrec/ingest/events.hpp"

namespace visrec::net {
struct Model;
}

namespace visrec::ingest {

enum class RecordKind : std::uint8_t {
    kPut = 1,
    kTombstone = 2,
    kSeqMark = 3,  // advances the applied sequence without touching items
};

struct FeatureRecord {
    RecordKind kind = RecordKind::kPut;
    std::uint64_t seq = 0;
    std::string id;
    std::uint64_t version = 0;
    ItemMetadata metadata;
    Embedding embedding;
};

/// Latest live record per id.
using StoreState = std::map<std::string, FeatureRecord>;

inline constexpr std::string_view kStoreMagic = "VRFS001";

/// Append-only feature log. Each record is framed as u32 length, u32 CRC-32
/// and payload; replay stops at the first short or corrupt frame, so a log
/// cut at any point yields the state of its last complete record.
class FeatureStore {
public:
    /// In-memory store (the log is kept in memory only).
    FeatureStore();

    /// Opens or creates a file-backed store, replaying the existing log and
    /// truncating any torn tail.
    static FeatureStore
    open(const std::string& path);
    static FeatureStore
    replay(std::string_view log_bytes);

    FeatureStore(FeatureStore&&) noexcept;
    FeatureStore&
    operator=(FeatureStore&&) noexcept;
    ~FeatureStore();

    std::uint64_t
    last_applied() const {
        return last_applied_;
    }
    const StoreState&
    state() const {
        return state_;
    }
    const std::string&
    log() const {
        return log_;
    }
    std::size_t
    record_count() const {
        return records_;
    }
    std::uint64_t
    compaction_watermark() const {
        return watermark_;
    }

    void
    append(const FeatureRecord& record);

    /// Rewrites the log keeping the latest record per live id; tombstones at
    /// or below `watermark` (default: everything applied) are dropped.
    void
    compact(std::optional<std::uint64_t> watermark = std::nullopt);

    /// Canonical bytes of the visible state, for equality checks.
    std::string
    state_bytes() const;

private:
    void
    apply_record(const FeatureRecord& record);

    std::string log_;
    StoreState state_;
    std::map<std::string, std::uint64_t> tombstones_;  // id -> seq
    std::uint64_t last_applied_ = 0;
    std::uint64_t watermark_ = 0;
    std::size_t records_ = 0;
    std::string path_;
    std::unique_ptr<std::ofstream> file_;
};

std::string
encode_record(const FeatureRecord& record);

/// Produces an embedding from an image path. Throws visrec::Error on
/// unreadable or invalid images.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual Embedding
    extract(const std::string& image_path) const = 0;
};

class ModelExtractor final : public FeatureExtractor {
public:
    explicit ModelExtractor(std::shared_ptr<const net::Model> model);
    Embedding
    extract(const std::string& image_path) const override;

private:
    std::shared_ptr<const net::Model> model_;
};

/// Events that could not be applied, with the reason. Written as JSONL when
/// a path is given.
class DeadLetters {
public:
    explicit DeadLetters(std::string path = {}) : path_(std::move(path)) {
    }

    void
    add(const IngestionEvent& event, const std::string& reason);
    const std::vector<nlohmann::json>&
    entries() const {
        return entries_;
    }

private:
    std::string path_;
    std::vector<nlohmann::json> entries_;
};

enum class ApplyOutcome { kApplied, kSkipped, kQuarantined };

/// Applies one event. Already-applied sequence numbers are skipped; an
/// image that cannot be read sends the event to `dead_letters` and the
/// sequence still advances.
ApplyOutcome
apply_event(FeatureStore& store, const IngestionEvent& event, const FeatureExtractor& extractor,
            DeadLetters* dead_letters = nullptr);

}  // namespace visrec::ingest
