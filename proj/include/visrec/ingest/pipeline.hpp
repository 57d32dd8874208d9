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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "visrec/index/knn_index.hpp"
#include "visrec/ingest/events.hpp"
#include "visrec/ingest/feature_store.hpp"

namespace visrec::ingest {

struct RefreshPolicy {
    std::chrono::milliseconds interval = std::chrono::minutes(30);
    std::size_t max_batch = 1000;  // events applied per consumer poll

    void
    validate() const;
};

/// Parses "30m", "30s", "1500ms", "2h" or a bare number of seconds.
std::chrono::milliseconds
parse_duration(std::string_view text);

struct IndexDelta {
    std::vector<index::IndexedItem> added;
    std::vector<std::string> removed;

    bool
    empty() const {
        return added.empty() && removed.empty();
    }
};

/// Id+version diff between the store's live items and an index generation.
/// A changed version becomes remove+add.
IndexDelta
compute_delta(const StoreState& state, const index::KnnIndex& previous);

/// Next generation for `state`. Returns `previous` itself when nothing
/// changed, so no republication happens.
std::shared_ptr<const index::KnnIndex>
refresh(const StoreState& state, const std::shared_ptr<const index::KnnIndex>& previous);

/// Single-consumer ingestion loop plus a periodic refresher publishing new
/// index generations. Event application and refresh never block each
/// other beyond the copy of the live state taken when a refresh starts.
class IngestPipeline {
public:
    IngestPipeline(FeatureStore& store, const FeatureExtractor& extractor, index::Publisher& publisher,
                   RefreshPolicy policy, DeadLetters* dead_letters = nullptr);
    ~IngestPipeline();

    IngestPipeline(const IngestPipeline&) = delete;
    IngestPipeline&
    operator=(const IngestPipeline&) = delete;

    ApplyOutcome
    submit(const IngestionEvent& event);

    /// Applies up to policy.max_batch new events from the reader.
    std::size_t
    consume(EventLogReader& reader);

    /// Refreshes from the current store state; true when a new generation
    /// was published.
    bool
    refresh_now();

    StoreState
    snapshot_state() const;

    /// Background consumer (polling `reader`, if given) and refresher.
    void
    start(EventLogReader* reader, std::chrono::milliseconds poll_interval = std::chrono::milliseconds(50));
    void
    stop();

    std::uint64_t
    refreshes() const {
        return refreshes_.load();
    }
    std::string
    last_error() const;

private:
    void
    record_error(const std::string& message);

    FeatureStore& store_;
    const FeatureExtractor& extractor_;
    index::Publisher& publisher_;
    RefreshPolicy policy_;
    DeadLetters* dead_letters_;

    mutable std::mutex store_mu_;
    std::mutex refresh_mu_;
    std::atomic<std::uint64_t> refreshes_{0};

    std::mutex wake_mu_;
    std::condition_variable wake_;
    bool stopping_ = false;
    std::vector<std::thread> threads_;
    mutable std::mutex error_mu_;
    std::string last_error_;
};

}  // namespace visrec::ingest
