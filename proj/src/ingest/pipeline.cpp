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

#include "visrec/ingest/pipeline.hpp"

#include <charconv>
#include <set>

#include "visrec/error.hpp"

namespace visrec::ingest {

void
RefreshPolicy::validate() const {
    if (interval.count() <= 0) {
        throw Error(ErrorCode::kConfig, "refresh interval must be > 0");
    }
    if (max_batch == 0) {
        throw Error(ErrorCode::kConfig, "max batch size must be > 0");
    }
}

std::chrono::milliseconds
parse_duration(std::string_view text) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || value <= 0) {
        throw Error(ErrorCode::kConfig, "bad duration '" + std::string(text) + "'");
    }
    std::string_view unit(ptr, static_cast<std::size_t>(text.data() + text.size() - ptr));
    double ms = 0;
    if (unit.empty() || unit == "s") {
        ms = value * 1000.0;
    } else if (unit == "ms") {
        ms = value;
    } else if (unit == "m") {
        ms = value * 60'000.0;
    } else if (unit == "h") {
        ms = value * 3'600'000.0;
    } else {
        throw Error(ErrorCode::kConfig, "bad duration unit in '" + std::string(text) + "'");
    }
    return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

IndexDelta
compute_delta(const StoreState& state, const index::KnnIndex& previous) {
    IndexDelta delta;
    std::set<std::string> indexed;
    for (const auto& [key, shard] : previous.shards()) {
        for (std::size_t i = 0; i < shard->size(); ++i) {
            const auto& id = shard->ids[i];
            indexed.insert(id);
            auto it = state.find(id);
            if (it == state.end() || it->second.version != shard->versions[i] ||
                it->second.metadata != shard->key) {
                delta.removed.push_back(id);
            }
        }
    }
    std::set<std::string> removed(delta.removed.begin(), delta.removed.end());
    for (const auto& [id, rec] : state) {
        if (!indexed.contains(id) || removed.contains(id)) {
            delta.added.push_back({id, rec.embedding, rec.metadata, rec.version});
        }
    }
    return delta;
}

std::shared_ptr<const index::KnnIndex>
refresh(const StoreState& state, const std::shared_ptr<const index::KnnIndex>& previous) {
    if (!previous) {
        throw Error(ErrorCode::kInvalidArgument, "refresh needs a previous index generation");
    }
    auto delta = compute_delta(state, *previous);
    if (delta.empty()) {
        return previous;
    }
    return std::make_shared<const index::KnnIndex>(index::apply_delta(*previous, delta.added, delta.removed));
}

IngestPipeline::IngestPipeline(FeatureStore& store, const FeatureExtractor& extractor, index::Publisher& publisher,
                               RefreshPolicy policy, DeadLetters* dead_letters)
    : store_(store), extractor_(extractor), publisher_(publisher), policy_(policy), dead_letters_(dead_letters) {
    policy_.validate();
}

IngestPipeline::~IngestPipeline() {
    stop();
}

ApplyOutcome
IngestPipeline::submit(const IngestionEvent& event) {
    // extraction runs outside the store lock; the append commits in order
    if (event.seq <= store_.last_applied()) {
        return ApplyOutcome::kSkipped;
    }
    Embedding embedding;
    std::string failure;
    if (event.op != EventOp::kDelete) {
        try {
            embedding = extractor_.extract(event.image);
            if (!embedding.allFinite()) {
                failure = "extractor produced a non-finite embedding";
            }
        } catch (const Error& e) {
            failure = e.what();
        }
    }
    std::lock_guard lock(store_mu_);
    if (event.seq <= store_.last_applied()) {
        return ApplyOutcome::kSkipped;
    }
    if (event.op == EventOp::kDelete) {
        store_.append({RecordKind::kTombstone, event.seq, event.id, event.seq, {}, {}});
        return ApplyOutcome::kApplied;
    }
    if (!failure.empty()) {
        if (dead_letters_) {
            dead_letters_->add(event, failure);
        }
        store_.append({RecordKind::kSeqMark, event.seq, {}, 0, {}, {}});
        return ApplyOutcome::kQuarantined;
    }
    store_.append({RecordKind::kPut, event.seq, event.id, event.seq, event.metadata, std::move(embedding)});
    return ApplyOutcome::kApplied;
}

std::size_t
IngestPipeline::consume(EventLogReader& reader) {
    auto events = reader.poll(policy_.max_batch);
    for (const auto& e : events) {
        submit(e);
    }
    return events.size();
}

StoreState
IngestPipeline::snapshot_state() const {
    std::lock_guard lock(store_mu_);
    return store_.state();
}

bool
IngestPipeline::refresh_now() {
    std::lock_guard maintenance(refresh_mu_);
    StoreState state = snapshot_state();
    auto previous = publisher_.current();
    auto next = refresh(state, previous);
    refreshes_.fetch_add(1);
    if (next == previous) {
        return false;
    }
    publisher_.publish(std::move(next));
    return true;
}

void
IngestPipeline::record_error(const std::string& message) {
    std::lock_guard lock(error_mu_);
    last_error_ = message;
}

std::string
IngestPipeline::last_error() const {
    std::lock_guard lock(error_mu_);
    return last_error_;
}

void
IngestPipeline::start(EventLogReader* reader, std::chrono::milliseconds poll_interval) {
    {
        std::lock_guard lock(wake_mu_);
        stopping_ = false;
    }
    auto wait = [this](std::chrono::milliseconds d) {
        std::unique_lock lock(wake_mu_);
        return !wake_.wait_for(lock, d, [this] { return stopping_; });
    };
    if (reader) {
        threads_.emplace_back([this, reader, poll_interval, wait] {
            do {
                try {
                    while (consume(*reader) > 0) {
                    }
                } catch (const std::exception& e) {
                    record_error(e.what());
                    return;
                }
            } while (wait(poll_interval));
        });
    }
    threads_.emplace_back([this, wait] {
        while (wait(policy_.interval)) {
            try {
                refresh_now();
            } catch (const std::exception& e) {
                // the previous generation keeps serving
                record_error(e.what());
            }
        }
    });
}

void
IngestPipeline::stop() {
    {
        std::lock_guard lock(wake_mu_);
        stopping_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) {
        if (t.joinable()) {
            t.join();
        }
    }
    threads_.clear();
}

}  // namespace visrec::ingest
