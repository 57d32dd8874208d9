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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "visrec/catalog.hpp"

namespace visrec::ingest {

enum class EventOp { kInsert, kDelete, kUpdate };

std::string_view
op_name(EventOp op);

/// One catalog change. Sequence numbers strictly increase within a log;
/// an update is a delete followed by an insert of the same id.
struct IngestionEvent {
    std::uint64_t seq = 0;
    EventOp op = EventOp::kInsert;
    std::string id;
    std::string image;  // insert/update only
    ItemMetadata metadata;
};

/// {seq, op, id, image, metadata:{category_group, vertical, gender}}
nlohmann::json
event_to_json(const IngestionEvent& e);
IngestionEvent
event_from_json(const nlohmann::json& j);

/// Tails a JSONL event log: every poll returns the complete lines appended
/// since the last one. A trailing partial line is left for the next poll.
class EventLogReader {
public:
    explicit EventLogReader(std::string path);

    /// Up to `max_events` new events. A sequence number that does not
    /// increase is ErrorCode::kOutOfOrder.
    std::vector<IngestionEvent>
    poll(std::size_t max_events = SIZE_MAX);

    std::uint64_t
    last_seq() const {
        return last_seq_;
    }

private:
    std::string path_;
    std::uint64_t offset_ = 0;
    std::uint64_t last_seq_ = 0;
    std::size_t line_ = 0;
    std::string pending_;
};

void
append_event(const std::string& path, const IngestionEvent& e);

}  // namespace visrec::ingest
