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

#include "visrec/ingest/events.hpp"

#include <filesystem>

#include "visrec/error.hpp"

namespace visrec::ingest {

using nlohmann::json;

std::string_view
op_name(EventOp op) {
    switch (op) {
        case EventOp::kInsert:
            return "insert";
        case EventOp::kDelete:
            return "delete";
        case EventOp::kUpdate:
            return "update";
    }
    return "?";
}

json
event_to_json(const IngestionEvent& e) {
    json j = {{"seq", e.seq}, {"op", op_name(e.op)}, {"id", e.id}};
    if (e.op != EventOp::kDelete) {
        j["image"] = e.image;
        j["metadata"] = e.metadata;
    }
    return j;
}

IngestionEvent
event_from_json(const json& j) {
    IngestionEvent e;
    try {
        e.seq = j.at("seq").get<std::uint64_t>();
        auto op = j.at("op").get<std::string>();
        if (op == "insert") {
            e.op = EventOp::kInsert;
        } else if (op == "delete") {
            e.op = EventOp::kDelete;
        } else if (op == "update") {
            e.op = EventOp::kUpdate;
        } else {
            throw Error(ErrorCode::kFormat, "unknown event op '" + op + "'");
        }
        e.id = j.at("id").get<std::string>();
        e.image = j.value("image", std::string());
        if (j.contains("metadata")) {
            e.metadata = j.at("metadata").get<ItemMetadata>();
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::kFormat, std::string("event record: ") + ex.what());
    }
    if (e.op != EventOp::kDelete && e.image.empty()) {
        throw Error(ErrorCode::kFormat, "event " + std::to_string(e.seq) + ": insert/update needs an image");
    }
    return e;
}

EventLogReader::EventLogReader(std::string path) : path_(std::move(path)) {
}

std::vector<IngestionEvent>
EventLogReader::poll(std::size_t max_events) {
    std::vector<IngestionEvent> out;
    std::ifstream in(path_, std::ios::binary);
    if (!in) {
        return out;
    }
    in.seekg(static_cast<std::streamoff>(offset_));
    std::string chunk(4096, '\0');
    while (out.size() < max_events) {
        // drain complete lines already buffered before reading more
        auto nl = pending_.find('\n');
        if (nl == std::string::npos) {
            in.read(chunk.data(), static_cast<std::streamsize>(chunk.size()));
            auto got = in.gcount();
            if (got <= 0) {
                break;
            }
            offset_ += static_cast<std::uint64_t>(got);
            pending_.append(chunk.data(), static_cast<std::size_t>(got));
            continue;
        }
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        ++line_;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kFormat, path_ + ":" + std::to_string(line_) + ": " + e.what());
        }
        auto event = event_from_json(j);
        if (event.seq <= last_seq_) {
            throw Error(ErrorCode::kOutOfOrder, path_ + ":" + std::to_string(line_) + ": sequence " +
                                                    std::to_string(event.seq) + " does not follow " +
                                                    std::to_string(last_seq_));
        }
        last_seq_ = event.seq;
        out.push_back(std::move(event));
    }
    return out;
}

void
append_event(const std::string& path, const IngestionEvent& e) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) {
        throw Error(ErrorCode::kIo, "cannot append to " + path);
    }
    out << event_to_json(e).dump() << '\n';
}

}  // namespace visrec::ingest
