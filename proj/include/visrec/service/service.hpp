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
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "visrec/index/knn_index.hpp"
#include "visrec/net/model.hpp"

namespace visrec::service {

/// Request-level failure carrying an HTTP status and a stable code.
class ServiceError : public std::runtime_error {
public:
    ServiceError(int status, std::string code, const std::string& message)
        : std::runtime_error(message), status_(status), code_(std::move(code)) {
    }

    int
    status() const {
        return status_;
    }
    const std::string&
    code() const {
        return code_;
    }

private:
    int status_;
    std::string code_;
};

nlohmann::json
error_body(const ServiceError& error);

struct RecommendedItem {
    std::string id;
    float distance = 0.0F;
    ItemMetadata metadata;
};

struct RecommendationResponse {
    std::string query_id;
    std::vector<RecommendedItem> results;  // ascending distance
    std::uint64_t generation = 0;
    std::string served_from = "cache";
};

nlohmann::json
to_json(const RecommendationResponse& response);

struct RequestCounters {
    std::uint64_t similar = 0;
    std::uint64_t extract = 0;
    std::uint64_t stats = 0;
    std::uint64_t health = 0;
    std::uint64_t errors = 0;
};

/// Transport-independent request handlers. Similar-items requests read the
/// precomputed neighbor lists of one pinned generation; nothing here writes
/// to the index or the store.
class RecommendationService {
public:
    RecommendationService(const index::Publisher& publisher, std::shared_ptr<const net::Model> model,
                          std::size_t k_default);

    /// `k` defaults to k_default. Throws ServiceError: NO_INDEX (503),
    /// ITEM_NOT_FOUND (404), K_TOO_LARGE (400).
    RecommendationResponse
    handle_similar(const std::string& item_id, std::optional<std::size_t> k = std::nullopt);

    /// PPM bytes to the canonical embedding text. Throws ServiceError:
    /// IMG_MALFORMED / IMG_DIM (400), NO_MODEL (503).
    std::string
    handle_extract(std::string_view image_bytes);

    nlohmann::json
    handle_stats();
    nlohmann::json
    handle_health();

    /// Counts a request rejected before reaching a handler (bad k etc).
    void
    count_error() {
        errors_.fetch_add(1);
    }

    RequestCounters
    counters() const;
    /// Neighbor entries copied into responses so far.
    std::uint64_t
    entries_copied() const {
        return entries_copied_.load();
    }
    std::size_t
    k_default() const {
        return k_default_;
    }

private:
    const index::Publisher& publisher_;
    std::shared_ptr<const net::Model> model_;
    std::size_t k_default_;
    std::chrono::steady_clock::time_point started_;

    std::atomic<std::uint64_t> similar_{0};
    std::atomic<std::uint64_t> extract_{0};
    std::atomic<std::uint64_t> stats_{0};
    std::atomic<std::uint64_t> health_{0};
    std::atomic<std::uint64_t> errors_{0};
    std::atomic<std::uint64_t> entries_copied_{0};
};

struct IngestSection {
    std::string events;
    std::string store;
    std::string dead_letter;
    std::chrono::milliseconds refresh_interval = std::chrono::minutes(30);
    std::size_t max_batch = 1000;
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::size_t k_default = 10;
    std::string model;
    std::string index_snapshot;  // optional when ingest is configured
    int index_k = 20;            // k for an index started empty
    std::chrono::milliseconds request_timeout = std::chrono::seconds(5);
    std::optional<IngestSection> ingest;

    void
    validate() const;
};

/// Reads serve.json. Relative paths resolve against the file's directory.
ServiceConfig
load_service_config(const std::string& path);
ServiceConfig
service_config_from_json(const nlohmann::json& j, const std::string& base_dir = {});

}  // namespace visrec::service
