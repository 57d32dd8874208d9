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

#include "visrec/service/service.hpp"

#include <filesystem>
#include <fstream>

#include "visrec/error.hpp"
#include "visrec/image.hpp"
#include "visrec/ingest/pipeline.hpp"

namespace visrec::service {

using nlohmann::json;

json
error_body(const ServiceError& error) {
    return {{"code", error.code()}, {"message", error.what()}};
}

json
to_json(const RecommendationResponse& response) {
    json results = json::array();
    for (const auto& r : response.results) {
        results.push_back({{"id", r.id}, {"distance", r.distance}, {"metadata", r.metadata}});
    }
    return {{"query_id", response.query_id},
            {"generation", response.generation},
            {"served_from", response.served_from},
            {"results", std::move(results)}};
}

RecommendationService::RecommendationService(const index::Publisher& publisher,
                                             std::shared_ptr<const net::Model> model, std::size_t k_default)
    : publisher_(publisher), model_(std::move(model)), k_default_(k_default),
      started_(std::chrono::steady_clock::now()) {
}

RecommendationResponse
RecommendationService::handle_similar(const std::string& item_id, std::optional<std::size_t> k) {
    // the pinned pointer keeps this generation alive for the whole request
    auto generation = publisher_.current();
    try {
        if (!generation) {
            throw ServiceError(503, "NO_INDEX", "no index generation has been published");
        }
        std::size_t want = k.value_or(k_default_);
        if (want > static_cast<std::size_t>(generation->k())) {
            throw ServiceError(400, "K_TOO_LARGE",
                               "k=" + std::to_string(want) + " exceeds index k=" + std::to_string(generation->k()));
        }
        auto loc = generation->find(item_id);
        if (!loc) {
            throw ServiceError(404, "ITEM_NOT_FOUND", "item '" + item_id + "' is not indexed");
        }
        const auto& cached = loc->shard->lists[loc->row];
        RecommendationResponse response;
        response.query_id = item_id;
        response.generation = generation->generation();
        std::size_t n = std::min(want, cached.size());
        response.results.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            // neighbor lists never leave the owner's partition
            response.results.push_back({cached[i].id, cached[i].distance, loc->shard->key});
        }
        entries_copied_.fetch_add(n);
        similar_.fetch_add(1);
        return response;
    } catch (const ServiceError&) {
        errors_.fetch_add(1);
        throw;
    }
}

std::string
RecommendationService::handle_extract(std::string_view image_bytes) {
    try {
        if (!model_) {
            throw ServiceError(503, "NO_MODEL", "no model loaded");
        }
        std::string text;
        try {
            text = net::embedding_to_json_text(model_->embed(decode_ppm(image_bytes)));
        } catch (const Error& e) {
            throw ServiceError(400, std::string(code_name(e.code())), e.what());
        }
        extract_.fetch_add(1);
        return text;
    } catch (const ServiceError&) {
        errors_.fetch_add(1);
        throw;
    }
}

RequestCounters
RecommendationService::counters() const {
    return {similar_.load(), extract_.load(), stats_.load(), health_.load(), errors_.load()};
}

json
RecommendationService::handle_stats() {
    auto generation = publisher_.current();
    auto c = counters();
    json partitions = json::array();
    std::size_t total = 0;
    if (generation) {
        for (const auto& [key, shard] : generation->shards()) {
            partitions.push_back({{"partition", key.to_string()}, {"items", shard->size()}});
            total += shard->size();
        }
    }
    auto uptime = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    json out = {{"generation", generation ? json(generation->generation()) : json(nullptr)},
                {"items", total},
                {"partitions", std::move(partitions)},
                {"uptime_seconds", uptime},
                {"requests",
                 {{"similar", c.similar},
                  {"extract", c.extract},
                  {"stats", c.stats},
                  {"health", c.health},
                  {"errors", c.errors}}}};
    stats_.fetch_add(1);
    return out;
}

json
RecommendationService::handle_health() {
    health_.fetch_add(1);
    auto generation = publisher_.current();
    return {{"status", "ok"},
            {"index", generation != nullptr},
            {"model", model_ != nullptr},
            {"generation", generation ? json(generation->generation()) : json(nullptr)}};
}

void
ServiceConfig::validate() const {
    if (port < 0 || port > 65535) {
        throw Error(ErrorCode::kConfig, "listen port out of range");
    }
    if (index_k <= 0) {
        throw Error(ErrorCode::kConfig, "index_k must be positive");
    }
    if (k_default > static_cast<std::size_t>(index_k)) {
        throw Error(ErrorCode::kConfig, "k_default exceeds index k");
    }
    if (request_timeout.count() <= 0) {
        throw Error(ErrorCode::kConfig, "request_timeout must be positive");
    }
    if (index_snapshot.empty() && !ingest) {
        throw Error(ErrorCode::kConfig, "serve config needs index_snapshot or an ingest section");
    }
    if (ingest && (ingest->events.empty() || ingest->store.empty())) {
        throw Error(ErrorCode::kConfig, "ingest section needs events and store paths");
    }
    if (ingest && model.empty()) {
        throw Error(ErrorCode::kConfig, "ingest needs a model for feature extraction");
    }
}

namespace {

std::string
resolve(const std::string& base, const std::string& p) {
    if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) {
        return p;
    }
    return (std::filesystem::path(base) / p).string();
}

std::chrono::milliseconds
duration_field(const json& j, const char* key, std::chrono::milliseconds fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    const auto& v = j.at(key);
    if (v.is_number()) {
        return std::chrono::milliseconds(static_cast<std::int64_t>(v.get<double>() * 1000.0));
    }
    return ingest::parse_duration(v.get<std::string>());
}

}  // namespace

ServiceConfig
service_config_from_json(const json& j, const std::string& base_dir) {
    ServiceConfig c;
    try {
        if (j.contains("listen")) {
            const auto& l = j.at("listen");
            c.host = l.value("host", c.host);
            c.port = l.value("port", c.port);
        }
        c.k_default = j.value("k_default", c.k_default);
        c.model = resolve(base_dir, j.value("model", std::string()));
        c.index_snapshot = resolve(base_dir, j.value("index_snapshot", std::string()));
        c.index_k = j.value("index_k", c.index_k);
        c.request_timeout = duration_field(j, "request_timeout", c.request_timeout);
        if (j.contains("ingest")) {
            const auto& s = j.at("ingest");
            IngestSection in;
            in.events = resolve(base_dir, s.value("events", std::string()));
            in.store = resolve(base_dir, s.value("store", std::string()));
            in.dead_letter = resolve(base_dir, s.value("dead_letter", std::string()));
            in.refresh_interval = duration_field(s, "refresh_interval", in.refresh_interval);
            in.max_batch = s.value("max_batch", in.max_batch);
            c.ingest = in;
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kConfig, std::string("serve config: ") + e.what());
    }
    c.validate();
    return c;
}

ServiceConfig
load_service_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::kIo, "cannot read " + path);
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kConfig, path + ": " + e.what());
    }
    return service_config_from_json(j, std::filesystem::path(path).parent_path().string());
}

}  // namespace visrec::service
