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

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "visrec/index/knn_index.hpp"
#include "visrec/ingest/feature_store.hpp"
#include "visrec/ingest/pipeline.hpp"
#include "visrec/service/service.hpp"

namespace httplib {
class Server;
}

namespace visrec::service {

/// HTTP/1.1 front end for RecommendationService:
///   GET /v1/similar/{id}?k=   POST /v1/extract   GET /v1/stats   GET /v1/health
/// Errors answer with {code, message}.
class HttpServer {
public:
    HttpServer(RecommendationService& service, std::chrono::milliseconds request_timeout);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer&
    operator=(const HttpServer&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int
    start(const std::string& host, int port);
    void
    stop();

private:
    RecommendationService& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

/// Everything `visrec serve` runs: model, published index, optional
/// ingestion pipeline with periodic refresh, and the HTTP server.
class ServiceApp {
public:
    explicit ServiceApp(ServiceConfig config);
    ~ServiceApp();

    int
    start();
    void
    stop();

    int
    port() const {
        return port_;
    }
    index::Publisher&
    publisher() {
        return publisher_;
    }
    RecommendationService&
    service() {
        return *service_;
    }
    ingest::IngestPipeline*
    pipeline() {
        return pipeline_.get();
    }

private:
    ServiceConfig config_;
    std::shared_ptr<const net::Model> model_;
    index::Publisher publisher_;
    std::unique_ptr<RecommendationService> service_;
    std::unique_ptr<ingest::FeatureStore> store_;
    std::unique_ptr<ingest::ModelExtractor> extractor_;
    std::unique_ptr<ingest::DeadLetters> dead_letters_;
    std::unique_ptr<ingest::EventLogReader> reader_;
    std::unique_ptr<ingest::IngestPipeline> pipeline_;
    std::unique_ptr<HttpServer> http_;
    int port_ = 0;
};

}  // namespace visrec::service
