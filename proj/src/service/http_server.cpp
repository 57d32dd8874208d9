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

#include "visrec/service/http_server.hpp"

#include <charconv>
#include <filesystem>

#include <httplib.h>

#include "visrec/error.hpp"

namespace visrec::service {

namespace {

constexpr const char* kJson = "application/json";

void
reply_error(httplib::Response& res, const ServiceError& e) {
    res.status = e.status();
    res.set_content(error_body(e).dump(), kJson);
}

std::optional<std::size_t>
parse_k(const httplib::Request& req) {
    if (!req.has_param("k")) {
        return std::nullopt;
    }
    auto text = req.get_param_value("k");
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), k);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ServiceError(400, "BAD_K", "k must be a non-negative integer, got '" + text + "'");
    }
    return k;
}

}  // namespace

HttpServer::HttpServer(RecommendationService& service, std::chrono::milliseconds request_timeout)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
    server_->set_read_timeout(request_timeout);
    server_->set_write_timeout(request_timeout);

    server_->Get(R"(/v1/similar/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            std::optional<std::size_t> k;
            try {
                k = parse_k(req);
            } catch (const ServiceError&) {
                service_.count_error();
                throw;
            }
            res.set_content(to_json(service_.handle_similar(req.matches[1].str(), k)).dump(), kJson);
        } catch (const ServiceError& e) {
            reply_error(res, e);
        }
    });
    server_->Post("/v1/extract", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            res.set_content(service_.handle_extract(req.body), kJson);
        } catch (const ServiceError& e) {
            reply_error(res, e);
        }
    });
    server_->Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(service_.handle_stats().dump(), kJson);
    });
    server_->Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(service_.handle_health().dump(), kJson);
    });
    server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            ServiceError e(res.status, res.status == 404 ? "NOT_FOUND" : "HTTP_ERROR", "no such endpoint");
            res.set_content(error_body(e).dump(), kJson);
        }
    });
}

HttpServer::~HttpServer() {
    stop();
}

int
HttpServer::start(const std::string& host, int port) {
    int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
        throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
    }
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return bound;
}

void
HttpServer::stop() {
    if (thread_.joinable()) {
        server_->stop();
        thread_.join();
    }
}

ServiceApp::ServiceApp(ServiceConfig config) : config_(std::move(config)) {
    config_.validate();
    if (!config_.model.empty()) {
        model_ = net::load_model(config_.model);
    }
    if (!config_.index_snapshot.empty() && std::filesystem::exists(config_.index_snapshot)) {
        publisher_.publish(std::make_shared<const index::KnnIndex>(index::load_index(config_.index_snapshot)));
    } else if (config_.ingest) {
        publisher_.publish(std::make_shared<const index::KnnIndex>(model_->embedding_dim(), config_.index_k));
    } else {
        throw Error(ErrorCode::kIo, "index snapshot " + config_.index_snapshot + " not found");
    }
    if (config_.k_default > static_cast<std::size_t>(publisher_.current()->k())) {
        throw Error(ErrorCode::kConfig, "k_default exceeds the snapshot's k");
    }
    service_ = std::make_unique<RecommendationService>(publisher_, model_, config_.k_default);
    if (config_.ingest) {
        const auto& in = *config_.ingest;
        store_ = std::make_unique<ingest::FeatureStore>(ingest::FeatureStore::open(in.store));
        extractor_ = std::make_unique<ingest::ModelExtractor>(model_);
        dead_letters_ = std::make_unique<ingest::DeadLetters>(in.dead_letter);
        reader_ = std::make_unique<ingest::EventLogReader>(in.events);
        ingest::RefreshPolicy policy{in.refresh_interval, in.max_batch};
        pipeline_ = std::make_unique<ingest::IngestPipeline>(*store_, *extractor_, publisher_, policy,
                                                             dead_letters_.get());
    }
}

ServiceApp::~ServiceApp() {
    stop();
}

int
ServiceApp::start() {
    if (pipeline_) {
        // catch up with the existing log before the first request is served
        while (pipeline_->consume(*reader_) > 0) {
        }
        pipeline_->refresh_now();
        pipeline_->start(reader_.get());
    }
    http_ = std::make_unique<HttpServer>(*service_, config_.request_timeout);
    port_ = http_->start(config_.host, config_.port);
    return port_;
}

void
ServiceApp::stop() {
    if (http_) {
        http_->stop();
    }
    if (pipeline_) {
        pipeline_->stop();
    }
}

}  // namespace visrec::service
