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
#include <random>

#include "synthetic.hpp"
#include "visrec/index/knn_index.hpp"
#include "visrec/net/model.hpp"
#include "visrec/net/params.hpp"
#include "visrec/service/http_server.hpp"
#include "visrec/service/service.hpp"

// after the Eigen-based headers: resolv.h defines macros Eigen also uses
#include <httplib.h>

using namespace visrec;
using namespace visrec::service;

namespace {

std::shared_ptr<const net::Model>
tiny_model() {
    auto config = visrec::testing::tiny_net_config();
    return std::make_shared<const net::Model>(config, net::init_params(config, 3));
}

std::string
ppm_bytes(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return encode_ppm(visrec::testing::toy_image(static_cast<int>(seed % 8), rng, w == h ? w : 16));
}

template <typename F>
std::pair<int, std::string>
service_error(F&& f) {
    try {
        f();
    } catch (const ServiceError& e) {
        return {e.status(), e.code()};
    }
    ADD_FAILURE() << "expected a ServiceError";
    return {0, ""};
}

class ServiceTest : public ::testing::Test {
protected:
    void
    SetUp() override {
        items = visrec::testing::random_items(300, 8, 3, 1);
        publisher.publish(std::make_shared<const index::KnnIndex>(index::build(items, 20)));
    }

    std::vector<index::IndexedItem> items;
    index::Publisher publisher;
    RecommendationService service{publisher, tiny_model(), 10};
};

}  // namespace

TEST_F(ServiceTest, ZeroKGivesEmptyList) {
    auto r = service.handle_similar(items[0].id, 0);
    EXPECT_TRUE(r.results.empty());
    EXPECT_EQ(r.query_id, items[0].id);
}

TEST_F(ServiceTest, ServesCachedListPrefix) {
    auto idx = publisher.current();
    for (std::size_t k : {1U, 7U, 20U}) {
        auto r = service.handle_similar(items[5].id, k);
        auto loc = idx->find(items[5].id);
        const auto& cached = loc->shard->lists[loc->row];
        ASSERT_EQ(r.results.size(), k);
        for (std::size_t i = 0; i < k; ++i) {
            EXPECT_EQ(r.results[i].id, cached[i].id);
            EXPECT_EQ(r.results[i].distance, cached[i].distance);
            EXPECT_EQ(r.results[i].metadata, loc->shard->key);
        }
        EXPECT_EQ(r.generation, idx->generation());
        EXPECT_EQ(r.served_from, "cache");
    }
    EXPECT_EQ(service.handle_similar(items[5].id).results.size(), 10U);
}

TEST_F(ServiceTest, DistancesAscend) {
    for (const auto& it : items) {
        auto r = service.handle_similar(it.id);
        for (std::size_t i = 1; i < r.results.size(); ++i) {
            EXPECT_LE(r.results[i - 1].distance, r.results[i].distance);
        }
    }
}

TEST_F(ServiceTest, ErrorCodes) {
    EXPECT_EQ(service_error([&] { service.handle_similar("missing"); }), (std::pair<int, std::string>{404, "ITEM_NOT_FOUND"}));
    EXPECT_EQ(service_error([&] { service.handle_similar(items[0].id, 21); }),
              (std::pair<int, std::string>{400, "K_TOO_LARGE"}));
    index::Publisher empty;
    RecommendationService cold(empty, nullptr, 10);
    EXPECT_EQ(service_error([&] { cold.handle_similar("a"); }), (std::pair<int, std::string>{503, "NO_INDEX"}));
    EXPECT_EQ(service_error([&] { cold.handle_extract(ppm_bytes(16, 16, 1)); }),
              (std::pair<int, std::string>{503, "NO_MODEL"}));
    auto body = error_body(ServiceError(404, "ITEM_NOT_FOUND", "no such item"));
    EXPECT_EQ(body.at("code"), "ITEM_NOT_FOUND");
    EXPECT_EQ(body.at("message"), "no such item");
}

TEST_F(ServiceTest, SimilarWorkIsProportionalToK) {
    auto before = service.entries_copied();
    service.handle_similar(items[0].id, 4);
    EXPECT_EQ(service.entries_copied() - before, 4U);

    // a catalog ten times larger costs the same per request
    index::Publisher big_pub(std::make_shared<const index::KnnIndex>(
        index::build(visrec::testing::random_items(3000, 8, 3, 2), 20)));
    RecommendationService big(big_pub, nullptr, 10);
    big.handle_similar("i0", 4);
    EXPECT_EQ(big.entries_copied(), 4U);
}

TEST_F(ServiceTest, ExtractMatchesOfflineForward) {
    auto bytes = ppm_bytes(16, 16, 4);
    auto a = service.handle_extract(bytes);
    auto b = service.handle_extract(bytes);
    EXPECT_EQ(a, b);
    auto model = tiny_model();
    EXPECT_EQ(a, net::embedding_to_json_text(model->embed(decode_ppm(bytes))));
}

TEST_F(ServiceTest, ExtractErrors) {
    EXPECT_EQ(service_error([&] { service.handle_extract(ppm_bytes(32, 32, 2)); }),
              (std::pair<int, std::string>{400, "IMG_DIM"}));
    EXPECT_EQ(service_error([&] { service.handle_extract("P6 garbage"); }),
              (std::pair<int, std::string>{400, "IMG_MALFORMED"}));
}

TEST_F(ServiceTest, StatsCounters) {
    auto fresh = service.handle_stats();
    EXPECT_EQ(fresh.at("requests").at("similar"), 0);
    EXPECT_EQ(fresh.at("requests").at("extract"), 0);
    EXPECT_EQ(fresh.at("requests").at("errors"), 0);
    EXPECT_EQ(fresh.at("items"), items.size());
    EXPECT_EQ(fresh.at("generation"), 0);
    for (int i = 0; i < 5; ++i) {
        service.handle_similar(items[static_cast<std::size_t>(i)].id);
    }
    EXPECT_THROW(service.handle_similar("missing"), ServiceError);
    auto after = service.handle_stats();
    // endpoint counters count answered requests; failures land in errors
    EXPECT_EQ(after.at("requests").at("similar"), 5);
    EXPECT_EQ(after.at("requests").at("errors"), 1);
    EXPECT_EQ(after.at("requests").at("stats"), 1);
    std::size_t partition_items = 0;
    for (const auto& p : after.at("partitions")) {
        partition_items += p.at("items").get<std::size_t>();
    }
    EXPECT_EQ(partition_items, items.size());
    EXPECT_EQ(service.handle_health().at("status"), "ok");
}

TEST_F(ServiceTest, GenerationFollowsPublication) {
    auto before = service.handle_similar(items[1].id);
    std::vector<std::string> removed = {items[0].id};
    publisher.publish(std::make_shared<const index::KnnIndex>(index::apply_delta(*publisher.current(), {}, removed)));
    auto after = service.handle_similar(items[1].id);
    EXPECT_EQ(after.generation, before.generation + 1);
    EXPECT_EQ(service.handle_stats().at("generation"), after.generation);
    for (const auto& r : after.results) {
        EXPECT_NE(r.id, items[0].id);
    }
}

TEST_F(ServiceTest, RequestsDoNotMutateTheIndex) {
    auto idx = publisher.current();
    auto bytes = index::serialize_index(*idx);
    for (const auto& it : items) {
        service.handle_similar(it.id, 20);
    }
    service.handle_extract(ppm_bytes(16, 16, 3));
    EXPECT_EQ(publisher.current(), idx);
    EXPECT_EQ(index::serialize_index(*idx), bytes);
}

TEST(ServiceConfigTest, ParsesAndResolvesPaths) {
    auto j = nlohmann::json::parse(R"({
        "listen": {"host": "0.0.0.0", "port": 9000},
        "k_default": 5,
        "model": "model.bin",
        "index_snapshot": "/abs/index.bin",
        "request_timeout": "2s",
        "ingest": {"events": "events.jsonl", "store": "store.bin", "refresh_interval": "1s", "max_batch": 50}
    })");
    auto c = service_config_from_json(j, "/srv/visrec");
    EXPECT_EQ(c.host, "0.0.0.0");
    EXPECT_EQ(c.port, 9000);
    EXPECT_EQ(c.k_default, 5U);
    EXPECT_EQ(c.model, "/srv/visrec/model.bin");
    EXPECT_EQ(c.index_snapshot, "/abs/index.bin");
    EXPECT_EQ(c.request_timeout, std::chrono::seconds(2));
    ASSERT_TRUE(c.ingest);
    EXPECT_EQ(c.ingest->events, "/srv/visrec/events.jsonl");
    EXPECT_EQ(c.ingest->refresh_interval, std::chrono::seconds(1));
    EXPECT_EQ(c.ingest->max_batch, 50U);
}

TEST(ServiceConfigTest, RejectsIncompleteConfigs) {
    EXPECT_THROW(service_config_from_json(nlohmann::json::object()).validate(), Error);
    auto j = nlohmann::json::parse(R"({"index_snapshot": "i.bin", "listen": {"port": 70000}})");
    EXPECT_THROW(service_config_from_json(j).validate(), Error);
    auto no_model = nlohmann::json::parse(R"({"ingest": {"events": "e.jsonl", "store": "s.bin"}})");
    EXPECT_THROW(service_config_from_json(no_model).validate(), Error);
}

TEST(HttpServerTest, EndpointsSpeakJson) {
    auto items = visrec::testing::random_items(50, 8, 1, 5);
    index::Publisher pub(std::make_shared<const index::KnnIndex>(index::build(items, 5)));
    RecommendationService svc(pub, tiny_model(), 3);
    HttpServer server(svc, std::chrono::seconds(5));
    int port = server.start("127.0.0.1", 0);
    ASSERT_GT(port, 0);
    httplib::Client client("127.0.0.1", port);

    auto ok = client.Get("/v1/similar/" + items[0].id + "?k=2");
    ASSERT_TRUE(ok);
    EXPECT_EQ(ok->status, 200);
    auto body = nlohmann::json::parse(ok->body);
    EXPECT_EQ(body.at("results").size(), 2U);
    EXPECT_EQ(body.at("generation"), 0);

    auto missing = client.Get("/v1/similar/nope");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(nlohmann::json::parse(missing->body).at("code"), "ITEM_NOT_FOUND");

    auto bad_k = client.Get("/v1/similar/" + items[0].id + "?k=abc");
    ASSERT_TRUE(bad_k);
    EXPECT_EQ(bad_k->status, 400);

    auto bytes = ppm_bytes(16, 16, 6);
    auto ex = client.Post("/v1/extract", bytes, "application/octet-stream");
    ASSERT_TRUE(ex);
    EXPECT_EQ(ex->status, 200);
    EXPECT_EQ(ex->body, svc.handle_extract(bytes));

    auto wrong = client.Post("/v1/extract", ppm_bytes(32, 32, 6), "application/octet-stream");
    ASSERT_TRUE(wrong);
    EXPECT_EQ(wrong->status, 400);
    EXPECT_EQ(nlohmann::json::parse(wrong->body).at("code"), "IMG_DIM");

    auto health = client.Get("/v1/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    auto stats = client.Get("/v1/stats");
    ASSERT_TRUE(stats);
    EXPECT_GE(nlohmann::json::parse(stats->body).at("requests").at("errors").get<int>(), 3);
    server.stop();
}
