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

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "visrec/error.hpp"
#include "visrec/eval/metrics.hpp"
#include "visrec/eval/report.hpp"
#include "visrec/index/knn_index.hpp"
#include "visrec/ingest/pipeline.hpp"
#include "visrec/net/dataset.hpp"
#include "visrec/service/http_server.hpp"
#include "visrec/triplets/biss.hpp"

using namespace visrec;
using nlohmann::json;

namespace {

volatile std::sig_atomic_t g_stop = 0;

void
on_signal(int) {
    g_stop = 1;
}

void
wait_for_signal() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
}

json
read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::kIo, "cannot read " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kConfig, path + ": " + e.what());
    }
}

std::vector<std::string>
split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string part;
    while (std::getline(in, part, sep)) {
        if (!part.empty()) {
            out.push_back(part);
        }
    }
    return out;
}

index::PartitionFilter
parse_filters(const std::vector<std::string>& assignments) {
    index::PartitionFilter f;
    for (const auto& a : assignments) {
        f.set(a);
    }
    return f;
}

std::vector<index::IndexedItem>
embed_corpus(const net::Model& model, const std::string& manifest) {
    std::vector<index::IndexedItem> items;
    for (const auto& e : load_manifest(manifest)) {
        items.push_back({e.id, model.embed(read_ppm(e.image)), e.metadata, 0});
    }
    return items;
}

json
neighbors_json(const index::NeighborList& list) {
    json rows = json::array();
    for (const auto& n : list.entries) {
        rows.push_back({{"id", n.id}, {"distance", n.distance}});
    }
    return rows;
}

}  // namespace

int
main(int argc, char** argv) {
    CLI::App app{"visrec: visual similarity training, indexing and serving"};
    app.require_subcommand(1);

    // train
    std::string train_config, train_triplets, train_corpus, train_out;
    std::optional<std::uint64_t> train_seed;
    auto* train_cmd = app.add_subcommand("train", "train an embedding network on triplets");
    train_cmd->add_option("--config", train_config, "network config (net.json)")->required();
    train_cmd->add_option("--triplets", train_triplets, "triplets JSONL")->required();
    train_cmd->add_option("--corpus", train_corpus, "manifest resolving triplet ids to images")->required();
    train_cmd->add_option("--out", train_out, "output model file")->required();
    train_cmd->add_option("--seed", train_seed, "overrides training.seed");

    // embed
    std::string embed_model, embed_image;
    auto* embed_cmd = app.add_subcommand("embed", "print the embedding of one image");
    embed_cmd->add_option("--model", embed_model)->required();
    embed_cmd->add_option("--image", embed_image)->required();

    // gen-triplets
    std::string gen_corpus, gen_biss = "colorhist", gen_out;
    std::size_t gen_count = 0;
    std::uint64_t gen_seed = 1;
    double gen_inclass = 0.3;
    auto* gen_cmd = app.add_subcommand("gen-triplets", "sample candidate triplets from BISS rankings");
    gen_cmd->add_option("--corpus", gen_corpus)->required();
    gen_cmd->add_option("--biss", gen_biss, "comma-separated: colorhist, embed:model.bin");
    gen_cmd->add_option("--count", gen_count)->required();
    gen_cmd->add_option("--seed", gen_seed);
    gen_cmd->add_option("--inclass-fraction", gen_inclass);
    gen_cmd->add_option("--out", gen_out)->required();

    // vet
    std::string vet_in, vet_verdicts, vet_out;
    auto* vet_cmd = app.add_subcommand("vet", "apply human verdicts to candidate triplets");
    vet_cmd->add_option("--in", vet_in)->required();
    vet_cmd->add_option("--vetting", vet_verdicts)->required();
    vet_cmd->add_option("--out", vet_out)->required();

    // index
    auto* index_cmd = app.add_subcommand("index", "build, query and maintain the k-NN index");
    index_cmd->require_subcommand(1);
    std::string ix_model, ix_corpus, ix_store, ix_out, ix_index, ix_image, ix_id, ix_remove;
    std::size_t ix_k = 20;
    float ix_threshold = 0.0F;
    std::vector<std::string> ix_filters;
    auto* ix_build = index_cmd->add_subcommand("build", "exact neighbor lists for a corpus or feature store");
    ix_build->add_option("--model", ix_model);
    ix_build->add_option("--corpus", ix_corpus);
    ix_build->add_option("--store", ix_store, "feature store instead of corpus+model");
    ix_build->add_option("--k", ix_k);
    ix_build->add_option("--out", ix_out)->required();
    auto* ix_query = index_cmd->add_subcommand("query", "live exact k-NN for an image or indexed id");
    ix_query->add_option("--index", ix_index)->required();
    ix_query->add_option("--model", ix_model);
    ix_query->add_option("--image", ix_image);
    ix_query->add_option("--id", ix_id);
    ix_query->add_option("--k", ix_k);
    ix_query->add_option("--filter", ix_filters, "key=value, repeatable");
    auto* ix_delta = index_cmd->add_subcommand("delta", "apply additions and removals to a snapshot");
    ix_delta->add_option("--index", ix_index)->required();
    ix_delta->add_option("--model", ix_model);
    ix_delta->add_option("--add", ix_corpus, "manifest of items to add");
    ix_delta->add_option("--remove", ix_remove, "comma-separated ids to remove");
    ix_delta->add_option("--out", ix_out)->required();
    auto* ix_dedup = index_cmd->add_subcommand("dedup", "same-partition pairs within a distance threshold");
    ix_dedup->add_option("--index", ix_index)->required();
    ix_dedup->add_option("--threshold", ix_threshold)->required();

    // ingest
    std::string in_events, in_store, in_model, in_interval = "30m", in_index_out, in_dead;
    std::size_t in_k = 20;
    bool in_follow = false;
    auto* ingest_cmd = app.add_subcommand("ingest", "apply catalog events to the feature store and refresh");
    ingest_cmd->add_option("--events", in_events)->required();
    ingest_cmd->add_option("--store", in_store)->required();
    ingest_cmd->add_option("--model", in_model)->required();
    ingest_cmd->add_option("--refresh-interval", in_interval);
    ingest_cmd->add_option("--index-out", in_index_out, "write the refreshed snapshot here");
    ingest_cmd->add_option("--k", in_k);
    ingest_cmd->add_option("--dead-letter", in_dead);
    ingest_cmd->add_flag("--follow", in_follow, "keep tailing the log until interrupted");

    // serve
    std::string serve_config;
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
    serve_cmd->add_option("--config", serve_config)->required();

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "triplet accuracy and recall@k reports");
    eval_cmd->require_subcommand(1);
    std::string ev_model, ev_triplets, ev_corpus, ev_truth, ev_out, ev_index, ev_provenance;
    std::size_t ev_k = 20;
    auto* ev_trip = eval_cmd->add_subcommand("triplets", "held-out triplet accuracy");
    ev_trip->add_option("--model", ev_model)->required();
    ev_trip->add_option("--triplets", ev_triplets)->required();
    ev_trip->add_option("--corpus", ev_corpus)->required();
    ev_trip->add_option("--provenance", ev_provenance);
    ev_trip->add_option("--out", ev_out)->required();
    auto* ev_recall = eval_cmd->add_subcommand("recall", "recall@k against ground-truth matches");
    ev_recall->add_option("--model", ev_model);
    ev_recall->add_option("--corpus", ev_corpus, "catalog to index (with --model)");
    ev_recall->add_option("--index", ev_index, "prebuilt snapshot instead of --corpus");
    ev_recall->add_option("--ground-truth", ev_truth)->required();
    ev_recall->add_option("--k", ev_k);
    ev_recall->add_option("--provenance", ev_provenance);
    ev_recall->add_option("--out", ev_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            auto raw = read_json_file(train_config);
            auto config = raw.get<net::NetConfig>();
            auto hyper = raw.value("training", json::object()).get<net::TrainHyper>();
            if (train_seed) {
                hyper.seed = *train_seed;
            }
            auto proj_hyper = raw.value("projection_training", raw.value("training", json::object()))
                                  .get<net::TrainHyper>();
            if (train_seed) {
                proj_hyper.seed = *train_seed + 1;
            }
            auto entries = load_manifest(train_corpus);
            auto images = net::load_images(entries);
            if (!raw.contains("input") || !raw.at("input").contains("mean")) {
                config.input_mean = net::channel_mean(images);
            }
            auto triplets = triplets::load_triplets(train_triplets);
            net::Network<float> net(config);
            auto data = net::make_training_set(net, images, triplets);
            auto model = net::train_model(config, data, hyper, proj_hyper, [](int epoch, double loss) {
                std::cerr << "epoch " << epoch << " loss " << loss << "\n";
            });
            net::save_model(train_out, model);
        } else if (*embed_cmd) {
            auto model = net::load_model(embed_model);
            std::cout << net::embedding_to_json_text(model->embed(read_ppm(embed_image)));
        } else if (*gen_cmd) {
            auto entries = load_manifest(gen_corpus);
            std::vector<Image> images;
            triplets::TripletCorpus corpus;
            for (const auto& e : entries) {
                images.push_back(read_ppm(e.image));
                corpus.ids.push_back(e.id);
                corpus.metadata.push_back(e.metadata);
            }
            std::vector<std::unique_ptr<triplets::Biss>> owned;
            std::vector<const triplets::Biss*> bisses;
            for (const auto& spec : split(gen_biss, ',')) {
                owned.push_back(triplets::make_biss(spec, images));
                bisses.push_back(owned.back().get());
            }
            triplets::GeneratorConfig cfg;
            cfg.count = gen_count;
            cfg.seed = gen_seed;
            cfg.inclass_fraction = gen_inclass;
            auto result = triplets::generate_candidates(corpus, bisses, cfg);
            for (const auto& w : result.warnings) {
                std::cerr << "warning: " << w << "\n";
            }
            triplets::save_triplets(gen_out, result.triplets);
        } else if (*vet_cmd) {
            auto candidates = triplets::load_triplets(vet_in);
            auto records = triplets::load_vetting(vet_verdicts);
            triplets::save_triplets(vet_out, triplets::apply_vetting(std::move(candidates), records));
        } else if (*ix_build) {
            std::vector<index::IndexedItem> items;
            if (!ix_store.empty()) {
                auto store = ingest::FeatureStore::open(ix_store);
                for (const auto& [id, rec] : store.state()) {
                    items.push_back({id, rec.embedding, rec.metadata, rec.version});
                }
            } else {
                if (ix_model.empty() || ix_corpus.empty()) {
                    throw Error(ErrorCode::kInvalidArgument, "index build needs --store or --model and --corpus");
                }
                items = embed_corpus(*net::load_model(ix_model), ix_corpus);
            }
            index::save_index(ix_out, index::build(items, static_cast<int>(ix_k)));
        } else if (*ix_query) {
            auto idx = index::load_index(ix_index);
            auto filter = parse_filters(ix_filters);
            Embedding emb;
            if (!ix_id.empty()) {
                auto loc = idx.find(ix_id);
                if (!loc) {
                    throw Error(ErrorCode::kUnknownId, "id '" + ix_id + "' is not indexed");
                }
                emb = loc->shard->embeddings.row(static_cast<Eigen::Index>(loc->row)).transpose();
            } else if (!ix_image.empty() && !ix_model.empty()) {
                emb = net::load_model(ix_model)->embed(read_ppm(ix_image));
            } else {
                throw Error(ErrorCode::kInvalidArgument, "index query needs --id or --image with --model");
            }
            std::cout << neighbors_json(index::query(idx, emb, ix_k, filter)).dump() << "\n";
        } else if (*ix_delta) {
            auto idx = index::load_index(ix_index);
            std::vector<index::IndexedItem> added;
            if (!ix_corpus.empty()) {
                if (ix_model.empty()) {
                    throw Error(ErrorCode::kInvalidArgument, "--add needs --model");
                }
                added = embed_corpus(*net::load_model(ix_model), ix_corpus);
            }
            auto removed = split(ix_remove, ',');
            index::save_index(ix_out, index::apply_delta(idx, added, removed));
        } else if (*ix_dedup) {
            auto idx = index::load_index(ix_index);
            for (const auto& p : index::near_duplicates(idx, ix_threshold)) {
                std::cout << json{{"first", p.first}, {"second", p.second}, {"distance", p.distance}}.dump()
                          << "\n";
            }
        } else if (*ingest_cmd) {
            auto model = net::load_model(in_model);
            auto store = ingest::FeatureStore::open(in_store);
            ingest::ModelExtractor extractor(model);
            ingest::DeadLetters dead(in_dead);
            ingest::EventLogReader reader(in_events);
            std::shared_ptr<const index::KnnIndex> initial;
            if (!in_index_out.empty() && std::filesystem::exists(in_index_out)) {
                initial = std::make_shared<const index::KnnIndex>(index::load_index(in_index_out));
            } else {
                initial = std::make_shared<const index::KnnIndex>(model->embedding_dim(), static_cast<int>(in_k));
            }
            index::Publisher publisher(initial);
            ingest::RefreshPolicy policy;
            policy.interval = ingest::parse_duration(in_interval);
            ingest::IngestPipeline pipeline(store, extractor, publisher, policy, &dead);
            auto flush = [&] {
                while (pipeline.consume(reader) > 0) {
                }
                if (pipeline.refresh_now() && !in_index_out.empty()) {
                    index::save_index(in_index_out, *publisher.current());
                }
            };
            flush();
            if (in_follow) {
                pipeline.start(&reader);
                wait_for_signal();
                pipeline.stop();
                flush();
            }
            auto current = publisher.current();
            std::cerr << "applied through seq " << store.last_applied() << ", generation "
                      << current->generation() << ", " << current->size() << " items, "
                      << dead.entries().size() << " dead-lettered\n";
        } else if (*serve_cmd) {
            service::ServiceApp server(service::load_service_config(serve_config));
            int port = server.start();
            std::cerr << "listening on port " << port << "\n";
            wait_for_signal();
            server.stop();
        } else if (*ev_trip) {
            auto model = net::load_model(ev_model);
            auto entries = load_manifest(ev_corpus);
            auto set = triplets::load_triplets(ev_triplets);
            auto embeddings = net::embed_all(*model, net::load_images(entries));
            eval::EvalReport report;
            report.triplets = eval::triplet_accuracy(set, embeddings);
            report.provenance = ev_provenance;
            eval::emit_report(report, ev_out);
            std::cout << eval::triplets_csv(report.triplets);
        } else if (*ev_recall) {
            std::shared_ptr<const net::Model> model;
            if (!ev_model.empty()) {
                model = net::load_model(ev_model);
            }
            std::optional<index::KnnIndex> idx;
            if (!ev_index.empty()) {
                idx = index::load_index(ev_index);
            } else if (model && !ev_corpus.empty()) {
                idx = index::build(embed_corpus(*model, ev_corpus), static_cast<int>(ev_k));
            } else {
                throw Error(ErrorCode::kInvalidArgument, "eval recall needs --index or --model with --corpus");
            }
            std::function<Embedding(const std::string&)> embed_image;
            if (model) {
                embed_image = [&](const std::string& path) { return model->embed(read_ppm(path)); };
            }
            auto queries = eval::load_ground_truth(ev_truth, embed_image);
            std::vector<std::size_t> ks;
            for (std::size_t k = 1; k <= ev_k; ++k) {
                ks.push_back(k);
            }
            eval::EvalReport report;
            report.recall = eval::recall_curves(*idx, queries, ks);
            report.provenance = ev_provenance;
            eval::emit_report(report, ev_out);
            std::cout << eval::recall_csv(report.recall);
        }
    } catch (const Error& e) {
        std::cerr << "error [" << code_name(e.code()) << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
