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

#include "visrec/ingest/feature_store.hpp"

#include <filesystem>

#include <zlib.h>

#include "visrec/binary_io.hpp"
#include "visrec/error.hpp"
#include "visrec/image.hpp"
#include "visrec/net/model.hpp"

namespace visrec::ingest {

namespace {

std::uint32_t
crc_of(std::string_view bytes) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

FeatureRecord
decode_payload(std::string_view payload) {
    bin::Reader r(payload);
    FeatureRecord rec;
    auto kind = r.u8();
    if (kind < 1 || kind > 3) {
        throw Error(ErrorCode::kFormat, "unknown record kind " + std::to_string(kind));
    }
    rec.kind = static_cast<RecordKind>(kind);
    rec.seq = r.u64();
    rec.version = r.u64();
    rec.id = r.str();
    rec.metadata.category_group = r.str();
    rec.metadata.vertical = r.str();
    rec.metadata.gender = r.str();
    auto dim = r.u32();
    if (dim > r.remaining() / 4) {
        throw Error(ErrorCode::kFormat, "record embedding exceeds payload");
    }
    rec.embedding.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
        rec.embedding[i] = r.f32();
    }
    if (!r.done()) {
        throw Error(ErrorCode::kFormat, "trailing bytes in record payload");
    }
    return rec;
}

}  // namespace

std::string
encode_record(const FeatureRecord& rec) {
    std::string payload;
    bin::put_u8(payload, static_cast<std::uint8_t>(rec.kind));
    bin::put_u64(payload, rec.seq);
    bin::put_u64(payload, rec.version);
    bin::put_str(payload, rec.id);
    bin::put_str(payload, rec.metadata.category_group);
    bin::put_str(payload, rec.metadata.vertical);
    bin::put_str(payload, rec.metadata.gender);
    bin::put_u32(payload, static_cast<std::uint32_t>(rec.embedding.size()));
    for (Eigen::Index i = 0; i < rec.embedding.size(); ++i) {
        bin::put_f32(payload, rec.embedding[i]);
    }
    std::string frame;
    bin::put_u32(frame, static_cast<std::uint32_t>(payload.size()));
    bin::put_u32(frame, crc_of(payload));
    return frame + payload;
}

FeatureStore::FeatureStore() : log_(kStoreMagic) {
}

FeatureStore::FeatureStore(FeatureStore&&) noexcept = default;
FeatureStore&
FeatureStore::operator=(FeatureStore&&) noexcept = default;
FeatureStore::~FeatureStore() = default;

FeatureStore
FeatureStore::replay(std::string_view bytes) {
    FeatureStore store;
    if (bytes.empty()) {
        return store;
    }
    if (bytes.size() < kStoreMagic.size() || bytes.substr(0, kStoreMagic.size()) != kStoreMagic) {
        throw Error(ErrorCode::kFormat, "not a feature store log (bad magic)");
    }
    std::size_t pos = kStoreMagic.size();
    while (bytes.size() - pos >= 8) {
        bin::Reader header(bytes.substr(pos, 8));
        auto len = header.u32();
        auto crc = header.u32();
        if (bytes.size() - pos - 8 < len) {
            break;  // torn tail
        }
        auto payload = bytes.substr(pos + 8, len);
        if (crc_of(payload) != crc) {
            break;
        }
        FeatureRecord rec;
        try {
            rec = decode_payload(payload);
        } catch (const Error&) {
            break;
        }
        store.log_.append(bytes.substr(pos, 8 + len));
        store.apply_record(rec);
        pos += 8 + len;
    }
    return store;
}

FeatureStore
FeatureStore::open(const std::string& path) {
    FeatureStore store;
    if (std::filesystem::exists(path)) {
        auto bytes = bin::read_file(path);
        store = replay(bytes);
        if (bytes.size() < store.log_.size()) {
            bin::write_file_atomic(path, store.log_);
        } else if (bytes.size() > store.log_.size()) {
            std::filesystem::resize_file(path, store.log_.size());
        }
    } else {
        bin::write_file_atomic(path, store.log_);
    }
    store.path_ = path;
    store.file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::app);
    if (!*store.file_) {
        throw Error(ErrorCode::kIo, "cannot open feature store " + path + " for append");
    }
    return store;
}

void
FeatureStore::apply_record(const FeatureRecord& rec) {
    switch (rec.kind) {
        case RecordKind::kPut:
            state_[rec.id] = rec;
            tombstones_.erase(rec.id);
            break;
        case RecordKind::kTombstone:
            state_.erase(rec.id);
            tombstones_[rec.id] = rec.seq;
            break;
        case RecordKind::kSeqMark:
            break;
    }
    last_applied_ = std::max(last_applied_, rec.seq);
    ++records_;
}

void
FeatureStore::append(const FeatureRecord& rec) {
    auto frame = encode_record(rec);
    if (file_) {
        file_->write(frame.data(), static_cast<std::streamsize>(frame.size()));
        file_->flush();
        if (!*file_) {
            throw Error(ErrorCode::kIo, "append to feature store " + path_ + " failed");
        }
    }
    log_ += frame;
    apply_record(rec);
}

void
FeatureStore::compact(std::optional<std::uint64_t> watermark) {
    std::uint64_t mark = watermark.value_or(last_applied_);
    FeatureStore next;
    for (const auto& [id, rec] : state_) {
        next.log_ += encode_record(rec);
        next.apply_record(rec);
    }
    for (const auto& [id, seq] : tombstones_) {
        if (seq > mark) {
            FeatureRecord t{RecordKind::kTombstone, seq, id, seq, {}, {}};
            next.log_ += encode_record(t);
            next.apply_record(t);
        }
    }
    // keep the applied sequence durable even when nothing else survives
    FeatureRecord seq_mark{RecordKind::kSeqMark, last_applied_, {}, 0, {}, {}};
    next.log_ += encode_record(seq_mark);
    next.apply_record(seq_mark);
    next.watermark_ = std::max(watermark_, mark);
    if (!path_.empty()) {
        file_.reset();
        bin::write_file_atomic(path_, next.log_);
        next.path_ = path_;
        next.file_ = std::make_unique<std::ofstream>(path_, std::ios::binary | std::ios::app);
    }
    *this = std::move(next);
}

std::string
FeatureStore::state_bytes() const {
    std::string out;
    bin::put_u64(out, last_applied_);
    bin::put_u64(out, state_.size());
    for (const auto& [id, rec] : state_) {
        bin::put_str(out, id);
        bin::put_u64(out, rec.version);
        bin::put_str(out, rec.metadata.category_group);
        bin::put_str(out, rec.metadata.vertical);
        bin::put_str(out, rec.metadata.gender);
        bin::put_u32(out, static_cast<std::uint32_t>(rec.embedding.size()));
        for (Eigen::Index i = 0; i < rec.embedding.size(); ++i) {
            bin::put_f32(out, rec.embedding[i]);
        }
    }
    return out;
}

ModelExtractor::ModelExtractor(std::shared_ptr<const net::Model> model) : model_(std::move(model)) {
}

Embedding
ModelExtractor::extract(const std::string& image_path) const {
    return model_->embed(read_ppm(image_path));
}

void
DeadLetters::add(const IngestionEvent& event, const std::string& reason) {
    auto j = event_to_json(event);
    j["error"] = reason;
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        out << j.dump() << '\n';
    }
    entries_.push_back(std::move(j));
}

ApplyOutcome
apply_event(FeatureStore& store, const IngestionEvent& event, const FeatureExtractor& extractor,
            DeadLetters* dead_letters) {
    if (event.seq <= store.last_applied()) {
        return ApplyOutcome::kSkipped;
    }
    if (event.op == EventOp::kDelete) {
        store.append({RecordKind::kTombstone, event.seq, event.id, event.seq, {}, {}});
        return ApplyOutcome::kApplied;
    }
    Embedding embedding;
    try {
        embedding = extractor.extract(event.image);
        if (!embedding.allFinite()) {
            throw Error(ErrorCode::kNumeric, "extractor produced a non-finite embedding");
        }
    } catch (const Error& e) {
        if (dead_letters) {
            dead_letters->add(event, e.what());
        }
        store.append({RecordKind::kSeqMark, event.seq, {}, 0, {}, {}});
        return ApplyOutcome::kQuarantined;
    }
    store.append({RecordKind::kPut, event.seq, event.id, event.seq, event.metadata, std::move(embedding)});
    return ApplyOutcome::kApplied;
}

}  // namespace visrec::ingest
