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

#include "visrec/catalog.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "visrec/binary_io.hpp"
#include "visrec/error.hpp"

namespace visrec {

using nlohmann::json;

namespace {

std::string
attribute(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::string(kUnknownAttribute);
    }
    auto value = j.at(key).get<std::string>();
    return value.empty() ? std::string(kUnknownAttribute) : value;
}

}  // namespace

void
to_json(json& j, const ItemMetadata& m) {
    j = {{"category_group", m.category_group}, {"vertical", m.vertical}, {"gender", m.gender}};
}

void
from_json(const json& j, ItemMetadata& m) {
    m.category_group = attribute(j, "category_group");
    m.vertical = attribute(j, "vertical");
    m.gender = attribute(j, "gender");
}

std::vector<json>
read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::kIo, "cannot open " + path);
    }
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            rows.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::kFormat, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return rows;
}

void
write_jsonl(const std::string& path, const std::vector<json>& rows) {
    std::string text;
    for (const auto& row : rows) {
        text += row.dump();
        text += '\n';
    }
    bin::write_file_atomic(path, text);
}

std::vector<CatalogEntry>
load_manifest(const std::string& path) {
    auto base = std::filesystem::path(path).parent_path();
    std::vector<CatalogEntry> entries;
    std::set<std::string> seen;
    for (const auto& row : read_jsonl(path)) {
        CatalogEntry e;
        try {
            e.id = row.at("id").get<std::string>();
            e.image = row.at("image").get<std::string>();
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::kFormat, path + ": manifest row needs id and image: " + ex.what());
        }
        if (!e.image.empty() && std::filesystem::path(e.image).is_relative()) {
            e.image = (base / e.image).string();
        }
        e.metadata = row.get<ItemMetadata>();
        if (!seen.insert(e.id).second) {
            throw Error(ErrorCode::kDuplicateId, path + ": duplicate id " + e.id);
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void
save_manifest(const std::string& path, const std::vector<CatalogEntry>& entries) {
    std::vector<json> rows;
    for (const auto& e : entries) {
        json row = e.metadata;
        row["id"] = e.id;
        row["image"] = e.image;
        rows.push_back(std::move(row));
    }
    write_jsonl(path, rows);
}

}  // namespace visrec
