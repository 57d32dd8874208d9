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

#include <compare>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace visrec {

inline constexpr std::string_view kUnknownAttribute = "unknown";

/// Catalog attributes used for search-space pruning. Missing attributes
/// take the sentinel value "unknown".
struct ItemMetadata {
    std::string category_group{kUnknownAttribute};
    std::string vertical{kUnknownAttribute};
    std::string gender{kUnknownAttribute};

    auto operator<=>(const ItemMetadata&) const = default;
    bool
    operator==(const ItemMetadata&) const = default;

    std::string
    to_string() const {
        return category_group + "/" + vertical + "/" + gender;
    }
};

void
to_json(nlohmann::json& j, const ItemMetadata& m);
void
from_json(const nlohmann::json& j, ItemMetadata& m);

/// One line of a corpus manifest.
struct CatalogEntry {
    std::string id;
    std::string image;  // resolved path to a PPM file
    ItemMetadata metadata;
};

/// JSONL manifest {id, image, category_group, vertical, gender}. Relative
/// image paths are resolved against the manifest's directory.
std::vector<CatalogEntry>
load_manifest(const std::string& path);
void
save_manifest(const std::string& path, const std::vector<CatalogEntry>& entries);

/// Reads non-empty lines of a JSONL file, reporting the line number on
/// parse failure.
std::vector<nlohmann::json>
read_jsonl(const std::string& path);
void
write_jsonl(const std::string& path, const std::vector<nlohmann::json>& rows);

}  // namespace visrec
