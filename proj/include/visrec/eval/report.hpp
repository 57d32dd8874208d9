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

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "visrec/eval/metrics.hpp"

namespace visrec::eval {

struct EvalReport {
    std::optional<TripletAccuracy> triplets;
    std::vector<RecallCurve> recall;
    std::string provenance;  // free-form note on where the eval data came from
    nlohmann::json ratings;  // externally supplied human labels, passed through

    bool
    operator==(const EvalReport&) const = default;
};

nlohmann::json
report_to_json(const EvalReport& report);
EvalReport
report_from_json(const nlohmann::json& j);

/// class,correct,total,accuracy rows for in-class, out-of-class and total.
std::string
triplets_csv(const std::optional<TripletAccuracy>& accuracy);
std::optional<TripletAccuracy>
parse_triplets_csv(const std::string& text);

/// category,k,queries,hits,recall rows.
std::string
recall_csv(const std::vector<RecallCurve>& curves);
std::vector<RecallCurve>
parse_recall_csv(const std::string& text);

/// Line plot of recall (%) against k, one polyline per curve.
std::string
recall_svg(const std::vector<RecallCurve>& curves);

/// Writes report.json, triplets.csv, recall.csv and recall.svg into `dir`
/// (created if needed). Output bytes depend only on the report.
void
emit_report(const EvalReport& report, const std::string& dir);

}  // namespace visrec::eval
