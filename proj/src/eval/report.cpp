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

#include "visrec/eval/report.hpp"

#include <array>
#include <charconv>
#include <filesystem>
#include <sstream>

#include "visrec/binary_io.hpp"
#include "visrec/error.hpp"

namespace visrec::eval {

using nlohmann::json;

namespace {

std::string
number(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), ptr};
}

std::string
fixed(double v, int precision) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, precision);
    return {buf.data(), ptr};
}

template <typename T>
T
parse_number(std::string_view s) {
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::kFormat, "bad number '" + std::string(s) + "' in report CSV");
    }
    return v;
}

std::vector<std::vector<std::string>>
csv_rows(const std::string& text, std::string_view header) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != header) {
        throw Error(ErrorCode::kFormat, "unexpected CSV header '" + line + "'");
    }
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        rows.push_back(std::move(cells));
    }
    return rows;
}

json
optional_percent(std::optional<double> p) {
    return p ? json(*p) : json(nullptr);
}

constexpr std::string_view kTripletsHeader = "class,correct,total,accuracy";
constexpr std::string_view kRecallHeader = "category,k,queries,hits,recall";

}  // namespace

json
report_to_json(const EvalReport& report) {
    json j;
    if (report.triplets) {
        const auto& t = *report.triplets;
        j["triplets"] = {{"in_class", {{"correct", t.inclass_correct}, {"total", t.inclass_total},
                                       {"accuracy", optional_percent(t.inclass_percent())}}},
                         {"out_of_class", {{"correct", t.outclass_correct}, {"total", t.outclass_total},
                                           {"accuracy", optional_percent(t.outclass_percent())}}},
                         {"total", {{"correct", t.correct()}, {"total", t.total()},
                                    {"accuracy", optional_percent(t.total_percent())}}}};
    } else {
        j["triplets"] = nullptr;
    }
    json recall = json::array();
    for (const auto& c : report.recall) {
        json points = json::array();
        for (std::size_t i = 0; i < c.ks.size(); ++i) {
            points.push_back({{"k", c.ks[i]}, {"hits", c.hits[i]}, {"recall", c.recall_percent(i)}});
        }
        recall.push_back({{"category", c.category}, {"queries", c.queries}, {"points", std::move(points)}});
    }
    j["recall"] = std::move(recall);
    j["provenance"] = report.provenance;
    j["ratings"] = report.ratings;
    return j;
}

EvalReport
report_from_json(const json& j) {
    EvalReport r;
    try {
        if (!j.at("triplets").is_null()) {
            const auto& t = j.at("triplets");
            TripletAccuracy acc;
            acc.inclass_correct = t.at("in_class").at("correct").get<std::uint64_t>();
            acc.inclass_total = t.at("in_class").at("total").get<std::uint64_t>();
            acc.outclass_correct = t.at("out_of_class").at("correct").get<std::uint64_t>();
            acc.outclass_total = t.at("out_of_class").at("total").get<std::uint64_t>();
            r.triplets = acc;
        }
        for (const auto& c : j.at("recall")) {
            RecallCurve curve;
            curve.category = c.at("category").get<std::string>();
            curve.queries = c.at("queries").get<std::uint64_t>();
            for (const auto& p : c.at("points")) {
                curve.ks.push_back(p.at("k").get<std::size_t>());
                curve.hits.push_back(p.at("hits").get<std::uint64_t>());
            }
            r.recall.push_back(std::move(curve));
        }
        r.provenance = j.value("provenance", std::string());
        r.ratings = j.value("ratings", json());
    } catch (const json::exception& e) {
        throw Error(ErrorCode::kFormat, std::string("report: ") + e.what());
    }
    return r;
}

std::string
triplets_csv(const std::optional<TripletAccuracy>& accuracy) {
    std::string out(kTripletsHeader);
    out += '\n';
    if (!accuracy) {
        return out;
    }
    auto row = [&](std::string_view name, std::uint64_t correct, std::uint64_t total, std::optional<double> pct) {
        out += std::string(name) + "," + std::to_string(correct) + "," + std::to_string(total) + "," +
               (pct ? number(*pct) : std::string()) + "\n";
    };
    row("in-class", accuracy->inclass_correct, accuracy->inclass_total, accuracy->inclass_percent());
    row("out-of-class", accuracy->outclass_correct, accuracy->outclass_total, accuracy->outclass_percent());
    row("total", accuracy->correct(), accuracy->total(), accuracy->total_percent());
    return out;
}

std::optional<TripletAccuracy>
parse_triplets_csv(const std::string& text) {
    auto rows = csv_rows(text, kTripletsHeader);
    if (rows.empty()) {
        return std::nullopt;
    }
    TripletAccuracy acc;
    for (const auto& r : rows) {
        if (r.size() != 4) {
            throw Error(ErrorCode::kFormat, "triplets CSV row needs 4 cells");
        }
        if (r[0] == "in-class") {
            acc.inclass_correct = parse_number<std::uint64_t>(r[1]);
            acc.inclass_total = parse_number<std::uint64_t>(r[2]);
        } else if (r[0] == "out-of-class") {
            acc.outclass_correct = parse_number<std::uint64_t>(r[1]);
            acc.outclass_total = parse_number<std::uint64_t>(r[2]);
        }
    }
    return acc;
}

std::string
recall_csv(const std::vector<RecallCurve>& curves) {
    std::string out(kRecallHeader);
    out += '\n';
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < c.ks.size(); ++i) {
            out += c.category + "," + std::to_string(c.ks[i]) + "," + std::to_string(c.queries) + "," +
                   std::to_string(c.hits[i]) + "," + number(c.recall_percent(i)) + "\n";
        }
    }
    return out;
}

std::vector<RecallCurve>
parse_recall_csv(const std::string& text) {
    std::vector<RecallCurve> curves;
    for (const auto& r : csv_rows(text, kRecallHeader)) {
        if (r.size() != 5) {
            throw Error(ErrorCode::kFormat, "recall CSV row needs 5 cells");
        }
        if (curves.empty() || curves.back().category != r[0]) {
            curves.push_back({r[0], {}, {}, parse_number<std::uint64_t>(r[2])});
        }
        curves.back().ks.push_back(parse_number<std::size_t>(r[1]));
        curves.back().hits.push_back(parse_number<std::uint64_t>(r[3]));
    }
    return curves;
}

std::string
recall_svg(const std::vector<RecallCurve>& curves) {
    constexpr double kW = 480, kH = 320, kLeft = 50, kBottom = 40, kTop = 20, kRight = 120;
    static const std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c",
                                                       "#ff7f0e", "#9467bd", "#8c564b"};
    std::size_t k_max = 1;
    for (const auto& c : curves) {
        for (auto k : c.ks) {
            k_max = std::max(k_max, k);
        }
    }
    double pw = kW - kLeft - kRight;
    double ph = kH - kTop - kBottom;
    auto x_of = [&](double k) { return kLeft + pw * k / static_cast<double>(k_max); };
    auto y_of = [&](double pct) { return kTop + ph * (1.0 - pct / 100.0); };

    std::string s = R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" + fixed(kW, 0) + R"(" height=")" +
                    fixed(kH, 0) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<line x1=\"" + fixed(kLeft, 1) + "\" y1=\"" + fixed(y_of(0), 1) + "\" x2=\"" + fixed(kLeft + pw, 1) +
         "\" y2=\"" + fixed(y_of(0), 1) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + fixed(kLeft, 1) + "\" y1=\"" + fixed(y_of(0), 1) + "\" x2=\"" + fixed(kLeft, 1) +
         "\" y2=\"" + fixed(y_of(100), 1) + "\" stroke=\"black\"/>\n";
    for (int pct = 0; pct <= 100; pct += 25) {
        s += "<text x=\"" + fixed(kLeft - 6, 1) + "\" y=\"" + fixed(y_of(pct) + 4, 1) +
             "\" font-size=\"10\" text-anchor=\"end\">" + std::to_string(pct) + "</text>\n";
    }
    s += "<text x=\"" + fixed(kLeft + pw / 2, 1) + "\" y=\"" + fixed(kH - 8, 1) +
         "\" font-size=\"12\" text-anchor=\"middle\">k</text>\n";
    s += "<text x=\"12\" y=\"" + fixed(kTop + ph / 2, 1) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 12 " + fixed(kTop + ph / 2, 1) +
         ")\">recall (%)</text>\n";
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const auto& c = curves[ci];
        const char* color = kColors[ci % kColors.size()];
        std::string points;
        for (std::size_t i = 0; i < c.ks.size(); ++i) {
            points += (i ? " " : "") + fixed(x_of(static_cast<double>(c.ks[i])), 2) + "," +
                      fixed(y_of(c.recall_percent(i)), 2);
        }
        s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" +
             points + "\"/>\n";
        s += "<text x=\"" + fixed(kLeft + pw + 8, 1) + "\" y=\"" + fixed(kTop + 14.0 * (ci + 1), 1) +
             "\" font-size=\"11\" fill=\"" + color + "\">" + c.category + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

void
emit_report(const EvalReport& report, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorCode::kIo, "cannot create report directory " + dir + ": " + ec.message());
    }
    auto path = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
    bin::write_file_atomic(path("report.json"), report_to_json(report).dump(2) + "\n");
    bin::write_file_atomic(path("triplets.csv"), triplets_csv(report.triplets));
    bin::write_file_atomic(path("recall.csv"), recall_csv(report.recall));
    bin::write_file_atomic(path("recall.svg"), recall_svg(report.recall));
}

}  // namespace visrec::eval
