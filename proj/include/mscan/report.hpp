// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON and CSV serialization of run artifacts. Keys are emitted in sorted
// order and doubles in shortest round-trip form, so equal reports give equal
// bytes.

#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mscan/error.hpp"
#include "mscan/evaluation.hpp"
#include "mscan/experiments.hpp"
#include "mscan/training.hpp"

namespace mscan {

using Json = nlohmann::json;

template <typename T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

inline Json to_json(const RowMetrics& r) {
    return {{"count", r.count},
            {"positives", r.positives},
            {"auc", optional_json(r.auc)},
            {"interest_auc", optional_json(r.interest_auc)}};
}

inline Json to_json(const MetricsReport& r) {
    Json scenarios = Json::object();
    for (const auto& [s, row] : r.scenarios) scenarios[row_key(s)] = to_json(row);
    Json j{{"model", r.model}, {"scenarios", scenarios}, {"all", r.overall ? to_json(*r.overall) : Json(nullptr)}};
    if (!r.baseline.empty()) {
        j["baseline"] = r.baseline;
        j["rel_impr"] = r.rel_impr;
    }
    return j;
}

inline Json to_json(const TrainReport& r) {
    Json epochs = Json::array();
    for (const auto& e : r.epochs) epochs.push_back({{"l_uis", e.l_uis}, {"l_s", e.l_s}, {"l_final", e.l_final}});
    return {{"epochs", epochs}, {"seed", r.seed}, {"checksum", r.checksum}};
}

inline Json to_json(const GradCheckReport& r) {
    Json flagged = Json::array();
    for (const auto& e : r.flagged()) {
        flagged.push_back({{"parameter", e.parameter},
                           {"index", e.index},
                           {"analytic", e.analytic},
                           {"numeric", e.numeric},
                           {"rel_error", e.rel_error}});
    }
    return {{"epsilon", r.epsilon},
            {"tolerance", r.tolerance},
            {"checked", r.entries.size()},
            {"max_rel_error", r.max_rel_error},
            {"pass", r.pass},
            {"flagged", flagged}};
}

inline Json to_json(const AblationCell& c) {
    Json scenarios = Json::object();
    for (const auto& [s, v] : c.scenarios) scenarios[row_key(s)] = optional_json(v);
    Json j{{"saca", c.saca},
           {"sbe", c.sbe},
           {"seed", c.seed},
           {"auc", optional_json(c.overall)},
           {"scenarios", scenarios},
           {"checksum", c.checksum}};
    if (!c.error.empty()) j["error"] = c.error;
    return j;
}

inline Json ablation_json(const std::vector<AblationCell>& cells) {
    Json j = Json::array();
    for (const auto& c : cells) j.push_back(to_json(c));
    Json means = Json::object();
    for (bool saca : {true, false}) {
        for (bool sbe : {true, false}) {
            const std::string key = std::string("saca=") + (saca ? "on" : "off") + ",sbe=" + (sbe ? "on" : "off");
            means[key] = optional_json(ablation_mean(cells, saca, sbe));
        }
    }
    return {{"cells", j}, {"mean_auc", means}};
}

inline Json to_json(const SweepCurve& c) {
    Json per_seed = Json::array();
    for (const auto& row : c.auc) {
        Json r = Json::array();
        for (const auto& v : row) r.push_back(optional_json(v));
        per_seed.push_back(r);
    }
    Json mean = Json::array();
    for (const auto& v : c.mean_auc) mean.push_back(optional_json(v));
    return {{"param", c.param}, {"grid", c.grid},         {"seeds", c.seeds},   {"auc", per_seed},
            {"mean_auc", mean}, {"checksums", c.checksums}, {"errors", c.errors}};
}

/// Two columns, one row per grid point; failed points have an empty mean.
inline std::string sweep_csv(const SweepCurve& c) {
    std::string out = "value,mean_auc\n";
    char buf[64];
    for (std::size_t k = 0; k < c.grid.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,", c.grid[k]);
        out += buf;
        if (c.mean_auc[k]) {
            std::snprintf(buf, sizeof buf, "%.17g", *c.mean_auc[k]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

inline std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

enum class ReportFormat { Json, Csv };

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("write failed: " + path);
}

template <typename Report>
void emit_report(const Report& report, ReportFormat format, const std::string& path) {
    if (format == ReportFormat::Csv) {
        if constexpr (std::is_same_v<Report, SweepCurve>) {
            write_text(path, sweep_csv(report));
            return;
        } else {
            throw PreconditionError("emit_report: csv is only defined for sweep curves");
        }
    }
    write_text(path, json_text(to_json(report)));
}

}  // namespace mscan
