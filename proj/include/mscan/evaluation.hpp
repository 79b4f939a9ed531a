// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-scenario and pooled ("all") AUC reports.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mscan/data.hpp"
#include "mscan/error.hpp"
#include "mscan/metrics.hpp"
#include "mscan/model.hpp"

namespace mscan {

struct RowMetrics {
    std::size_t count = 0;
    std::size_t positives = 0;
    std::optional<double> auc;           // click labels; empty when undefined
    std::optional<double> interest_auc;  // ground-truth labels, synthetic data only
};

struct MetricsReport {
    std::string model;
    std::map<std::size_t, RowMetrics> scenarios;
    std::optional<RowMetrics> overall;  // absent for single-scenario models
    std::string baseline;               // name the rel_impr values refer to
    std::map<std::string, double> rel_impr;  // row key ("0", "1", ..., "all") -> percent
};

inline std::optional<double> try_auc(std::span<const double> scores, std::span<const int> labels) {
    try {
        return auc<int>(scores, labels);
    } catch (const UndefinedMetricError&) {
        return std::nullopt;
    }
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw PreconditionError("median: empty input");
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// Oracle labels: ground-truth interest above its per-scenario median.
/// Empty when any example lacks ground truth.
inline std::optional<std::vector<int>> interest_labels(std::span<const Example> examples) {
    std::map<std::size_t, std::vector<double>> by_scenario;
    for (const auto& e : examples) {
        if (!e.ground_truth_interest) return std::nullopt;
        by_scenario[e.scenario_id].push_back(*e.ground_truth_interest);
    }
    std::map<std::size_t, double> medians;
    for (auto& [s, values] : by_scenario) medians[s] = median(values);
    std::vector<int> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(*e.ground_truth_interest > medians[e.scenario_id] ? 1 : 0);
    return out;
}

inline RowMetrics row_metrics(std::span<const double> scores, std::span<const int> labels,
                              const std::optional<std::vector<int>>& oracle, std::span<const std::size_t> rows) {
    RowMetrics m;
    std::vector<double> s;
    std::vector<int> y, yi;
    for (std::size_t r : rows) {
        s.push_back(scores[r]);
        y.push_back(labels[r]);
        if (oracle) yi.push_back((*oracle)[r]);
    }
    m.count = rows.size();
    m.positives = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    m.auc = try_auc(s, y);
    if (oracle) m.interest_auc = try_auc(s, yi);
    return m;
}

/// Builds a report from precomputed scores. Undefined rows stay in the
/// report with empty AUCs.
inline MetricsReport metrics_from_scores(std::span<const Example> examples, std::span<const double> scores,
                                         bool group_by_scenario, bool include_overall) {
    if (examples.size() != scores.size()) throw PreconditionError("metrics: one score per example expected");
    std::vector<int> labels;
    labels.reserve(examples.size());
    for (const auto& e : examples) labels.push_back(e.label);
    const auto oracle = interest_labels(examples);

    MetricsReport report;
    if (group_by_scenario) {
        std::map<std::size_t, std::vector<std::size_t>> rows;
        for (std::size_t k = 0; k < examples.size(); ++k) rows[examples[k].scenario_id].push_back(k);
        for (const auto& [s, idx] : rows) report.scenarios[s] = row_metrics(scores, labels, oracle, idx);
    }
    if (include_overall) {
        std::vector<std::size_t> all(examples.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        report.overall = row_metrics(scores, labels, oracle, all);
    }
    return report;
}

/// Scores the test set with the debiased inference score and reports
/// per-scenario and pooled AUCs.
inline MetricsReport evaluate(const MScanModel& model, const InferenceConfig& cfg, std::span<const Example> test,
                              bool group_by_scenario = true) {
    if (test.empty()) throw PreconditionError("evaluate: empty test set");
    for (const auto& e : test) {
        if (e.user_id >= model.vocab.users || e.item_id >= model.vocab.items ||
            e.scenario_id >= model.vocab.scenarios) {
            throw IndexError("evaluate: test example outside the model vocabulary");
        }
    }
    const Predictions p = predict(model, test, cfg);
    MetricsReport r = metrics_from_scores(test, p.y_db, group_by_scenario, true);
    r.model = model.config.co_attention ? (model.config.bias_branch ? "mscan" : "mscan-no-sbe")
                                        : (model.config.bias_branch ? "mscan-no-saca" : "mscan-no-saca-no-sbe");
    return r;
}

inline std::string row_key(std::size_t scenario) { return std::to_string(scenario); }

/// Fills report.rel_impr against `base` for every row both define.
inline void attach_rel_impr(MetricsReport& report, const MetricsReport& base, const std::string& base_name) {
    report.baseline = base_name;
    report.rel_impr.clear();
    for (const auto& [s, row] : report.scenarios) {
        auto it = base.scenarios.find(s);
        if (it != base.scenarios.end() && row.auc && it->second.auc && *it->second.auc > 0.0) {
            report.rel_impr[row_key(s)] = rel_impr(*row.auc, *it->second.auc);
        }
    }
    if (report.overall && base.overall && report.overall->auc && base.overall->auc && *base.overall->auc > 0.0) {
        report.rel_impr["all"] = rel_impr(*report.overall->auc, *base.overall->auc);
    }
}

enum class HeadlineMetric { Auto, Click, Interest };

/// The single number ablations and sweeps compare: pooled interest AUC when
/// ground truth exists (Auto/Interest), pooled click AUC otherwise.
inline std::optional<double> headline_auc(const MetricsReport& r, HeadlineMetric metric) {
    if (!r.overall) return std::nullopt;
    switch (metric) {
        case HeadlineMetric::Click: return r.overall->auc;
        case HeadlineMetric::Interest: return r.overall->interest_auc;
        case HeadlineMetric::Auto: return r.overall->interest_auc ? r.overall->interest_auc : r.overall->auc;
    }
    return std::nullopt;
}

}  // namespace mscan
