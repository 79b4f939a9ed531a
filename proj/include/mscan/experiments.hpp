// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// The 2x2 component ablation and one-dimensional hyperparameter sweeps.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mscan/data.hpp"
#include "mscan/error.hpp"
#include "mscan/evaluation.hpp"
#include "mscan/model.hpp"
#include "mscan/training.hpp"

namespace mscan {

struct ExperimentConfig {
    ModelConfig model;
    TrainConfig train;
    InferenceConfig infer;
    HeadlineMetric metric = HeadlineMetric::Auto;
};

struct TrainedModel {
    MScanModel model;
    TrainReport report;
};

/// Model and training both seeded with `seed`.
inline TrainedModel train_seeded(const Dataset& data, ModelConfig mc, TrainConfig tc, std::uint64_t seed) {
    mc.init_seed = seed;
    tc.seed = seed;
    TrainedModel t{make_model(mc, data.vocab), {}};
    t.report = train(t.model, data.train, tc, data.vocab.scenarios);
    return t;
}

struct AblationCell {
    bool saca = true;
    bool sbe = true;
    std::uint64_t seed = 0;
    std::optional<double> overall;                  // headline AUC
    std::map<std::size_t, std::optional<double>> scenarios;  // per-scenario click AUC
    std::string checksum;
    std::string error;  // non-empty when the cell failed
};

/// Trains and evaluates {saca on/off} x {sbe on/off} for every seed. A failing
/// cell records its error and the grid continues.
inline std::vector<AblationCell> run_ablation(const Dataset& data, const ExperimentConfig& base,
                                              const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw PreconditionError("ablation: at least one seed required");
    std::vector<AblationCell> cells;
    for (std::uint64_t seed : seeds) {
        for (bool saca : {true, false}) {
            for (bool sbe : {true, false}) {
                AblationCell cell;
                cell.saca = saca;
                cell.sbe = sbe;
                cell.seed = seed;
                try {
                    ModelConfig mc = base.model;
                    mc.co_attention = saca;
                    mc.bias_branch = sbe;
                    const TrainedModel t = train_seeded(data, mc, base.train, seed);
                    const MetricsReport r = evaluate(t.model, base.infer, data.test);
                    cell.overall = headline_auc(r, base.metric);
                    for (const auto& [s, row] : r.scenarios) cell.scenarios[s] = row.auc;
                    cell.checksum = t.report.checksum;
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

/// Mean headline AUC of one (saca, sbe) combination over the seeds that succeeded.
inline std::optional<double> ablation_mean(const std::vector<AblationCell>& cells, bool saca, bool sbe) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) {
        if (c.saca == saca && c.sbe == sbe && c.overall) {
            sum += *c.overall;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

enum class SweepParam { C, Alpha };

inline std::string sweep_param_name(SweepParam p) { return p == SweepParam::C ? "c" : "alpha"; }

struct SweepCurve {
    std::string param;
    std::vector<double> grid;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<std::optional<double>>> auc;  // [seed][point]; empty = failed point
    std::vector<std::optional<double>> mean_auc;          // per point, over seeds that succeeded
    std::vector<std::vector<std::string>> checksums;      // [seed][point], model checksum used at that point
    std::vector<std::string> errors;                      // one line per failure

    /// Index of the best grid point for one seed, if any point succeeded.
    std::optional<std::size_t> argmax(std::size_t seed_index) const {
        std::optional<std::size_t> best;
        const auto& row = auc.at(seed_index);
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (row[k] && (!best || *row[k] > *row[*best])) best = k;
        }
        return best;
    }
};

inline void check_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw PreconditionError("sweep: grid must be non-empty");
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1])) throw PreconditionError("sweep: grid must be strictly increasing");
    }
}

/// c is inference-only: one model per seed is trained and re-scored at every
/// grid point. alpha retrains at every point. Failed points become gaps.
inline SweepCurve sweep(SweepParam param, const std::vector<double>& grid, const Dataset& data,
                        const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds) {
    check_grid(grid);
    if (seeds.empty()) throw PreconditionError("sweep: at least one seed required");
    SweepCurve curve;
    curve.param = sweep_param_name(param);
    curve.grid = grid;
    curve.seeds = seeds;
    for (std::uint64_t seed : seeds) {
        std::vector<std::optional<double>> row(grid.size());
        std::vector<std::string> sums(grid.size());
        auto fail = [&](std::size_t k, const std::exception& e) {
            curve.errors.push_back("seed " + std::to_string(seed) + " " + curve.param + "=" + std::to_string(grid[k]) +
                                   ": " + e.what());
        };
        if (param == SweepParam::C) {
            std::optional<TrainedModel> trained;
            try {
                trained = train_seeded(data, base.model, base.train, seed);
            } catch (const std::exception& e) {
                for (std::size_t k = 0; k < grid.size(); ++k) fail(k, e);
            }
            if (trained) {
                for (std::size_t k = 0; k < grid.size(); ++k) {
                    try {
                        InferenceConfig ic = base.infer;
                        ic.c = grid[k];
                        row[k] = headline_auc(evaluate(trained->model, ic, data.test), base.metric);
                        sums[k] = parameter_checksum(trained->model);
                    } catch (const std::exception& e) {
                        fail(k, e);
                    }
                }
            }
        } else {
            for (std::size_t k = 0; k < grid.size(); ++k) {
                try {
                    TrainConfig tc = base.train;
                    tc.alpha = grid[k];
                    const TrainedModel t = train_seeded(data, base.model, tc, seed);
                    row[k] = headline_auc(evaluate(t.model, base.infer, data.test), base.metric);
                    sums[k] = t.report.checksum;
                } catch (const std::exception& e) {
                    fail(k, e);
                }
            }
        }
        curve.auc.push_back(std::move(row));
        curve.checksums.push_back(std::move(sums));
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& row : curve.auc) {
            if (row[k]) {
                sum += *row[k];
                ++n;
            }
        }
        curve.mean_auc.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
    }
    return curve;
}

}  // namespace mscan
