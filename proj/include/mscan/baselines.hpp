// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Embedding + FFN click models trained on one scenario (single), on all
// scenarios (mix), or on all then continued on one (finetune).

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mscan/data.hpp"
#include "mscan/error.hpp"
#include "mscan/evaluation.hpp"
#include "mscan/model.hpp"
#include "mscan/training.hpp"

namespace mscan {

struct BaselineConfig {
    std::size_t embed_dim = 8;
    std::vector<std::size_t> layers{128, 64, 32, 1};  // three hidden layers, linear output
    std::uint64_t init_seed = 1;
    double init_scale = 0.05;
    std::size_t finetune_epochs = 1;
    double finetune_lr_scale = 0.1;

    void validate() const {
        if (embed_dim == 0) throw ConfigError("baseline: embed_dim must be positive");
        if (layers.empty() || layers.back() != 1) throw ConfigError("baseline: layers must end in width 1");
        for (std::size_t w : layers) {
            if (w == 0) throw ConfigError("baseline: layer widths must be positive");
        }
        if (!(finetune_lr_scale > 0.0)) throw ConfigError("baseline: finetune_lr_scale must be positive");
    }
};

struct BaselineModel {
    BaselineConfig config;
    VocabSizes vocab;
    Parameter user_table, item_table, scenario_table;
    Ffn ffn;  // over [u, i, s]

    std::vector<Parameter*> all() {
        std::vector<Parameter*> out{&user_table, &item_table, &scenario_table};
        for (std::size_t l = 0; l < ffn.depth(); ++l) {
            out.push_back(&ffn.weights[l]);
            out.push_back(&ffn.biases[l]);
        }
        return out;
    }
};

inline BaselineModel make_baseline(const BaselineConfig& cfg, VocabSizes vocab) {
    cfg.validate();
    if (vocab.users == 0 || vocab.items == 0 || vocab.scenarios == 0) {
        throw PreconditionError("baseline: vocabulary sizes must be positive");
    }
    detail::UniformInit init(cfg.init_seed, cfg.init_scale);
    const std::size_t d = cfg.embed_dim;
    BaselineModel m;
    m.config = cfg;
    m.vocab = vocab;
    m.user_table = Parameter("user_table", init.weights({vocab.users, d}));
    m.item_table = Parameter("item_table", init.weights({vocab.items, d}));
    m.scenario_table = Parameter("scenario_table", init.weights({vocab.scenarios, d}));
    m.ffn = detail::make_ffn("ffn", 3 * d, cfg.layers, init);
    return m;
}

template <typename M>
Var baseline_logits(Tape& tape, M& model, std::span<const Example* const> batch) {
    if (batch.empty()) throw PreconditionError("baseline: empty batch");
    std::vector<std::size_t> u, i, s;
    for (const Example* e : batch) {
        u.push_back(e->user_id);
        i.push_back(e->item_id);
        s.push_back(e->scenario_id);
    }
    const Var x = ad::concat({ad::lookup(bind(tape, model.user_table), u), ad::lookup(bind(tape, model.item_table), i),
                              ad::lookup(bind(tape, model.scenario_table), s)},
                             1);
    return ffn_forward(tape, model.ffn, x);
}

inline std::vector<Parameter*> parameters(BaselineModel& model) { return model.all(); }

inline LossGraph build_loss(Tape& tape, BaselineModel& model, std::span<const Example* const> batch,
                            const LossOptions&) {
    std::vector<double> labels;
    for (const Example* e : batch) labels.push_back(static_cast<double>(e->label));
    const Var l = ad::mean(ad::bce_logits(baseline_logits(tape, model, batch), std::move(labels)));
    return {l, l, std::nullopt};
}

inline std::vector<double> baseline_scores(const BaselineModel& model, std::span<const Example> examples,
                                           std::size_t batch_size = 512) {
    std::vector<double> out;
    out.reserve(examples.size());
    std::vector<const Example*> batch;
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
        batch.clear();
        for (std::size_t k = start; k < std::min(examples.size(), start + batch_size); ++k) batch.push_back(&examples[k]);
        Tape tape;
        const Var y = baseline_logits(tape, model, batch);
        out.insert(out.end(), y.value().data.begin(), y.value().data.end());
    }
    return out;
}

enum class BaselineKind { Single, Mix, Finetune };

inline std::string baseline_name(BaselineKind k) {
    switch (k) {
        case BaselineKind::Single: return "single";
        case BaselineKind::Mix: return "mix";
        case BaselineKind::Finetune: return "finetune";
    }
    return "?";
}

inline std::vector<Example> in_scenario(std::span<const Example> data, std::size_t scenario) {
    std::vector<Example> out;
    for (const auto& e : data) {
        if (e.scenario_id == scenario) out.push_back(e);
    }
    return out;
}

/// Trains one baseline and scores the test set. single and finetune need a
/// target scenario and report only its row; mix reports every scenario plus
/// the pooled row.
inline MetricsReport run_baseline(BaselineKind kind, const Dataset& data, const TrainConfig& train_cfg,
                                  const BaselineConfig& cfg, std::optional<std::size_t> target = std::nullopt) {
    if (kind != BaselineKind::Mix) {
        if (!target) throw PreconditionError("baseline: " + baseline_name(kind) + " needs a target scenario");
        if (*target >= data.vocab.scenarios) throw IndexError("baseline: target scenario out of range");
    }
    BaselineModel model = make_baseline(cfg, data.vocab);
    std::vector<Example> target_train;
    if (target) target_train = in_scenario(data.train, *target);

    if (kind == BaselineKind::Single) {
        if (target_train.empty()) {
            throw PreconditionError("baseline: scenario " + std::to_string(*target) + " has no training data");
        }
        train(model, target_train, train_cfg);
    } else {
        train(model, data.train, train_cfg);
        if (kind == BaselineKind::Finetune && cfg.finetune_epochs > 0) {
            if (target_train.empty()) {
                throw PreconditionError("baseline: scenario " + std::to_string(*target) + " has no training data");
            }
            TrainConfig second = train_cfg;
            second.epochs = cfg.finetune_epochs;
            second.learning_rate = train_cfg.learning_rate * cfg.finetune_lr_scale;
            train(model, target_train, second);
        }
    }

    MetricsReport report;
    if (kind == BaselineKind::Mix) {
        report = metrics_from_scores(data.test, baseline_scores(model, data.test), true, true);
    } else {
        const std::vector<Example> test = in_scenario(data.test, *target);
        if (test.empty()) throw PreconditionError("baseline: scenario " + std::to_string(*target) + " has no test data");
        report = metrics_from_scores(test, baseline_scores(model, test), true, false);
    }
    report.model = baseline_name(kind);
    return report;
}

/// single/finetune run once per scenario and merged into one report; mix runs once.
inline MetricsReport run_baseline_all(BaselineKind kind, const Dataset& data, const TrainConfig& train_cfg,
                                      const BaselineConfig& cfg) {
    if (kind == BaselineKind::Mix) return run_baseline(kind, data, train_cfg, cfg);
    MetricsReport merged;
    merged.model = baseline_name(kind);
    for (std::size_t s = 0; s < data.vocab.scenarios; ++s) {
        const MetricsReport r = run_baseline(kind, data, train_cfg, cfg, s);
        for (const auto& [k, row] : r.scenarios) merged.scenarios[k] = row;
    }
    return merged;
}

}  // namespace mscan
