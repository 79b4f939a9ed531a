// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Joint objective and the optimisation loop.
//
//   L_uis   = mean BCE(sigmoid(y_m * sigmoid(y_s)), y)
//   L_s     = mean BCE(sigmoid(y_s), y_s_label)
//   L_final = L_uis + alpha * L_s
//
// Without the bias branch the objective is mean BCE(sigmoid(y_m), y).

#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mscan/autodiff.hpp"
#include "mscan/data.hpp"
#include "mscan/error.hpp"
#include "mscan/model.hpp"

namespace mscan {

// ---------------------------------------------------------------------------
// Scalar losses.

/// Binary cross-entropy of sigmoid(logit) against y, in the overflow-free form.
inline double loss_uis(double logit_uis, double y) { return ad::bce_with_logit(logit_uis, y); }

inline double loss_s(double logit_s, double y_s) { return ad::bce_with_logit(logit_s, y_s); }

inline double loss_total(double l_uis, double l_s, double alpha) {
    if (!(alpha >= 0.0)) throw PreconditionError("loss_total: alpha must be nonnegative");
    return l_uis + alpha * l_s;
}

// ---------------------------------------------------------------------------

enum class OptimizerKind { Sgd, Adam };
enum class ScenarioLabel { Click, ScenarioCtr };

struct LossOptions {
    double alpha = 0.5;
    ScenarioLabel ys_label = ScenarioLabel::Click;
    std::vector<double> scenario_ctr;  // per scenario id, used with ScenarioCtr
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 256;
    std::size_t epochs = 3;
    double alpha = 0.5;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 0.0;  // 0 disables clipping
    ScenarioLabel ys_label = ScenarioLabel::Click;
    bool verbose = false;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
        if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
        if (!(alpha >= 0.0)) throw ConfigError("train: alpha must be nonnegative");
        if (!(clip_norm >= 0.0)) throw ConfigError("train: clip_norm must be nonnegative");
    }
};

struct EpochLoss {
    double l_uis = 0.0;
    double l_s = 0.0;
    double l_final = 0.0;
};

struct TrainReport {
    std::vector<EpochLoss> epochs;
    std::uint64_t seed = 0;
    std::string checksum;
    double wall_seconds = 0.0;
};

struct LossGraph {
    Var total;
    Var l_uis;
    std::optional<Var> l_s;
};

// ---------------------------------------------------------------------------
// Model hooks used by the generic trainer. Baselines provide the same pair.

inline std::vector<Parameter*> parameters(MScanModel& model) { return model.params.all(); }

inline LossGraph build_loss(Tape& tape, MScanModel& model, std::span<const Example* const> batch,
                            const LossOptions& opts) {
    const BatchGraph g = build_forward(tape, model.params, model.config, batch);
    std::vector<double> labels;
    labels.reserve(batch.size());
    for (const Example* e : batch) labels.push_back(static_cast<double>(e->label));

    if (!g.y_s) {
        const Var l = ad::mean(ad::bce_logits(g.y_m, labels));
        return {l, l, std::nullopt};
    }
    std::vector<double> scenario_labels;
    scenario_labels.reserve(batch.size());
    for (const Example* e : batch) {
        if (opts.ys_label == ScenarioLabel::ScenarioCtr) {
            scenario_labels.push_back(opts.scenario_ctr.at(e->scenario_id));
        } else {
            scenario_labels.push_back(static_cast<double>(e->label));
        }
    }
    const Var y_uis = ad::mul(g.y_m, ad::sigmoid(*g.y_s));
    const Var l_uis = ad::mean(ad::bce_logits(y_uis, labels));
    const Var l_s = ad::mean(ad::bce_logits(*g.y_s, std::move(scenario_labels)));
    const Var total = ad::add(l_uis, ad::affine(l_s, opts.alpha, 0.0));
    return {total, l_uis, l_s};
}

// ---------------------------------------------------------------------------

/// FNV-1a over parameter names and the bytes of their values.
inline std::string parameter_checksum(std::span<const Parameter* const> params) {
    std::uint64_t h = 1469598103934665603ULL;
    auto feed = [&](const void* data, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(data);
        for (std::size_t k = 0; k < n; ++k) {
            h ^= b[k];
            h *= 1099511628211ULL;
        }
    };
    for (const Parameter* p : params) {
        feed(p->name.data(), p->name.size());
        feed(p->value.data.data(), p->value.size() * sizeof(double));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string parameter_checksum(const MScanModel& model) {
    const auto ps = model.params.all();
    return parameter_checksum(std::span<const Parameter* const>(ps));
}

/// Shuffle order for one epoch; a pure function of (seed, epoch, n).
inline std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::size_t epoch, std::size_t n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

class Optimizer {
public:
    Optimizer(const TrainConfig& cfg, std::span<Parameter* const> params) : cfg_(cfg) {
        if (cfg.optimizer == OptimizerKind::Adam) {
            for (const Parameter* p : params) {
                m_.emplace_back(p->value.shape);
                v_.emplace_back(p->value.shape);
            }
        }
    }

    void step(std::span<Parameter* const> params, double learning_rate) {
        double scale = 1.0;
        if (cfg_.clip_norm > 0.0) {
            double sq = 0.0;
            for (const Parameter* p : params) {
                for (double g : p->grad.data) sq += g * g;
            }
            const double norm = std::sqrt(sq);
            if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
        }
        if (cfg_.optimizer == OptimizerKind::Sgd) {
            for (Parameter* p : params) {
                for (std::size_t k = 0; k < p->value.size(); ++k) p->value.data[k] -= learning_rate * scale * p->grad.data[k];
            }
            return;
        }
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Parameter& p = *params[i];
            auto& m = m_[i].data;
            auto& v = v_[i].data;
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double g = scale * p.grad.data[k];
                m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
                v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
                p.value.data[k] -= learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.epsilon);
            }
        }
    }

private:
    TrainConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::uint64_t t_ = 0;
};

inline std::vector<double> scenario_click_rates(std::span<const Example> data, std::size_t scenarios) {
    std::vector<double> clicks(scenarios, 0.0), counts(scenarios, 0.0);
    for (const auto& e : data) {
        clicks.at(e.scenario_id) += e.label;
        counts.at(e.scenario_id) += 1.0;
    }
    for (std::size_t s = 0; s < scenarios; ++s) clicks[s] = counts[s] > 0 ? clicks[s] / counts[s] : 0.5;
    return clicks;
}

/// Runs `epochs` passes of seeded-shuffled minibatches (last partial batch
/// kept). Deterministic in (cfg.seed, data).
template <typename Model>
TrainReport train(Model& model, std::span<const Example> data, const TrainConfig& cfg,
                  std::size_t num_scenarios = 0) {
    cfg.validate();
    if (data.empty()) throw PreconditionError("train: empty dataset");
    const auto start = std::chrono::steady_clock::now();

    LossOptions opts;
    opts.alpha = cfg.alpha;
    opts.ys_label = cfg.ys_label;
    if (cfg.ys_label == ScenarioLabel::ScenarioCtr) {
        std::size_t p = num_scenarios;
        for (const auto& e : data) p = std::max(p, e.scenario_id + 1);
        opts.scenario_ctr = scenario_click_rates(data, p);
    }

    std::vector<Parameter*> params = parameters(model);
    Optimizer opt(cfg, params);
    TrainReport report;
    report.seed = cfg.seed;
    std::vector<const Example*> batch;
    batch.reserve(cfg.batch_size);
    Tape tape;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_permutation(cfg.seed, epoch, data.size());
        double sum_uis = 0.0, sum_s = 0.0, sum_final = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            batch.clear();
            for (std::size_t k = begin; k < end; ++k) batch.push_back(&data[order[k]]);
            for (Parameter* p : params) p->zero_grad();
            tape.clear();
            const LossGraph g = build_loss(tape, model, batch, opts);
            const double l_final = g.total.value().item();
            const double l_uis = g.l_uis.value().item();
            const double l_s = g.l_s ? g.l_s->value().item() : 0.0;
            if (!std::isfinite(l_final) || !std::isfinite(l_uis) || !std::isfinite(l_s)) {
                throw NonFiniteError("train: non-finite loss in epoch " + std::to_string(epoch + 1));
            }
            tape.backward(g.total);
            opt.step(params, cfg.learning_rate);
            const double w = static_cast<double>(batch.size());
            sum_uis += w * l_uis;
            sum_s += w * l_s;
            sum_final += w * l_final;
        }
        const double n = static_cast<double>(data.size());
        EpochLoss el{sum_uis / n, sum_s / n, sum_final / n};
        report.epochs.push_back(el);
        if (cfg.verbose) {
            std::fprintf(stderr, "epoch %zu: l_uis=%.6f l_s=%.6f l_final=%.6f\n", epoch + 1, el.l_uis, el.l_s,
                         el.l_final);
        }
    }
    std::vector<const Parameter*> frozen(params.begin(), params.end());
    report.checksum = parameter_checksum(frozen);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

struct GradCheckEntry {
    std::string parameter;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    bool flagged = false;
};

struct GradCheckReport {
    double epsilon = 0.0;
    double tolerance = 0.0;
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool pass = false;

    std::vector<GradCheckEntry> flagged() const {
        std::vector<GradCheckEntry> out;
        for (const auto& e : entries) {
            if (e.flagged) out.push_back(e);
        }
        return out;
    }
};

/// Compares `analytic` to central differences of `loss` for every entry of
/// every parameter. rel = |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckReport compare_gradients(std::span<Parameter* const> params, const ad::GradientMap& analytic,
                                         const std::function<double()>& loss, double epsilon, double tolerance) {
    if (!(epsilon > 0.0) || !(tolerance > 0.0)) throw PreconditionError("grad check: epsilon and tolerance must be > 0");
    GradCheckReport report;
    report.epsilon = epsilon;
    report.tolerance = tolerance;
    for (Parameter* p : params) {
        const Tensor& a = analytic.at(p->name);
        for (std::size_t k = 0; k < p->value.size(); ++k) {
            const double saved = p->value.data[k];
            p->value.data[k] = saved + epsilon;
            const double up = loss();
            p->value.data[k] = saved - epsilon;
            const double down = loss();
            p->value.data[k] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NonFiniteError("grad check: non-finite loss perturbing " + p->name);
            }
            GradCheckEntry e;
            e.parameter = p->name;
            e.index = k;
            e.analytic = a.data[k];
            e.numeric = (up - down) / (2.0 * epsilon);
            e.rel_error = std::abs(e.analytic - e.numeric) /
                          std::max({std::abs(e.analytic), std::abs(e.numeric), 1e-8});
            e.flagged = e.rel_error > tolerance;
            report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
            report.entries.push_back(std::move(e));
        }
    }
    report.pass = report.max_rel_error <= tolerance;
    return report;
}

/// Loss value of a model on a batch without recording gradients.
template <typename Model>
double evaluate_loss(Model& model, std::span<const Example> batch, const LossOptions& opts) {
    std::vector<const Example*> ptrs;
    for (const auto& e : batch) ptrs.push_back(&e);
    Tape tape;
    return build_loss(tape, model, ptrs, opts).total.value().item();
}

/// Analytic gradient of the batch loss, as a map keyed by parameter name.
template <typename Model>
ad::GradientMap loss_gradients(Model& model, std::span<const Example> batch, const LossOptions& opts) {
    std::vector<const Example*> ptrs;
    for (const auto& e : batch) ptrs.push_back(&e);
    std::vector<Parameter*> params = parameters(model);
    for (Parameter* p : params) p->zero_grad();
    Tape tape;
    const LossGraph g = build_loss(tape, model, ptrs, opts);
    if (!std::isfinite(g.total.value().item())) throw NonFiniteError("grad check: non-finite loss");
    tape.backward(g.total);
    return ad::collect_gradients(params);
}

template <typename Model>
GradCheckReport check_gradients(Model& model, std::span<const Example> batch, double epsilon, double tolerance,
                                const LossOptions& opts = {}) {
    if (batch.empty()) throw PreconditionError("check_gradients: empty batch");
    if (!(epsilon > 0.0) || !(tolerance > 0.0)) {
        throw PreconditionError("check_gradients: epsilon and tolerance must be > 0");
    }
    const ad::GradientMap analytic = loss_gradients(model, batch, opts);
    std::vector<Parameter*> params = parameters(model);
    return compare_gradients(params, analytic, [&] { return evaluate_loss(model, batch, opts); }, epsilon, tolerance);
}

}  // namespace mscan
