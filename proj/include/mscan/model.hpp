// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// The multi-scenario click model:
//
//   current-scenario history --GRU--> h
//   mixed history x candidate x current history --co-attention--> beta --> R_h
//   interest head   y_m = FFN([u, i, s, h, R_h])
//   scenario head   y_s = FFN(s)
//   training score  y_uis = y_m * sigmoid(y_s)
//   inference score y_db  = y_m * sigmoid(y_s) - c * sigmoid(y_s)
//
// Row-vector convention throughout: activations are 1 x width rows and
// weights are in x out, so a layer is x W + b.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mscan/autodiff.hpp"
#include "mscan/data.hpp"
#include "mscan/error.hpp"
#include "mscan/tensor.hpp"

namespace mscan {

using ad::Parameter;
using ad::Tape;
using ad::Var;

struct ModelConfig {
    std::size_t embed_dim = 8;
    std::size_t gru_hidden = 8;
    std::vector<std::size_t> attention_layers{8, 1};
    std::vector<std::size_t> interest_layers{128, 64, 1};
    std::vector<std::size_t> scenario_layers{16, 1};
    SequenceCaps caps;
    std::uint64_t init_seed = 1;
    double init_scale = 0.05;
    bool co_attention = true;  // cross-scenario history path
    bool bias_branch = true;   // scenario-bias head and debiased inference

    std::size_t interest_input_width() const {
        return 3 * embed_dim + gru_hidden + (co_attention ? embed_dim : 0);
    }

    void validate() const {
        if (embed_dim == 0 || gru_hidden == 0) throw ConfigError("model: embed_dim and gru_hidden must be positive");
        if (caps.history == 0 || caps.current == 0) throw ConfigError("model: sequence caps must be positive");
        auto check = [](const std::vector<std::size_t>& layers, const char* what) {
            if (layers.empty()) throw ConfigError(std::string("model: ") + what + " needs at least one layer");
            for (std::size_t w : layers) {
                if (w == 0) throw ConfigError(std::string("model: ") + what + " widths must be positive");
            }
            if (layers.back() != 1) throw ConfigError(std::string("model: ") + what + " must end in width 1");
        };
        check(attention_layers, "attention FFN");
        check(interest_layers, "interest FFN");
        check(scenario_layers, "scenario FFN");
        if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ConfigError("model: init_scale must be >= 0");
    }
};

/// Stack of affine layers; ReLU between layers, none after the last.
struct Ffn {
    std::vector<Parameter> weights;  // in x out
    std::vector<Parameter> biases;   // 1 x out

    bool empty() const { return weights.empty(); }
    std::size_t depth() const { return weights.size(); }
};

struct MScanParameters {
    Parameter user_table;
    Parameter item_table;
    Parameter scenario_table;
    Parameter gru_w_z, gru_w_r, gru_w_h;  // d x hidden
    Parameter gru_u_z, gru_u_r, gru_u_h;  // hidden x hidden
    Parameter gru_b_z, gru_b_r, gru_b_h;  // 1 x hidden
    Ffn attention;  // input 3d; empty without co-attention
    Ffn interest;
    Ffn scenario;   // input d; empty without the bias branch

    std::vector<Parameter*> all() {
        std::vector<Parameter*> out{&user_table, &item_table, &scenario_table, &gru_w_z, &gru_w_r,
                                    &gru_w_h,    &gru_u_z,    &gru_u_r,        &gru_u_h, &gru_b_z,
                                    &gru_b_r,    &gru_b_h};
        for (Ffn* f : {&attention, &interest, &scenario}) {
            for (std::size_t l = 0; l < f->depth(); ++l) {
                out.push_back(&f->weights[l]);
                out.push_back(&f->biases[l]);
            }
        }
        return out;
    }

    std::vector<const Parameter*> all() const {
        std::vector<const Parameter*> out;
        for (Parameter* p : const_cast<MScanParameters*>(this)->all()) out.push_back(p);
        return out;
    }

    void zero_grad() {
        for (Parameter* p : all()) p->zero_grad();
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (const Parameter* p : all()) n += p->value.size();
        return n;
    }
};

struct MScanModel {
    ModelConfig config;
    VocabSizes vocab;
    MScanParameters params;
};

struct InferenceConfig {
    double c = 0.5;  // counterfactual reference value of the interest score
};

namespace detail {

class UniformInit {
public:
    UniformInit(std::uint64_t seed, double scale) : rng_(seed), scale_(scale) {}

    Tensor weights(Shape shape) {
        Tensor t(std::move(shape));
        if (scale_ == 0.0) return t;
        std::uniform_real_distribution<double> dist(-scale_, scale_);
        for (double& v : t.data) v = dist(rng_);
        return t;
    }

private:
    std::mt19937_64 rng_;
    double scale_;
};

inline Ffn make_ffn(const std::string& prefix, std::size_t input, const std::vector<std::size_t>& layers,
                    UniformInit& init) {
    Ffn f;
    std::size_t in = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        f.weights.emplace_back(prefix + ".w" + std::to_string(l), init.weights({in, layers[l]}));
        f.biases.emplace_back(prefix + ".b" + std::to_string(l), Tensor(Shape{1, layers[l]}));
        in = layers[l];
    }
    return f;
}

}  // namespace detail

/// Weights uniform in [-init_scale, init_scale], biases zero. Deterministic
/// in init_seed.
inline MScanParameters init_parameters(const ModelConfig& cfg, VocabSizes vocab) {
    cfg.validate();
    if (vocab.users == 0 || vocab.items == 0 || vocab.scenarios == 0) {
        throw PreconditionError("init_parameters: vocabulary sizes must be positive");
    }
    detail::UniformInit init(cfg.init_seed, cfg.init_scale);
    const std::size_t d = cfg.embed_dim;
    const std::size_t h = cfg.gru_hidden;
    MScanParameters p;
    p.user_table = Parameter("user_table", init.weights({vocab.users, d}));
    p.item_table = Parameter("item_table", init.weights({vocab.items, d}));
    p.scenario_table = Parameter("scenario_table", init.weights({vocab.scenarios, d}));
    p.gru_w_z = Parameter("gru.w_z", init.weights({d, h}));
    p.gru_w_r = Parameter("gru.w_r", init.weights({d, h}));
    p.gru_w_h = Parameter("gru.w_h", init.weights({d, h}));
    p.gru_u_z = Parameter("gru.u_z", init.weights({h, h}));
    p.gru_u_r = Parameter("gru.u_r", init.weights({h, h}));
    p.gru_u_h = Parameter("gru.u_h", init.weights({h, h}));
    p.gru_b_z = Parameter("gru.b_z", Tensor(Shape{1, h}));
    p.gru_b_r = Parameter("gru.b_r", Tensor(Shape{1, h}));
    p.gru_b_h = Parameter("gru.b_h", Tensor(Shape{1, h}));
    if (cfg.co_attention) p.attention = detail::make_ffn("attention", 3 * d, cfg.attention_layers, init);
    p.interest = detail::make_ffn("interest", cfg.interest_input_width(), cfg.interest_layers, init);
    if (cfg.bias_branch) p.scenario = detail::make_ffn("scenario", d, cfg.scenario_layers, init);
    return p;
}

inline MScanModel make_model(const ModelConfig& cfg, VocabSizes vocab) {
    return {cfg, vocab, init_parameters(cfg, vocab)};
}

// ---------------------------------------------------------------------------
// Scalar head combinators.

inline double sigmoid(double z) { return ad::stable_sigmoid(z); }

/// Training-time fusion: y_m * sigmoid(y_s).
inline double fuse(double y_m, double y_s) { return y_m * sigmoid(y_s); }

/// Debiased inference score: y_m * sigmoid(y_s) - c * sigmoid(y_s).
inline double infer_debiased(double y_m, double y_s, const InferenceConfig& cfg) {
    const double g = sigmoid(y_s);
    return y_m * g - cfg.c * g;
}

// ---------------------------------------------------------------------------
// Graph builders. `P` is MScanParameters (trainable binding) or
// const MScanParameters (frozen binding, no gradients recorded).

inline Var bind(Tape& tape, Parameter& p) { return tape.param(p); }
inline Var bind(Tape& tape, const Parameter& p) { return tape.reference(p.value); }

/// Layers `first..` of an FFN over a batch of rows.
template <typename F>
Var ffn_forward(Tape& tape, F& ffn, Var rows, std::size_t first = 0) {
    const std::size_t batch = rows.value().rows();
    Var x = rows;
    for (std::size_t l = first; l < ffn.depth(); ++l) {
        x = ad::add(ad::matmul(x, bind(tape, ffn.weights[l])), ad::tile_rows(bind(tape, ffn.biases[l]), batch));
        if (l + 1 < ffn.depth()) x = ad::relu(x);
    }
    return x;
}

struct GruResult {
    Var final_state;          // 1 x hidden
    std::vector<Var> states;  // h_1 .. h_k
};

/// GRU over `inputs` (k x d). An empty history (k == 0, pass std::nullopt)
/// yields the zero initial state.
template <typename P>
GruResult encode_current_scenario(Tape& tape, P& params, std::optional<Var> inputs) {
    const std::size_t hidden = params.gru_u_z.value.shape[0];
    GruResult out{tape.constant(Tensor(Shape{1, hidden})), {}};
    if (!inputs) return out;
    const std::size_t steps = inputs->value().rows();
    if (inputs->value().rank() != 2 || inputs->value().cols() != params.gru_w_z.value.shape[0]) {
        throw ShapeError("encode_current_scenario: inputs must be k x " +
                         std::to_string(params.gru_w_z.value.shape[0]) + ", got " + shape_str(inputs->shape()));
    }
    auto project = [&](auto& w, auto& b) {
        return ad::add(ad::matmul(*inputs, bind(tape, w)), ad::tile_rows(bind(tape, b), steps));
    };
    const Var xz = project(params.gru_w_z, params.gru_b_z);
    const Var xr = project(params.gru_w_r, params.gru_b_r);
    const Var xh = project(params.gru_w_h, params.gru_b_h);
    const Var uz = bind(tape, params.gru_u_z);
    const Var ur = bind(tape, params.gru_u_r);
    const Var uh = bind(tape, params.gru_u_h);
    Var h = out.final_state;
    for (std::size_t k = 0; k < steps; ++k) {
        const Var z = ad::sigmoid(ad::add(ad::slice_rows(xz, k, 1), ad::matmul(h, uz)));
        const Var r = ad::sigmoid(ad::add(ad::slice_rows(xr, k, 1), ad::matmul(h, ur)));
        const Var cand = ad::tanh(ad::add(ad::slice_rows(xh, k, 1), ad::matmul(ad::mul(r, h), uh)));
        h = ad::add(ad::mul(ad::one_minus(z), h), ad::mul(z, cand));
        out.states.push_back(h);
    }
    out.final_state = h;
    return out;
}

struct CoAttention {
    Var matrix;  // n x m
    Var pooled;  // n
};

/// Splits of the first attention layer, shared across a batch:
/// [h (+) i (+) s] W = h W_h + i W_i + s W_s.
struct AttentionInputLayer {
    Var w_history, w_candidate, w_current, bias;
};

template <typename P>
AttentionInputLayer bind_attention_input(Tape& tape, P& params) {
    const std::size_t d = params.item_table.value.shape[1];
    const Var w = bind(tape, params.attention.weights[0]);
    return {ad::slice_rows(w, 0, d), ad::slice_rows(w, d, d), ad::slice_rows(w, 2 * d, d),
            bind(tape, params.attention.biases[0])};
}

/// C[j][k] = FFN([h_j (+) i (+) s_k]), c_j = max_k C[j][k].
/// `mixed` is n x d, `candidate` 1 x d, `current` m x d with n, m >= 1.
template <typename P>
CoAttention co_attention_scores(Tape& tape, P& params, const AttentionInputLayer& first, Var mixed, Var candidate,
                                Var current) {
    const std::size_t n = mixed.value().rows();
    const std::size_t m = current.value().rows();
    const Var a = ad::matmul(mixed, first.w_history);
    const Var b = ad::add(ad::matmul(candidate, first.w_candidate), first.bias);
    const Var s = ad::matmul(current, first.w_current);
    Var x = ad::add(ad::pair_sum(a, s), ad::tile_rows(b, n * m));
    if (params.attention.depth() > 1) {
        x = ad::relu(x);
        x = ffn_forward(tape, params.attention, x, 1);
    }
    const Var matrix = ad::reshape(x, {n, m});
    return {matrix, ad::max_pool(matrix)};
}

struct AttentionResult {
    Var weights;    // 1 x n
    Var aggregate;  // 1 x d
};

/// beta = softmax(c), R_h = sum_j beta_j h_j.
inline AttentionResult attention_aggregate(Var pooled, Var mixed) {
    const std::size_t n = mixed.value().rows();
    const Var beta = ad::softmax(ad::reshape(pooled, {1, n}));
    return {beta, ad::matmul(beta, mixed)};
}

/// Raw interest logit rows from feature rows (batch x interest_input_width).
template <typename P>
Var predict_interest(Tape& tape, P& params, Var features) {
    return ffn_forward(tape, params.interest, features);
}

/// Raw scenario-bias logit rows from scenario embedding rows (batch x d).
template <typename P>
Var predict_scenario_bias(Tape& tape, P& params, Var scenario_rows) {
    return ffn_forward(tape, params.scenario, scenario_rows);
}

/// Tape ids of one example's intermediates, for tracing.
struct ExampleNodes {
    int user = -1, item = -1, scenario = -1;
    int h_final = -1;
    std::vector<int> gru_states;
    int coattn = -1;  // n x m, -1 when not computed
    int pooled = -1;
    int beta = -1;    // 1 x n, -1 when the mixed history is empty
    int aggregate = -1;
};

struct BatchGraph {
    Var y_m;                  // batch x 1
    std::optional<Var> y_s;   // batch x 1, absent without the bias branch
    std::vector<ExampleNodes> nodes;
};

inline std::vector<std::size_t> item_ids(const std::vector<HistoryEvent>& events) {
    std::vector<std::size_t> out;
    out.reserve(events.size());
    for (const auto& e : events) out.push_back(e.item_id);
    return out;
}

template <typename P>
BatchGraph build_forward(Tape& tape, P& params, const ModelConfig& cfg, std::span<const Example* const> batch) {
    if (batch.empty()) throw PreconditionError("forward: empty batch");
    const std::size_t d = cfg.embed_dim;
    const Var users = bind(tape, params.user_table);
    const Var items = bind(tape, params.item_table);
    const Var scenarios = bind(tape, params.scenario_table);
    std::optional<AttentionInputLayer> first;
    if (cfg.co_attention) first = bind_attention_input(tape, params);

    BatchGraph g;
    std::vector<Var> rows;
    rows.reserve(batch.size());
    std::vector<std::size_t> scenario_ids;
    for (const Example* e : batch) {
        ExampleNodes ids;
        const Var u = ad::lookup(users, {e->user_id});
        const Var i = ad::lookup(items, {e->item_id});
        const Var s = ad::lookup(scenarios, {e->scenario_id});
        ids.user = u.id;
        ids.item = i.id;
        ids.scenario = s.id;
        scenario_ids.push_back(e->scenario_id);

        const auto& seq = e->sequences;
        std::optional<Var> current;
        if (!seq.current.empty()) current = ad::lookup(items, seq.current);
        const GruResult gru = encode_current_scenario(tape, params, current);
        ids.h_final = gru.final_state.id;
        for (const Var& v : gru.states) ids.gru_states.push_back(v.id);

        std::vector<Var> parts{u, i, s, gru.final_state};
        if (cfg.co_attention) {
            Var aggregate = tape.constant(Tensor(Shape{1, d}));
            if (!seq.mixed.empty()) {
                const std::size_t n = seq.mixed.size();
                const Var mixed = ad::lookup(items, item_ids(seq.mixed));
                Var pooled = tape.constant(Tensor(Shape{n}));  // empty current history: uniform attention
                if (current) {
                    const CoAttention ca = co_attention_scores(tape, params, *first, mixed, i, *current);
                    ids.coattn = ca.matrix.id;
                    pooled = ca.pooled;
                }
                ids.pooled = pooled.id;
                const AttentionResult att = attention_aggregate(pooled, mixed);
                ids.beta = att.weights.id;
                aggregate = att.aggregate;
            }
            ids.aggregate = aggregate.id;
            parts.push_back(aggregate);
        }
        rows.push_back(ad::concat(parts, 1));
        g.nodes.push_back(std::move(ids));
    }
    const Var features = rows.size() == 1 ? rows.front() : ad::concat(rows, 0);
    g.y_m = predict_interest(tape, params, features);
    if (cfg.bias_branch) g.y_s = predict_scenario_bias(tape, params, ad::lookup(scenarios, scenario_ids));
    return g;
}

// ---------------------------------------------------------------------------
// Inference.

struct Predictions {
    std::vector<double> y_m;
    std::vector<double> y_s;    // empty without the bias branch
    std::vector<double> y_uis;  // equals y_m without the bias branch
    std::vector<double> y_db;   // equals y_m without the bias branch
};

inline Predictions predict(const MScanModel& model, std::span<const Example> examples, const InferenceConfig& cfg,
                           std::size_t batch_size = 512) {
    Predictions out;
    out.y_m.reserve(examples.size());
    std::vector<const Example*> batch;
    for (std::size_t start = 0; start < examples.size(); start += batch_size) {
        const std::size_t end = std::min(examples.size(), start + batch_size);
        batch.clear();
        for (std::size_t k = start; k < end; ++k) batch.push_back(&examples[k]);
        Tape tape;
        const BatchGraph g = build_forward(tape, model.params, model.config, batch);
        for (std::size_t k = 0; k < batch.size(); ++k) {
            const double ym = g.y_m.value().data[k];
            out.y_m.push_back(ym);
            if (g.y_s) {
                const double ys = g.y_s->value().data[k];
                out.y_s.push_back(ys);
                out.y_uis.push_back(fuse(ym, ys));
                out.y_db.push_back(infer_debiased(ym, ys, cfg));
            } else {
                out.y_uis.push_back(ym);
                out.y_db.push_back(ym);
            }
        }
    }
    return out;
}

enum class Mode { Train, Infer };

/// Every intermediate of one forward pass, padded to the sequence caps.
struct ForwardTrace {
    Tensor user, item, scenario;          // d each
    std::vector<Tensor> gru_states;       // h_1 .. h_{N_us}
    Tensor h_final;                       // gru_hidden
    Tensor coattn;                        // history cap x current cap, zero on pads
    Tensor pooled;                        // history cap
    Tensor beta;                          // history cap, exactly zero on pads
    Tensor aggregate;                     // d
    std::size_t mixed_length = 0;
    std::size_t current_length = 0;
    double y_m = 0.0;
    double y_s = 0.0;
    double y_uis = 0.0;
    std::optional<double> y_db;
};

inline ForwardTrace forward(const MScanModel& model, const Example& example, Mode mode,
                            const InferenceConfig& cfg = {}) {
    const auto& mc = model.config;
    if (example.user_id >= model.vocab.users || example.item_id >= model.vocab.items ||
        example.scenario_id >= model.vocab.scenarios) {
        throw IndexError("forward: example ids outside the model vocabulary");
    }
    Tape tape;
    const Example* ptr = &example;
    const BatchGraph g = build_forward(tape, model.params, mc, std::span<const Example* const>(&ptr, 1));
    const ExampleNodes& ids = g.nodes.front();
    auto flat = [&](int id) {
        Tensor t = tape.node(id).out();
        t.shape = {t.size()};
        return t;
    };

    ForwardTrace tr;
    tr.user = flat(ids.user);
    tr.item = flat(ids.item);
    tr.scenario = flat(ids.scenario);
    for (int id : ids.gru_states) tr.gru_states.push_back(flat(id));
    tr.h_final = flat(ids.h_final);
    tr.mixed_length = example.sequences.mixed.size();
    tr.current_length = example.sequences.current.size();

    const std::size_t lh = mc.caps.history, ls = mc.caps.current;
    tr.coattn = Tensor(Shape{lh, ls});
    tr.pooled = Tensor(Shape{lh});
    tr.beta = Tensor(Shape{lh});
    tr.aggregate = ids.aggregate >= 0 ? flat(ids.aggregate) : Tensor(Shape{mc.embed_dim});
    const std::size_t n = std::min(tr.mixed_length, lh);
    const std::size_t m = std::min(tr.current_length, ls);
    if (ids.coattn >= 0) {
        const Tensor& c = tape.node(ids.coattn).out();
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < m; ++k) tr.coattn.at(j, k) = c.at(j, k);
        }
    }
    if (ids.pooled >= 0) {
        const Tensor& c = tape.node(ids.pooled).out();
        for (std::size_t j = 0; j < n; ++j) tr.pooled[j] = c[j];
    }
    if (ids.beta >= 0) {
        const Tensor& b = tape.node(ids.beta).out();
        for (std::size_t j = 0; j < n; ++j) tr.beta[j] = b[j];
    }

    tr.y_m = g.y_m.value().item();
    if (g.y_s) {
        tr.y_s = g.y_s->value().item();
        tr.y_uis = fuse(tr.y_m, tr.y_s);
        if (mode == Mode::Infer) tr.y_db = infer_debiased(tr.y_m, tr.y_s, cfg);
    } else {
        tr.y_uis = tr.y_m;
        if (mode == Mode::Infer) tr.y_db = tr.y_m;
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Tensor-level entry points for the individual stages.

inline Tensor as_row(Tensor t) {
    t.shape = {1, t.size()};
    return t;
}

inline Tensor stack_rows(std::span<const Tensor> rows, std::size_t width) {
    Tensor out(Shape{rows.size(), width});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != width) {
            throw ShapeError("stack_rows: expected width " + std::to_string(width) + ", got " +
                             shape_str(rows[r].shape));
        }
        std::copy(rows[r].data.begin(), rows[r].data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * width));
    }
    return out;
}

/// Final GRU state for a sequence of item embeddings (each of size d).
inline Tensor encode_current_scenario(const MScanParameters& params, std::span<const Tensor> embeddings) {
    Tape tape;
    std::optional<Var> in;
    if (!embeddings.empty()) {
        in = tape.constant(stack_rows(embeddings, params.gru_w_z.value.shape[0]));
    }
    Tensor h = encode_current_scenario(tape, params, in).final_state.value();
    h.shape = {h.size()};
    return h;
}

struct CoAttentionValues {
    Tensor matrix;  // n x m
    Tensor pooled;  // n
};

inline CoAttentionValues co_attention_scores(const MScanParameters& params, std::span<const Tensor> mixed,
                                             const Tensor& candidate, std::span<const Tensor> current) {
    if (params.attention.empty()) throw PreconditionError("co_attention_scores: model has no attention FFN");
    if (mixed.empty() || current.empty()) throw PreconditionError("co_attention_scores: histories must be non-empty");
    const std::size_t d = params.item_table.value.shape[1];
    Tape tape;
    const AttentionInputLayer first = bind_attention_input(tape, params);
    const Var h = tape.constant(stack_rows(mixed, d));
    const Var i = tape.constant(stack_rows(std::span<const Tensor>(&candidate, 1), d));
    const Var s = tape.constant(stack_rows(current, d));
    const CoAttention ca = co_attention_scores(tape, params, first, h, i, s);
    return {ca.matrix.value(), ca.pooled.value()};
}

struct AttentionValues {
    Tensor weights;    // n
    Tensor aggregate;  // d
};

inline AttentionValues attention_aggregate(const Tensor& pooled, std::span<const Tensor> mixed) {
    if (mixed.empty()) throw PreconditionError("attention_aggregate: no valid history position");
    if (pooled.size() != mixed.size()) throw ShapeError("attention_aggregate: one score per history item expected");
    Tape tape;
    const Var c = tape.constant(Tensor(Shape{pooled.size()}, pooled.data));
    const Var h = tape.constant(stack_rows(mixed, mixed.front().size()));
    const AttentionResult r = attention_aggregate(c, h);
    AttentionValues out{r.weights.value(), r.aggregate.value()};
    out.weights.shape = {out.weights.size()};
    out.aggregate.shape = {out.aggregate.size()};
    return out;
}

/// y_m from the individual feature vectors. `aggregate` is ignored (and may be
/// empty) when the model has no co-attention path.
inline double predict_interest(const MScanParameters& params, const Tensor& user, const Tensor& item,
                               const Tensor& scenario, const Tensor& h_final, const Tensor& aggregate) {
    Tape tape;
    std::vector<Var> parts{tape.constant(as_row(user)), tape.constant(as_row(item)), tape.constant(as_row(scenario)),
                           tape.constant(as_row(h_final))};
    const std::size_t expected = params.interest.weights.front().value.shape[0];
    std::size_t width = user.size() + item.size() + scenario.size() + h_final.size();
    if (width != expected) {
        parts.push_back(tape.constant(as_row(aggregate)));
        width += aggregate.size();
    }
    if (width != expected) {
        throw ShapeError("predict_interest: features have width " + std::to_string(width) + ", expected " +
                         std::to_string(expected));
    }
    return predict_interest(tape, params, ad::concat(parts, 1)).value().item();
}

inline double predict_scenario_bias(const MScanParameters& params, const Tensor& scenario) {
    if (params.scenario.empty()) throw PreconditionError("predict_scenario_bias: model has no scenario FFN");
    Tape tape;
    return predict_scenario_bias(tape, params, tape.constant(as_row(scenario))).value().item();
}

}  // namespace mscan
