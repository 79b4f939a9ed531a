// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mscan/model.hpp"
#include "test_util.hpp"

namespace mscan {
namespace {

using testing::random_tensor;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

ModelConfig tiny_config(std::uint64_t seed) {
    ModelConfig c;
    c.embed_dim = 4;
    c.gru_hidden = 3;
    c.attention_layers = {4, 1};
    c.interest_layers = {6, 1};
    c.scenario_layers = {3, 1};
    c.caps = {5, 3};
    c.init_seed = seed;
    c.init_scale = 0.5;
    return c;
}

const VocabSizes kVocab{10, 10, 3};

Example random_example(std::mt19937_64& rng, const ModelConfig& cfg, bool allow_empty = true) {
    std::uniform_int_distribution<std::size_t> user(0, kVocab.users - 1), item(0, kVocab.items - 1),
        scen(0, kVocab.scenarios - 1);
    std::uniform_int_distribution<std::size_t> nh(allow_empty ? 0 : 1, cfg.caps.history);
    std::uniform_int_distribution<std::size_t> ns(allow_empty ? 0 : 1, cfg.caps.current);
    Example e;
    e.user_id = user(rng);
    e.item_id = item(rng);
    e.scenario_id = scen(rng);
    const std::size_t n = nh(rng);
    for (std::size_t k = 0; k < n; ++k) e.sequences.mixed.push_back({item(rng), scen(rng)});
    const std::size_t m = ns(rng);
    for (std::size_t k = 0; k < m; ++k) e.sequences.current.push_back(item(rng));
    return e;
}

std::vector<std::size_t> argsort(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return idx;
}

TEST(Init, DeterministicAndShaped) {
    ModelConfig c = tiny_config(3);
    const MScanModel a = make_model(c, {3, 5, 2});
    const MScanModel b = make_model(c, {3, 5, 2});
    const auto pa = a.params.all();
    const auto pb = b.params.all();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k]->value, pb[k]->value) << pa[k]->name;
    EXPECT_EQ(a.params.user_table.value.shape, (Shape{3, 4}));
    EXPECT_EQ(a.params.item_table.value.shape, (Shape{5, 4}));
    EXPECT_EQ(a.params.scenario_table.value.shape, (Shape{2, 4}));
    EXPECT_EQ(a.params.gru_u_z.value.shape, (Shape{3, 3}));
    EXPECT_EQ(a.params.interest.weights[0].value.shape, (Shape{3 * 4 + 3 + 4, 6}));
    for (const Parameter* p : pa) {
        for (double v : p->value.data) ASSERT_LE(std::abs(v), 0.5);
    }
    for (double v : a.params.gru_b_z.value.data) EXPECT_EQ(v, 0.0);
}

TEST(Init, ZeroScaleGivesZeroWeights) {
    ModelConfig c = tiny_config(1);
    c.init_scale = 0.0;
    const MScanModel m = make_model(c, kVocab);
    for (const Parameter* p : m.params.all()) {
        for (double v : p->value.data) ASSERT_EQ(v, 0.0) << p->name;
    }
}

TEST(Init, InvalidConfigRejected) {
    ModelConfig c = tiny_config(1);
    c.interest_layers = {4, 2};
    EXPECT_THROW(make_model(c, kVocab), ConfigError);
    c = tiny_config(1);
    c.embed_dim = 0;
    EXPECT_THROW(make_model(c, kVocab), ConfigError);
}

TEST(Gru, EmptyHistoryIsZero) {
    const MScanModel m = make_model(tiny_config(1), kVocab);
    EXPECT_EQ(encode_current_scenario(m.params, {}), Tensor(Shape{3}));
}

TEST(Gru, ZeroWeightsKeepZeroState) {
    ModelConfig c = tiny_config(1);
    c.init_scale = 0.0;
    const MScanModel m = make_model(c, kVocab);
    std::mt19937_64 rng(1);
    std::vector<Tensor> xs;
    for (int k = 0; k < 4; ++k) xs.push_back(random_tensor(rng, {4}));
    EXPECT_EQ(encode_current_scenario(m.params, xs), Tensor(Shape{3}));
}

// d = 1, hidden = 1, two steps evaluated with the scalar recurrence.
TEST(Gru, ScalarRecurrenceByHand) {
    ModelConfig c = tiny_config(1);
    c.embed_dim = 1;
    c.gru_hidden = 1;
    MScanModel m = make_model(c, {1, 1, 1});
    auto set = [](Parameter& p, double v) { p.value.data = {v}; };
    const double wz = 0.5, wr = -0.8, wh = 2.0, uz = 0.3, ur = 1.1, uh = -0.6, bz = 0.1, br = 0.2, bh = -0.3;
    set(m.params.gru_w_z, wz);
    set(m.params.gru_w_r, wr);
    set(m.params.gru_w_h, wh);
    set(m.params.gru_u_z, uz);
    set(m.params.gru_u_r, ur);
    set(m.params.gru_u_h, uh);
    set(m.params.gru_b_z, bz);
    set(m.params.gru_b_r, br);
    set(m.params.gru_b_h, bh);
    const double x1 = 0.7, x2 = -0.4;

    // k = 1 from h0 = 0: z = s(0.45), candidate = tanh(1.1)
    const double h1 = logistic(0.45) * std::tanh(1.1);
    EXPECT_NEAR(encode_current_scenario(m.params, std::vector{Tensor::vector({x1})})[0], h1, 1e-15);

    const double z2 = logistic(wz * x2 + uz * h1 + bz);
    const double r2 = logistic(wr * x2 + ur * h1 + br);
    const double h2 = (1 - z2) * h1 + z2 * std::tanh(wh * x2 + uh * (r2 * h1) + bh);
    EXPECT_NEAR(encode_current_scenario(m.params, std::vector{Tensor::vector({x1}), Tensor::vector({x2})})[0], h2,
                1e-15);
}

TEST(Gru, InputWidthMismatch) {
    const MScanModel m = make_model(tiny_config(1), kVocab);
    EXPECT_THROW(encode_current_scenario(m.params, std::vector{Tensor(Shape{5})}), ShapeError);
}

TEST(CoAttention, SingleCurrentItemPoolsItsColumn) {
    const MScanModel m = make_model(tiny_config(2), kVocab);
    std::mt19937_64 rng(2);
    std::vector<Tensor> mixed{random_tensor(rng, {4}), random_tensor(rng, {4}), random_tensor(rng, {4})};
    const auto r = co_attention_scores(m.params, mixed, random_tensor(rng, {4}), std::vector{random_tensor(rng, {4})});
    ASSERT_EQ(r.matrix.shape, (Shape{3, 1}));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.pooled[j], r.matrix.at(j, 0));
}

TEST(CoAttention, ZeroNetworkScoresZero) {
    ModelConfig c = tiny_config(2);
    MScanModel m = make_model(c, kVocab);
    for (auto& w : m.params.attention.weights) w.value.data.assign(w.value.size(), 0.0);
    std::mt19937_64 rng(3);
    std::vector<Tensor> mixed{random_tensor(rng, {4}), random_tensor(rng, {4})};
    const auto r = co_attention_scores(m.params, mixed, random_tensor(rng, {4}),
                                       std::vector{random_tensor(rng, {4}), random_tensor(rng, {4})});
    for (double v : r.matrix.data) EXPECT_EQ(v, 0.0);
    for (double v : r.pooled.data) EXPECT_EQ(v, 0.0);
}

// One linear layer: C_jk = w_h . h_j + w_i . i + w_s . s_k + b.
TEST(CoAttention, LinearScoreByHand) {
    ModelConfig c = tiny_config(2);
    c.embed_dim = 2;
    c.attention_layers = {1};
    MScanModel m = make_model(c, kVocab);
    m.params.attention.weights[0].value.data = {1.0, -2.0, 0.5, 0.5, 3.0, 1.0};
    m.params.attention.biases[0].value.data = {0.25};
    const std::vector mixed{Tensor::vector({1.0, 0.0}), Tensor::vector({0.0, 1.0})};
    const Tensor cand = Tensor::vector({2.0, -2.0});
    const std::vector current{Tensor::vector({0.0, 1.0}), Tensor::vector({1.0, 0.0})};
    const auto r = co_attention_scores(m.params, mixed, cand, current);
    // w_i . i + b = 1 - 1 + 0.25
    EXPECT_DOUBLE_EQ(r.matrix.at(0, 0), 1.0 + 1.0 + 0.25);
    EXPECT_DOUBLE_EQ(r.matrix.at(0, 1), 1.0 + 3.0 + 0.25);
    EXPECT_DOUBLE_EQ(r.matrix.at(1, 0), -2.0 + 1.0 + 0.25);
    EXPECT_DOUBLE_EQ(r.pooled[1], -2.0 + 3.0 + 0.25);
}

TEST(CoAttention, NeedsAttentionAndHistories) {
    ModelConfig c = tiny_config(2);
    c.co_attention = false;
    const MScanModel m = make_model(c, kVocab);
    EXPECT_THROW(co_attention_scores(m.params, std::vector{Tensor(Shape{4})}, Tensor(Shape{4}), std::vector{Tensor(Shape{4})}),
                 PreconditionError);
    const MScanModel full = make_model(tiny_config(2), kVocab);
    EXPECT_THROW(co_attention_scores(full.params, {}, Tensor(Shape{4}), std::vector{Tensor(Shape{4})}), PreconditionError);
}

TEST(Aggregate, UniformScoresAverage) {
    const std::vector mixed{Tensor::vector({1, 2}), Tensor::vector({3, 4}), Tensor::vector({5, 6}),
                            Tensor::vector({7, 8})};
    const auto r = attention_aggregate(Tensor::vector({0.3, 0.3, 0.3, 0.3}), mixed);
    for (double b : r.weights.data) EXPECT_DOUBLE_EQ(b, 0.25);
    EXPECT_NEAR(r.aggregate[0], 4.0, 1e-15);
    EXPECT_NEAR(r.aggregate[1], 5.0, 1e-15);
}

TEST(Aggregate, AnalyticSoftmaxAndSingleton) {
    const std::vector mixed{Tensor::vector({1, 0}), Tensor::vector({0, 1})};
    const auto r = attention_aggregate(Tensor::vector({0.0, std::log(3.0)}), mixed);
    EXPECT_NEAR(r.weights[0], 0.25, 1e-15);
    EXPECT_NEAR(r.weights[1], 0.75, 1e-15);
    const auto one = attention_aggregate(Tensor::vector({-4.0}), std::vector{Tensor::vector({2, 3})});
    EXPECT_EQ(one.weights, Tensor::vector({1.0}));
    EXPECT_EQ(one.aggregate, Tensor::vector({2, 3}));
    EXPECT_THROW(attention_aggregate(Tensor(Shape{0}), {}), PreconditionError);
}

TEST(Heads, ZeroNetworksGiveZero) {
    ModelConfig c = tiny_config(1);
    c.init_scale = 0.0;
    const MScanModel m = make_model(c, kVocab);
    std::mt19937_64 rng(4);
    EXPECT_EQ(predict_interest(m.params, random_tensor(rng, {4}), random_tensor(rng, {4}), random_tensor(rng, {4}),
                               random_tensor(rng, {3}), random_tensor(rng, {4})),
              0.0);
    EXPECT_EQ(predict_scenario_bias(m.params, random_tensor(rng, {4})), 0.0);
}

TEST(Heads, OneLayerAffineByHand) {
    ModelConfig c = tiny_config(1);
    c.embed_dim = 1;
    c.gru_hidden = 1;
    c.interest_layers = {1};
    c.scenario_layers = {1};
    MScanModel m = make_model(c, {1, 1, 1});
    m.params.interest.weights[0].value.data = {1.0, 2.0, -1.0, 0.5, 4.0};  // u i s h R_h
    m.params.interest.biases[0].value.data = {0.1};
    m.params.scenario.weights[0].value.data = {-3.0};
    m.params.scenario.biases[0].value.data = {0.2};
    const double y = predict_interest(m.params, Tensor::vector({1.0}), Tensor::vector({2.0}), Tensor::vector({3.0}),
                                      Tensor::vector({4.0}), Tensor::vector({0.5}));
    EXPECT_DOUBLE_EQ(y, 1.0 + 4.0 - 3.0 + 2.0 + 2.0 + 0.1);
    EXPECT_DOUBLE_EQ(predict_scenario_bias(m.params, Tensor::vector({0.5})), -1.5 + 0.2);
    EXPECT_THROW(predict_interest(m.params, Tensor::vector({1.0}), Tensor::vector({2.0}), Tensor::vector({3.0}),
                                  Tensor::vector({4.0}), Tensor::vector({0.5, 1.0})),
                 ShapeError);
}

TEST(Fuse, Examples) {
    EXPECT_EQ(fuse(0.0, 0.0), 0.0);
    EXPECT_EQ(fuse(2.0, 0.0), 1.0);
    // 1.5 / (1 + e^-1) with e^-1 = 0.36787944117144233
    EXPECT_NEAR(fuse(1.5, 1.0), 1.5 / 1.36787944117144233, 1e-15);
    EXPECT_NEAR(fuse(1.5, 1.0), 1.0966, 5e-5);
}

TEST(Debias, Examples) {
    for (double ys : {-3.0, 0.0, 2.5}) EXPECT_EQ(infer_debiased(0.7, ys, {0.7}), 0.0);
    for (double ym : {-1.0, 0.3, 4.0}) EXPECT_EQ(infer_debiased(ym, 1.2, {0.0}), fuse(ym, 1.2));
    // 0.5 / (1 + e^-2) with e^-2 = 0.1353352832366127
    EXPECT_NEAR(infer_debiased(1.0, 2.0, {0.5}), 0.5 / 1.1353352832366127, 1e-15);
    EXPECT_NEAR(infer_debiased(1.0, 2.0, {0.5}), 0.4404, 5e-5);
}

TEST(FuseProperty, Monotonicity) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int k = 0; k < 1000; ++k) {
        const double ym = u(rng), ys = u(rng), step = 0.01 + std::abs(u(rng));
        EXPECT_LT(fuse(ym, ys), fuse(ym + step, ys));
        if (ym > 0) {
            EXPECT_LT(fuse(ym, ys), fuse(ym, ys + step));
        } else if (ym < 0) {
            EXPECT_GT(fuse(ym, ys), fuse(ym, ys + step));
        }
    }
}

TEST(Forward, BatchShapesAndNormalization) {
    ModelConfig c = tiny_config(9);
    c.embed_dim = 8;
    const MScanModel m = make_model(c, kVocab);
    std::mt19937_64 rng(9);
    std::vector<Example> batch{random_example(rng, c, false), random_example(rng, c, false)};
    const Predictions p = predict(m, batch, {});
    EXPECT_EQ(p.y_m.size(), 2u);
    EXPECT_EQ(p.y_s.size(), 2u);
    EXPECT_EQ(p.y_uis.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        const ForwardTrace t = forward(m, batch[k], Mode::Train);
        double sum = 0.0;
        for (double b : t.beta.data) sum += b;
        EXPECT_NEAR(sum, 1.0, 1e-9);
        EXPECT_EQ(t.y_m, p.y_m[k]);  // same value alone or in a batch
        EXPECT_FALSE(t.y_db.has_value());
    }
}

TEST(Forward, InferWithZeroCEqualsFused) {
    const MScanModel m = make_model(tiny_config(4), kVocab);
    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
        const ForwardTrace t = forward(m, random_example(rng, m.config), Mode::Infer, {0.0});
        ASSERT_TRUE(t.y_db.has_value());
        EXPECT_EQ(*t.y_db, t.y_uis);
    }
}

TEST(Forward, ZeroModelScoresZero) {
    ModelConfig c = tiny_config(4);
    c.init_scale = 0.0;
    const MScanModel m = make_model(c, kVocab);
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) EXPECT_EQ(forward(m, random_example(rng, c), Mode::Train).y_uis, 0.0);
}

TEST(Forward, EmptyHistoriesDegradeGracefully) {
    const MScanModel m = make_model(tiny_config(4), kVocab);
    Example cold;
    cold.user_id = 1;
    cold.item_id = 2;
    cold.scenario_id = 0;
    const ForwardTrace t = forward(m, cold, Mode::Train);
    EXPECT_EQ(t.h_final, Tensor(Shape{3}));
    EXPECT_EQ(t.aggregate, Tensor(Shape{4}));
    EXPECT_EQ(t.beta, Tensor(Shape{5}));
    EXPECT_TRUE(std::isfinite(t.y_m));

    Example no_current = cold;
    no_current.sequences.mixed = {{1, 1}, {2, 2}, {3, 1}, {4, 0}};
    const ForwardTrace u = forward(m, no_current, Mode::Train);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(u.beta[j], 0.25);
    EXPECT_EQ(u.beta[4], 0.0);
}

TEST(Forward, OutOfVocabularyIsIndexError) {
    const MScanModel m = make_model(tiny_config(4), kVocab);
    Example e;
    e.item_id = 10;
    EXPECT_THROW(forward(m, e, Mode::Train), IndexError);
}

TEST(Forward, TraceMatchesStageFunctions) {
    const MScanModel m = make_model(tiny_config(12), kVocab);
    std::mt19937_64 rng(12);
    const Example e = random_example(rng, m.config, false);
    const ForwardTrace t = forward(m, e, Mode::Infer, {0.5});
    auto row = [&](const Parameter& table, std::size_t id) {
        const std::size_t d = table.value.shape[1];
        return Tensor(Shape{d}, std::vector<double>(table.value.data.begin() + id * d,
                                                    table.value.data.begin() + (id + 1) * d));
    };
    std::vector<Tensor> current, mixed;
    for (std::size_t id : e.sequences.current) current.push_back(row(m.params.item_table, id));
    for (const auto& h : e.sequences.mixed) mixed.push_back(row(m.params.item_table, h.item_id));
    const Tensor h = encode_current_scenario(m.params, current);
    EXPECT_EQ(t.h_final, h);
    const auto ca = co_attention_scores(m.params, mixed, t.item, current);
    const auto agg = attention_aggregate(ca.pooled, mixed);
    for (std::size_t j = 0; j < mixed.size(); ++j) EXPECT_NEAR(t.beta[j], agg.weights[j], 1e-15);
    EXPECT_NEAR(t.y_m, predict_interest(m.params, t.user, t.item, t.scenario, h, agg.aggregate), 1e-12);
    EXPECT_EQ(t.y_s, predict_scenario_bias(m.params, t.scenario));
    EXPECT_EQ(*t.y_db, infer_debiased(t.y_m, t.y_s, {0.5}));
}

TEST(Ablation, StructureOfReducedModels) {
    ModelConfig c = tiny_config(1);
    c.co_attention = false;
    c.bias_branch = false;
    const MScanModel m = make_model(c, kVocab);
    EXPECT_TRUE(m.params.attention.empty());
    EXPECT_TRUE(m.params.scenario.empty());
    for (const Parameter* p : m.params.all()) {
        EXPECT_EQ(p->name.rfind("attention", 0), std::string::npos);
        EXPECT_EQ(p->name.rfind("scenario.", 0), std::string::npos);
    }
    EXPECT_EQ(m.params.interest.weights[0].value.shape[0], 3u * 4u + 3u);
    std::mt19937_64 rng(1);
    const std::vector<Example> ex{random_example(rng, c), random_example(rng, c)};
    const Predictions p = predict(m, ex, {0.5});
    EXPECT_TRUE(p.y_s.empty());
    EXPECT_EQ(p.y_db, p.y_m);
    EXPECT_EQ(p.y_uis, p.y_m);
}

TEST(AttentionProperty, NormalizedMaskedAndPermutationInvariant) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const MScanModel m = make_model(tiny_config(100 + trial), kVocab);
        Example e = random_example(rng, m.config, false);
        const ForwardTrace t = forward(m, e, Mode::Train);
        double sum = 0.0;
        for (std::size_t j = 0; j < t.mixed_length; ++j) {
            EXPECT_GE(t.beta[j], 0.0);
            sum += t.beta[j];
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
        for (std::size_t j = t.mixed_length; j < m.config.caps.history; ++j) EXPECT_EQ(t.beta[j], 0.0);

        std::shuffle(e.sequences.current.begin(), e.sequences.current.end(), rng);
        EXPECT_EQ(forward(m, e, Mode::Train).beta, t.beta);
    }
}

TEST(RankProperty, WithinScenarioOrderUnchangedByDebiasing) {
    std::mt19937_64 rng(31);
    for (int model = 0; model < 20; ++model) {
        const MScanModel m = make_model(tiny_config(200 + model), kVocab);
        std::vector<Example> ex;
        for (int k = 0; k < 60; ++k) ex.push_back(random_example(rng, m.config));
        for (double c : {0.0, 0.5, 2.0}) {
            const Predictions p = predict(m, ex, {c});
            for (std::size_t s = 0; s < kVocab.scenarios; ++s) {
                std::vector<double> ym, ydb, yuis;
                for (std::size_t k = 0; k < ex.size(); ++k) {
                    if (ex[k].scenario_id != s) continue;
                    ym.push_back(p.y_m[k]);
                    ydb.push_back(p.y_db[k]);
                    yuis.push_back(p.y_uis[k]);
                }
                EXPECT_EQ(argsort(ydb), argsort(ym));
                EXPECT_EQ(argsort(yuis), argsort(ym));
            }
        }
    }
}

TEST(RankProperty, ConstantBiasKeepsGlobalOrder) {
    MScanModel m = make_model(tiny_config(5), kVocab);
    Ffn& f = m.params.scenario;
    f.weights.back().value.data.assign(f.weights.back().value.size(), 0.0);
    f.biases.back().value.data = {0.8};
    std::mt19937_64 rng(5);
    std::vector<Example> ex;
    for (int k = 0; k < 80; ++k) ex.push_back(random_example(rng, m.config));
    const Predictions p = predict(m, ex, {1.0});
    EXPECT_EQ(argsort(p.y_db), argsort(p.y_m));
    EXPECT_EQ(argsort(p.y_uis), argsort(p.y_m));
    for (std::size_t k = 1; k < ex.size(); ++k) EXPECT_EQ(p.y_s[k], p.y_s[0]);
}

TEST(Purity, ScenarioBiasDependsOnScenarioOnly) {
    const MScanModel m = make_model(tiny_config(8), kVocab);
    std::mt19937_64 rng(8);
    Example a = random_example(rng, m.config), b = random_example(rng, m.config);
    b.scenario_id = a.scenario_id;
    EXPECT_EQ(forward(m, a, Mode::Train).y_s, forward(m, b, Mode::Train).y_s);
    const ForwardTrace t1 = forward(m, a, Mode::Infer, {0.3});
    const ForwardTrace t2 = forward(m, a, Mode::Infer, {0.3});
    EXPECT_EQ(t1.y_m, t2.y_m);
    EXPECT_EQ(t1.beta, t2.beta);
    EXPECT_EQ(*t1.y_db, *t2.y_db);
}

}  // namespace
}  // namespace mscan
