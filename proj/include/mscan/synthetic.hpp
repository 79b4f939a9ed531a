// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-scenario click logs drawn from a known causal structure:
// user, item and scenario jointly set the interest M; the scenario also pushes
// the click Y directly through an exposure offset.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "mscan/autodiff.hpp"
#include "mscan/data.hpp"
#include "mscan/error.hpp"
#include "mscan/tensor.hpp"

namespace mscan {

struct SyntheticConfig {
    std::size_t num_users = 5000;
    std::size_t num_items = 2000;
    std::size_t num_scenarios = 3;
    std::size_t latent_dim = 8;
    double bias_strength = 4.0;            // scale of the direct scenario -> click effect
    double scenario_interest_shift = 1.0;  // scale of the scenario -> interest effect
    std::size_t events_per_user = 60;
    std::uint64_t seed = 7;
    double test_fraction = 0.4;

    void validate() const {
        if (num_users == 0 || num_items == 0 || num_scenarios == 0 || latent_dim == 0 || events_per_user == 0) {
            throw PreconditionError("synthetic: all counts must be positive");
        }
        if (!(bias_strength >= 0.0) || !(scenario_interest_shift >= 0.0)) {
            throw PreconditionError("synthetic: bias_strength and scenario_interest_shift must be nonnegative");
        }
    }
};

/// The latent ground truth behind a generated log.
struct SyntheticWorld {
    Tensor user_factors;      // users x latent
    Tensor item_factors;      // items x latent
    Tensor scenario_shifts;   // scenarios x latent
    std::vector<double> exposure_offsets;  // one per scenario, evenly spaced in [-1, 1]

    /// <u + shift * s, i>, the logit of the interest.
    double interest_logit(const SyntheticConfig& cfg, std::size_t user, std::size_t item, std::size_t scenario) const {
        const std::size_t k = cfg.latent_dim;
        double dot = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double u = user_factors.data[user * k + c] + cfg.scenario_interest_shift * scenario_shifts.data[scenario * k + c];
            dot += u * item_factors.data[item * k + c];
        }
        return dot;
    }

    double click_probability(const SyntheticConfig& cfg, std::size_t user, std::size_t item,
                             std::size_t scenario) const {
        return ad::stable_sigmoid(interest_logit(cfg, user, item, scenario) +
                                  cfg.bias_strength * exposure_offsets[scenario]);
    }
};

struct SyntheticData {
    SyntheticConfig config;
    SyntheticWorld world;
    std::vector<InteractionRecord> records;  // user-major generation order
    Dataset dataset;
};

inline std::vector<double> evenly_spaced_offsets(std::size_t scenarios) {
    std::vector<double> out(scenarios, 0.0);
    if (scenarios == 1) return out;
    for (std::size_t s = 0; s < scenarios; ++s) {
        out[s] = -1.0 + 2.0 * static_cast<double>(s) / static_cast<double>(scenarios - 1);
    }
    return out;
}

inline SyntheticData generate_synthetic(const SyntheticConfig& cfg, SequenceCaps caps = {}) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const std::size_t k = cfg.latent_dim;
    // entry variance 1/sqrt(k) keeps Var<u, i> at 1 independent of k
    std::normal_distribution<double> latent(0.0, std::pow(static_cast<double>(k), -0.25));

    SyntheticData out;
    out.config = cfg;
    auto draw = [&](std::size_t rows) {
        Tensor t(Shape{rows, k});
        for (double& v : t.data) v = latent(rng);
        return t;
    };
    out.world.user_factors = draw(cfg.num_users);
    out.world.item_factors = draw(cfg.num_items);
    out.world.scenario_shifts = draw(cfg.num_scenarios);
    out.world.exposure_offsets = evenly_spaced_offsets(cfg.num_scenarios);

    std::uniform_int_distribution<std::size_t> pick_scenario(0, cfg.num_scenarios - 1);
    std::uniform_int_distribution<std::size_t> pick_item(0, cfg.num_items - 1);
    std::uniform_real_distribution<double> coin(0.0, 1.0);

    out.records.reserve(cfg.num_users * cfg.events_per_user);
    for (std::size_t u = 0; u < cfg.num_users; ++u) {
        for (std::size_t e = 0; e < cfg.events_per_user; ++e) {
            const std::size_t s = pick_scenario(rng);
            const std::size_t i = pick_item(rng);
            const double logit_m = out.world.interest_logit(cfg, u, i, s);
            const double m = ad::stable_sigmoid(logit_m);
            const double p = ad::stable_sigmoid(logit_m + cfg.bias_strength * out.world.exposure_offsets[s]);
            if (!std::isfinite(m) || !std::isfinite(p)) throw NonFiniteError("generate_synthetic: non-finite probability");
            InteractionRecord r;
            r.user_id = u;
            r.item_id = i;
            r.scenario_id = s;
            r.timestamp = static_cast<std::int64_t>(e);
            r.click = coin(rng) < p ? 1 : 0;
            r.interest = m;
            out.records.push_back(r);
        }
    }

    auto split = chronological_split(build_sequences(out.records, caps), cfg.test_fraction);
    out.dataset.train = std::move(split.train);
    out.dataset.test = std::move(split.test);
    out.dataset.vocab = {cfg.num_users, cfg.num_items, cfg.num_scenarios};
    return out;
}

}  // namespace mscan
