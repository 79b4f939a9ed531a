// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSON checkpoints: model config, vocabulary sizes and every named parameter.
// Doubles are written in shortest round-trip form, so save -> load -> save is
// byte-stable.

#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mscan/error.hpp"
#include "mscan/model.hpp"
#include "mscan/training.hpp"

namespace mscan {

inline constexpr const char* kCheckpointFormat = "mscan-checkpoint/1";

inline nlohmann::json to_json(const ModelConfig& c) {
    return {
        {"embed_dim", c.embed_dim},
        {"gru_hidden", c.gru_hidden},
        {"attention_layers", c.attention_layers},
        {"interest_layers", c.interest_layers},
        {"scenario_layers", c.scenario_layers},
        {"history_cap", c.caps.history},
        {"current_cap", c.caps.current},
        {"init_seed", c.init_seed},
        {"init_scale", c.init_scale},
        {"saca", c.co_attention},
        {"sbe", c.bias_branch},
    };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    j.at("embed_dim").get_to(c.embed_dim);
    j.at("gru_hidden").get_to(c.gru_hidden);
    j.at("attention_layers").get_to(c.attention_layers);
    j.at("interest_layers").get_to(c.interest_layers);
    j.at("scenario_layers").get_to(c.scenario_layers);
    j.at("history_cap").get_to(c.caps.history);
    j.at("current_cap").get_to(c.caps.current);
    j.at("init_seed").get_to(c.init_seed);
    j.at("init_scale").get_to(c.init_scale);
    j.at("saca").get_to(c.co_attention);
    j.at("sbe").get_to(c.bias_branch);
    return c;
}

inline nlohmann::json checkpoint_json(const MScanModel& model) {
    nlohmann::json params = nlohmann::json::array();
    for (const Parameter* p : model.params.all()) {
        params.push_back({{"name", p->name}, {"shape", p->value.shape}, {"values", p->value.data}});
    }
    return {
        {"format", kCheckpointFormat},
        {"model", to_json(model.config)},
        {"vocab", {{"users", model.vocab.users}, {"items", model.vocab.items}, {"scenarios", model.vocab.scenarios}}},
        {"checksum", parameter_checksum(model)},
        {"parameters", std::move(params)},
    };
}

inline std::string checkpoint_string(const MScanModel& model) { return checkpoint_json(model).dump() + "\n"; }

/// Rebuilds a model from its checkpoint document. Parameter names, shapes and
/// the stored checksum must all agree with the recorded config.
inline MScanModel model_from_checkpoint(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) throw ParseError("checkpoint: unknown format");
        const ModelConfig cfg = model_config_from_json(j.at("model"));
        const auto& v = j.at("vocab");
        const VocabSizes vocab{v.at("users").get<std::size_t>(), v.at("items").get<std::size_t>(),
                               v.at("scenarios").get<std::size_t>()};
        MScanModel model = make_model(cfg, vocab);

        std::map<std::string, const nlohmann::json*> stored;
        for (const auto& p : j.at("parameters")) stored[p.at("name").get<std::string>()] = &p;
        const auto params = model.params.all();
        if (stored.size() != params.size()) throw ParseError("checkpoint: parameter count does not match the model config");
        for (Parameter* p : params) {
            auto it = stored.find(p->name);
            if (it == stored.end()) throw ParseError("checkpoint: missing parameter " + p->name);
            const auto shape = it->second->at("shape").get<Shape>();
            if (shape != p->value.shape) {
                throw ParseError("checkpoint: parameter " + p->name + " has shape " + shape_str(shape) + ", expected " +
                                 shape_str(p->value.shape));
            }
            auto values = it->second->at("values").get<std::vector<double>>();
            if (values.size() != p->value.size()) throw ParseError("checkpoint: parameter " + p->name + " has wrong size");
            p->value.data = std::move(values);
        }
        if (parameter_checksum(model) != j.at("checksum").get<std::string>()) {
            throw ParseError("checkpoint: checksum mismatch");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
}

inline MScanModel model_from_checkpoint_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    return model_from_checkpoint(j);
}

inline void save_checkpoint(const MScanModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << checkpoint_string(model);
    if (!out) throw Error("write failed: " + path);
}

inline MScanModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("checkpoint not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_checkpoint_string(ss.str());
}

}  // namespace mscan
