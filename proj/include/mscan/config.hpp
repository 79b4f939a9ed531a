// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: INI file + key=value overrides, resolved against
// defaults and echoed back as a complete INI document.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mscan/baselines.hpp"
#include "mscan/error.hpp"
#include "mscan/evaluation.hpp"
#include "mscan/experiments.hpp"
#include "mscan/model.hpp"
#include "mscan/synthetic.hpp"
#include "mscan/training.hpp"

namespace mscan {

enum class DataSource { Synthetic, Csv };

struct GradCheckConfig {
    std::size_t embed_dim = 4;
    std::size_t gru_hidden = 4;
    std::size_t history_cap = 5;
    std::size_t current_cap = 3;
    std::size_t users = 10;
    std::size_t items = 10;
    std::size_t scenarios = 3;
    std::size_t batch = 4;
    double epsilon = 1e-5;
    double tolerance = 1e-4;
    double alpha = 0.5;
    double init_scale = 0.5;
};

struct RunConfig {
    SyntheticConfig synthetic;
    DataSource source = DataSource::Synthetic;
    bool keep_multi_scenario_users = true;
    ModelConfig model;
    TrainConfig train;
    InferenceConfig infer;
    HeadlineMetric metric = HeadlineMetric::Auto;
    std::string eval_baseline = "none";  // none | single | mix | finetune
    SweepParam sweep_param = SweepParam::C;
    std::vector<double> c_grid{0.0, 0.1, 0.25, 0.5, 1.0, 2.0};
    std::vector<double> alpha_grid{0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0};
    BaselineKind baseline_kind = BaselineKind::Mix;
    std::int64_t baseline_target = -1;  // -1: every scenario
    BaselineConfig baseline;
    GradCheckConfig gradcheck;
    std::string dataset_path;     // io.dataset; empty: the gen-data run of this config
    std::string checkpoint_path;  // io.checkpoint; empty: the train run of this config
    std::vector<std::uint64_t> seeds{1};

    ExperimentConfig experiment() const { return {model, train, infer, metric}; }
};

namespace detail {

inline std::string format_value(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string format_value(bool v) { return v ? "true" : "false"; }
inline std::string format_value(const std::string& v) { return v; }

template <typename T>
std::string format_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) out += ",";
        if constexpr (std::is_floating_point_v<T>) {
            out += format_value(static_cast<double>(v[k]));
        } else {
            out += std::to_string(v[k]);
        }
    }
    return out;
}

[[noreturn]] inline void type_error(const std::string& key, const std::string& value, const std::string& expected) {
    throw ConfigError("key " + key + ": expected " + expected + ", got '" + value + "'");
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) type_error(key, v, "unsigned integer");
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        type_error(key, v, "unsigned integer");
    }
}

inline std::int64_t parse_signed(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    try {
        const long long x = std::stoll(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    type_error(key, v, "integer");
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    try {
        const double x = std::stod(v, &used);
        if (used == v.size() && std::isfinite(x)) return x;
    } catch (const std::exception&) {
    }
    type_error(key, v, "real number");
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    type_error(key, v, "boolean");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F item) {
    std::vector<T> out;
    if (v.empty()) return out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto b = part.find_first_not_of(" \t");
        const auto e = part.find_last_not_of(" \t");
        out.push_back(item(key, b == std::string::npos ? std::string() : part.substr(b, e - b + 1)));
    }
    return out;
}

template <typename E>
E parse_enum(const std::string& key, const std::string& v, const std::vector<std::pair<std::string, E>>& options) {
    std::string expected;
    for (const auto& [name, value] : options) {
        if (name == v) return value;
        expected += (expected.empty() ? "" : "|") + name;
    }
    type_error(key, v, "one of " + expected);
}

template <typename E>
std::string enum_name(E v, const std::vector<std::pair<std::string, E>>& options) {
    for (const auto& [name, value] : options) {
        if (value == v) return name;
    }
    return "?";
}

struct Key {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename Field>
Key size_key(const std::string& name, Field field) {
    return {[=](RunConfig& c, const std::string& v) { field(c) = static_cast<std::size_t>(parse_unsigned(name, v)); },
            [=](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Key u64_key(const std::string& name, Field field) {
    return {[=](RunConfig& c, const std::string& v) { field(c) = parse_unsigned(name, v); },
            [=](const RunConfig& c) { return std::to_string(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Key double_key(const std::string& name, Field field) {
    return {[=](RunConfig& c, const std::string& v) { field(c) = parse_double(name, v); },
            [=](const RunConfig& c) { return format_value(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Key bool_key(const std::string& name, Field field) {
    return {[=](RunConfig& c, const std::string& v) { field(c) = parse_bool(name, v); },
            [=](const RunConfig& c) { return format_value(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Key string_key(Field field) {
    return {[=](RunConfig& c, const std::string& v) { field(c) = v; },
            [=](const RunConfig& c) { return field(const_cast<RunConfig&>(c)); }};
}

template <typename Field>
Key sizes_key(const std::string& name, Field field) {
    return {[=](RunConfig& c, const std::string& v) {
                field(c) = parse_list<std::size_t>(name, v, [](const std::string& k, const std::string& x) {
                    return static_cast<std::size_t>(parse_unsigned(k, x));
                });
            },
            [=](const RunConfig& c) { return format_list(field(const_cast<RunConfig&>(c))); }};
}

template <typename Field>
Key doubles_key(const std::string& name, Field field) {
    return {[=](RunConfig& c, const std::string& v) { field(c) = parse_list<double>(name, v, parse_double); },
            [=](const RunConfig& c) { return format_list(field(const_cast<RunConfig&>(c))); }};
}

template <typename E, typename Field>
Key enum_key(const std::string& name, std::vector<std::pair<std::string, E>> options, Field field) {
    return {[=](RunConfig& c, const std::string& v) { field(c) = parse_enum(name, v, options); },
            [=](const RunConfig& c) { return enum_name(field(const_cast<RunConfig&>(c)), options); }};
}

#define MSCAN_FIELD(expr) [](RunConfig& c) -> auto& { return expr; }

inline const std::map<std::string, Key>& config_keys() {
    static const std::map<std::string, Key> keys = [] {
        std::map<std::string, Key> k;
        k["synthetic.num_users"] = size_key("synthetic.num_users", MSCAN_FIELD(c.synthetic.num_users));
        k["synthetic.num_items"] = size_key("synthetic.num_items", MSCAN_FIELD(c.synthetic.num_items));
        k["synthetic.num_scenarios"] = size_key("synthetic.num_scenarios", MSCAN_FIELD(c.synthetic.num_scenarios));
        k["synthetic.latent_dim"] = size_key("synthetic.latent_dim", MSCAN_FIELD(c.synthetic.latent_dim));
        k["synthetic.bias_strength"] = double_key("synthetic.bias_strength", MSCAN_FIELD(c.synthetic.bias_strength));
        k["synthetic.scenario_interest_shift"] =
            double_key("synthetic.scenario_interest_shift", MSCAN_FIELD(c.synthetic.scenario_interest_shift));
        k["synthetic.events_per_user"] = size_key("synthetic.events_per_user", MSCAN_FIELD(c.synthetic.events_per_user));
        k["synthetic.seed"] = u64_key("synthetic.seed", MSCAN_FIELD(c.synthetic.seed));

        k["data.source"] = enum_key<DataSource>(
            "data.source", {{"synthetic", DataSource::Synthetic}, {"csv", DataSource::Csv}}, MSCAN_FIELD(c.source));
        k["data.test_fraction"] = double_key("data.test_fraction", MSCAN_FIELD(c.synthetic.test_fraction));
        k["data.keep_multi_scenario_users"] =
            bool_key("data.keep_multi_scenario_users", MSCAN_FIELD(c.keep_multi_scenario_users));

        k["model.embed_dim"] = size_key("model.embed_dim", MSCAN_FIELD(c.model.embed_dim));
        k["model.gru_hidden"] = size_key("model.gru_hidden", MSCAN_FIELD(c.model.gru_hidden));
        k["model.attention_layers"] = sizes_key("model.attention_layers", MSCAN_FIELD(c.model.attention_layers));
        k["model.interest_layers"] = sizes_key("model.interest_layers", MSCAN_FIELD(c.model.interest_layers));
        k["model.scenario_layers"] = sizes_key("model.scenario_layers", MSCAN_FIELD(c.model.scenario_layers));
        k["model.history_cap"] = size_key("model.history_cap", MSCAN_FIELD(c.model.caps.history));
        k["model.current_cap"] = size_key("model.current_cap", MSCAN_FIELD(c.model.caps.current));
        k["model.init_scale"] = double_key("model.init_scale", MSCAN_FIELD(c.model.init_scale));
        k["model.saca"] = bool_key("model.saca", MSCAN_FIELD(c.model.co_attention));
        k["model.sbe"] = bool_key("model.sbe", MSCAN_FIELD(c.model.bias_branch));

        k["train.learning_rate"] = double_key("train.learning_rate", MSCAN_FIELD(c.train.learning_rate));
        k["train.batch_size"] = size_key("train.batch_size", MSCAN_FIELD(c.train.batch_size));
        k["train.epochs"] = size_key("train.epochs", MSCAN_FIELD(c.train.epochs));
        k["train.alpha"] = double_key("train.alpha", MSCAN_FIELD(c.train.alpha));
        k["train.optimizer"] = enum_key<OptimizerKind>(
            "train.optimizer", {{"sgd", OptimizerKind::Sgd}, {"adam", OptimizerKind::Adam}}, MSCAN_FIELD(c.train.optimizer));
        k["train.beta1"] = double_key("train.beta1", MSCAN_FIELD(c.train.beta1));
        k["train.beta2"] = double_key("train.beta2", MSCAN_FIELD(c.train.beta2));
        k["train.epsilon"] = double_key("train.epsilon", MSCAN_FIELD(c.train.epsilon));
        k["train.clip_norm"] = double_key("train.clip_norm", MSCAN_FIELD(c.train.clip_norm));
        k["train.ys_label"] = enum_key<ScenarioLabel>(
            "train.ys_label", {{"click", ScenarioLabel::Click}, {"scenario_ctr", ScenarioLabel::ScenarioCtr}},
            MSCAN_FIELD(c.train.ys_label));

        k["infer.c"] = double_key("infer.c", MSCAN_FIELD(c.infer.c));

        k["eval.metric"] = enum_key<HeadlineMetric>(
            "eval.metric",
            {{"auto", HeadlineMetric::Auto}, {"click", HeadlineMetric::Click}, {"interest", HeadlineMetric::Interest}},
            MSCAN_FIELD(c.metric));
        k["eval.baseline"] = {[](RunConfig& c, const std::string& v) {
                                  if (v != "none" && v != "single" && v != "mix" && v != "finetune") {
                                      type_error("eval.baseline", v, "one of none|single|mix|finetune");
                                  }
                                  c.eval_baseline = v;
                              },
                              [](const RunConfig& c) { return c.eval_baseline; }};

        k["sweep.param"] = enum_key<SweepParam>("sweep.param", {{"c", SweepParam::C}, {"alpha", SweepParam::Alpha}},
                                                MSCAN_FIELD(c.sweep_param));
        k["sweep.c_grid"] = doubles_key("sweep.c_grid", MSCAN_FIELD(c.c_grid));
        k["sweep.alpha_grid"] = doubles_key("sweep.alpha_grid", MSCAN_FIELD(c.alpha_grid));

        k["baseline.kind"] = enum_key<BaselineKind>(
            "baseline.kind",
            {{"single", BaselineKind::Single}, {"mix", BaselineKind::Mix}, {"finetune", BaselineKind::Finetune}},
            MSCAN_FIELD(c.baseline_kind));
        k["baseline.target"] = {[](RunConfig& c, const std::string& v) {
                                    c.baseline_target = parse_signed("baseline.target", v);
                                },
                                [](const RunConfig& c) { return std::to_string(c.baseline_target); }};
        k["baseline.embed_dim"] = size_key("baseline.embed_dim", MSCAN_FIELD(c.baseline.embed_dim));
        k["baseline.layers"] = sizes_key("baseline.layers", MSCAN_FIELD(c.baseline.layers));
        k["baseline.init_scale"] = double_key("baseline.init_scale", MSCAN_FIELD(c.baseline.init_scale));
        k["baseline.finetune_epochs"] = size_key("baseline.finetune_epochs", MSCAN_FIELD(c.baseline.finetune_epochs));
        k["baseline.finetune_lr_scale"] =
            double_key("baseline.finetune_lr_scale", MSCAN_FIELD(c.baseline.finetune_lr_scale));

        k["gradcheck.embed_dim"] = size_key("gradcheck.embed_dim", MSCAN_FIELD(c.gradcheck.embed_dim));
        k["gradcheck.gru_hidden"] = size_key("gradcheck.gru_hidden", MSCAN_FIELD(c.gradcheck.gru_hidden));
        k["gradcheck.history_cap"] = size_key("gradcheck.history_cap", MSCAN_FIELD(c.gradcheck.history_cap));
        k["gradcheck.current_cap"] = size_key("gradcheck.current_cap", MSCAN_FIELD(c.gradcheck.current_cap));
        k["gradcheck.users"] = size_key("gradcheck.users", MSCAN_FIELD(c.gradcheck.users));
        k["gradcheck.items"] = size_key("gradcheck.items", MSCAN_FIELD(c.gradcheck.items));
        k["gradcheck.scenarios"] = size_key("gradcheck.scenarios", MSCAN_FIELD(c.gradcheck.scenarios));
        k["gradcheck.batch"] = size_key("gradcheck.batch", MSCAN_FIELD(c.gradcheck.batch));
        k["gradcheck.epsilon"] = double_key("gradcheck.epsilon", MSCAN_FIELD(c.gradcheck.epsilon));
        k["gradcheck.tolerance"] = double_key("gradcheck.tolerance", MSCAN_FIELD(c.gradcheck.tolerance));
        k["gradcheck.alpha"] = double_key("gradcheck.alpha", MSCAN_FIELD(c.gradcheck.alpha));
        k["gradcheck.init_scale"] = double_key("gradcheck.init_scale", MSCAN_FIELD(c.gradcheck.init_scale));

        k["io.dataset"] = string_key(MSCAN_FIELD(c.dataset_path));
        k["io.checkpoint"] = string_key(MSCAN_FIELD(c.checkpoint_path));

        k["run.seeds"] = {[](RunConfig& c, const std::string& v) {
                              c.seeds = parse_list<std::uint64_t>("run.seeds", v, parse_unsigned);
                          },
                          [](const RunConfig& c) { return format_list(c.seeds); }};
        return k;
    }();
    return keys;
}

#undef MSCAN_FIELD

}  // namespace detail

/// Cross-field checks run after all values are applied.
inline void validate(const RunConfig& c) {
    try {
        c.synthetic.validate();
        c.model.validate();
        c.train.validate();
        c.baseline.validate();
    } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
    }
    if (!(c.synthetic.test_fraction > 0.0 && c.synthetic.test_fraction < 1.0)) {
        throw ConfigError("key data.test_fraction: must lie in (0, 1)");
    }
    if (c.seeds.empty()) throw ConfigError("key run.seeds: at least one seed required");
    for (const auto* grid : {&c.c_grid, &c.alpha_grid}) {
        try {
            check_grid(*grid);
        } catch (const PreconditionError& e) {
            throw ConfigError(std::string(grid == &c.c_grid ? "key sweep.c_grid: " : "key sweep.alpha_grid: ") + e.what());
        }
    }
    for (double a : c.alpha_grid) {
        if (a < 0.0) throw ConfigError("key sweep.alpha_grid: values must be nonnegative");
    }
    const auto& g = c.gradcheck;
    if (!(g.epsilon > 0.0) || !(g.tolerance > 0.0)) throw ConfigError("gradcheck: epsilon and tolerance must be > 0");
    if (g.batch == 0 || g.users == 0 || g.items == 0 || g.scenarios == 0 || g.embed_dim == 0 || g.gru_hidden == 0 ||
        g.history_cap == 0 || g.current_cap == 0) {
        throw ConfigError("gradcheck: sizes must be positive");
    }
}

/// Applies one `section.key=value` assignment.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& keys = detail::config_keys();
    auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError("unknown key " + key);
    it->second.set(cfg, value);
}

inline void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    apply_setting(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

/// Parses INI text; keys outside a section are rejected.
inline void apply_ini(RunConfig& cfg, const std::string& text, const std::string& origin = "<config>") {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(origin + ": " + e.message() + " at line " + std::to_string(e.line()));
    }
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            if (!body.data().empty()) throw ConfigError("unknown key " + section);
            continue;
        }
        for (const auto& [key, node] : body) apply_setting(cfg, section + "." + key, node.data());
    }
}

/// Defaults, then the file (if any), then the overrides in order.
inline RunConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw MissingInputError("config file not found: " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        apply_ini(cfg, ss.str(), path);
    }
    for (const auto& o : overrides) apply_override(cfg, o);
    validate(cfg);
    return cfg;
}

/// Every key with its resolved value, sorted; `include_io` false drops
/// machine-local paths.
inline std::map<std::string, std::string> resolved_settings(const RunConfig& cfg, bool include_io = true) {
    std::map<std::string, std::string> out;
    for (const auto& [key, k] : detail::config_keys()) {
        if (!include_io && key.rfind("io.", 0) == 0) continue;
        out[key] = k.get(cfg);
    }
    return out;
}

/// INI document that parses back to `cfg`.
inline std::string config_ini(const RunConfig& cfg) {
    std::string out;
    std::string section;
    for (const auto& [key, value] : resolved_settings(cfg)) {
        const auto dot = key.find('.');
        const std::string s = key.substr(0, dot);
        if (s != section) {
            if (!section.empty()) out += "\n";
            out += "[" + s + "]\n";
            section = s;
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

/// 16 hex digits of FNV-1a over the resolved settings, io.* excluded.
inline std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    for (const auto& [key, value] : resolved_settings(cfg, false)) {
        mix(key);
        mix(value);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace mscan
