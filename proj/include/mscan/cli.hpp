// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command layer behind the mscan executable. Each command writes into
// <root>/<command>-<hash>, where the hash covers only the config sections the
// command depends on, so eval finds the checkpoint of the matching train run.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mscan/baselines.hpp"
#include "mscan/checkpoint.hpp"
#include "mscan/config.hpp"
#include "mscan/data.hpp"
#include "mscan/error.hpp"
#include "mscan/evaluation.hpp"
#include "mscan/experiments.hpp"
#include "mscan/report.hpp"
#include "mscan/synthetic.hpp"
#include "mscan/training.hpp"

namespace mscan {

namespace fs = std::filesystem;

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitMissingInput = 3,
    kExitModule = 4,
    kExitGradCheck = 5,
};

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"gen-data", "train", "eval", "ablate", "sweep", "grad-check", "baseline"};
    return names;
}

/// Config sections whose values determine a command's artifacts.
inline std::vector<std::string> command_sections(const std::string& cmd) {
    if (cmd == "gen-data") return {"synthetic"};
    if (cmd == "train") return {"synthetic", "data", "model", "train", "run"};
    if (cmd == "eval") return {"synthetic", "data", "model", "train", "run", "infer", "eval", "baseline"};
    if (cmd == "ablate") return {"synthetic", "data", "model", "train", "run", "infer", "eval"};
    if (cmd == "sweep") return {"synthetic", "data", "model", "train", "run", "infer", "eval", "sweep"};
    if (cmd == "grad-check") return {"model", "gradcheck", "run"};
    if (cmd == "baseline") return {"synthetic", "data", "train", "run", "baseline"};
    throw ConfigError("unknown command " + cmd);
}

inline std::string command_hash(const RunConfig& cfg, const std::string& cmd) {
    const auto sections = command_sections(cmd);
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        h ^= 0xff;
        h *= 1099511628211ull;
    };
    mix(cmd);
    for (const auto& [key, value] : resolved_settings(cfg, false)) {
        const std::string section = key.substr(0, key.find('.'));
        if (std::find(sections.begin(), sections.end(), section) == sections.end()) continue;
        if (key == "data.source" && cmd == "gen-data") continue;
        mix(key);
        mix(value);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline fs::path run_dir(const fs::path& root, const RunConfig& cfg, const std::string& cmd) {
    return root / (cmd + "-" + command_hash(cfg, cmd));
}

/// --out, else $MSCAN_OUT_ROOT, else ./runs.
inline fs::path output_root(const std::string& out_flag) {
    if (!out_flag.empty()) return out_flag;
    if (const char* env = std::getenv("MSCAN_OUT_ROOT"); env && *env) return env;
    return "runs";
}

inline SequenceCaps caps_of(const RunConfig& cfg) { return cfg.model.caps; }

inline fs::path dataset_path(const RunConfig& cfg, const fs::path& root) {
    if (!cfg.dataset_path.empty()) return cfg.dataset_path;
    return run_dir(root, cfg, "gen-data") / "dataset.csv";
}

inline fs::path checkpoint_path(const RunConfig& cfg, const fs::path& root) {
    if (!cfg.checkpoint_path.empty()) return cfg.checkpoint_path;
    return run_dir(root, cfg, "train") / "checkpoint.json";
}

/// The synthetic source regenerates in memory and goes through the same
/// densify/filter/split path as gen-data's CSV; the csv source reads
/// io.dataset or the gen-data run of this config.
inline Dataset load_dataset(const RunConfig& cfg, const fs::path& root) {
    InteractionLog log;
    if (cfg.source == DataSource::Synthetic) {
        log = densify(generate_synthetic(cfg.synthetic, caps_of(cfg)).records);
    } else {
        const fs::path path = dataset_path(cfg, root);
        if (!fs::exists(path)) throw MissingInputError("dataset not found: " + path.string());
        log = ingest_csv(path.string());
    }
    return prepare_dataset(log, caps_of(cfg), cfg.synthetic.test_fraction, cfg.keep_multi_scenario_users);
}

inline std::uint64_t first_seed(const RunConfig& cfg) { return cfg.seeds.front(); }

inline TrainConfig seeded_train(const RunConfig& cfg) {
    TrainConfig tc = cfg.train;
    tc.seed = first_seed(cfg);
    return tc;
}

inline BaselineConfig seeded_baseline(const RunConfig& cfg) {
    BaselineConfig bc = cfg.baseline;
    bc.init_seed = first_seed(cfg);
    return bc;
}

/// Tiny deterministic batch for gradient checking: a synthetic log over the
/// gradcheck vocabulary, examples with the longest histories first.
inline std::vector<Example> gradcheck_batch(const GradCheckConfig& g, std::uint64_t seed) {
    SyntheticConfig sc;
    sc.num_users = g.users;
    sc.num_items = g.items;
    sc.num_scenarios = g.scenarios;
    sc.latent_dim = 4;
    sc.events_per_user = 4 * (g.history_cap + 1);
    sc.seed = seed;
    const SyntheticData d = generate_synthetic(sc, {g.history_cap, g.current_cap});
    std::vector<Example> all = d.dataset.train;
    std::stable_sort(all.begin(), all.end(), [](const Example& a, const Example& b) {
        return std::pair(a.sequences.current.size(), a.sequences.mixed.size()) >
               std::pair(b.sequences.current.size(), b.sequences.mixed.size());
    });
    if (all.size() > g.batch) all.resize(g.batch);
    return all;
}

inline ModelConfig gradcheck_model(const RunConfig& cfg, std::uint64_t seed) {
    ModelConfig mc = cfg.model;
    mc.embed_dim = cfg.gradcheck.embed_dim;
    mc.gru_hidden = cfg.gradcheck.gru_hidden;
    mc.caps = {cfg.gradcheck.history_cap, cfg.gradcheck.current_cap};
    mc.init_scale = cfg.gradcheck.init_scale;
    mc.init_seed = seed;
    return mc;
}

/// One gradient check per seed; passes when every seed passes.
inline std::pair<bool, Json> run_gradcheck(const RunConfig& cfg) {
    const auto& g = cfg.gradcheck;
    Json runs = Json::array();
    bool pass = true;
    for (std::uint64_t seed : cfg.seeds) {
        MScanModel model =
            make_model(gradcheck_model(cfg, seed), {g.users, g.items, g.scenarios});
        const std::vector<Example> batch = gradcheck_batch(g, seed);
        LossOptions opts;
        opts.alpha = g.alpha;
        const GradCheckReport r = check_gradients(model, batch, g.epsilon, g.tolerance, opts);
        Json j = to_json(r);
        j["seed"] = seed;
        runs.push_back(j);
        pass = pass && r.pass;
    }
    return {pass, Json{{"pass", pass}, {"runs", runs}}};
}

inline MetricsReport baseline_report(const RunConfig& cfg, const Dataset& data, BaselineKind kind,
                                     std::optional<std::size_t> target) {
    if (kind != BaselineKind::Mix && !target) return run_baseline_all(kind, data, seeded_train(cfg), seeded_baseline(cfg));
    return run_baseline(kind, data, seeded_train(cfg), seeded_baseline(cfg), target);
}

struct CommandResult {
    fs::path dir;
    bool gradcheck_failed = false;
};

/// Runs one command; throws on failure.
inline CommandResult execute(const std::string& cmd, const RunConfig& cfg, const fs::path& root) {
    const fs::path dir = run_dir(root, cfg, cmd);
    CommandResult result{dir};
    auto prepare = [&] {
        fs::create_directories(dir);
        write_text((dir / "config.ini").string(), config_ini(cfg));
    };

    if (cmd == "gen-data") {
        if (cfg.source != DataSource::Synthetic) throw ConfigError("gen-data requires data.source=synthetic");
        const SyntheticData d = generate_synthetic(cfg.synthetic, caps_of(cfg));
        const InteractionLog log = densify(d.records);
        prepare();
        write_interactions_csv((dir / "dataset.csv").string(), d.records);
        write_vocabulary((dir / "vocab_users.csv").string(), log.users);
        write_vocabulary((dir / "vocab_items.csv").string(), log.items);
        write_vocabulary((dir / "vocab_scenarios.csv").string(), log.scenarios);
    } else if (cmd == "train") {
        const Dataset data = load_dataset(cfg, root);
        const TrainedModel t = train_seeded(data, cfg.model, cfg.train, first_seed(cfg));
        prepare();
        save_checkpoint(t.model, (dir / "checkpoint.json").string());
        emit_report(t.report, ReportFormat::Json, (dir / "train_report.json").string());
    } else if (cmd == "eval") {
        const fs::path ckpt = checkpoint_path(cfg, root);
        if (!fs::exists(ckpt)) throw MissingInputError("checkpoint not found: " + ckpt.string());
        const MScanModel model = load_checkpoint(ckpt.string());
        const Dataset data = load_dataset(cfg, root);
        MetricsReport report = evaluate(model, cfg.infer, data.test);
        if (cfg.eval_baseline != "none") {
            const BaselineKind kind = cfg.eval_baseline == "single"  ? BaselineKind::Single
                                      : cfg.eval_baseline == "mix" ? BaselineKind::Mix
                                                                   : BaselineKind::Finetune;
            attach_rel_impr(report, baseline_report(cfg, data, kind, std::nullopt), cfg.eval_baseline);
        }
        prepare();
        emit_report(report, ReportFormat::Json, (dir / "metrics.json").string());
    } else if (cmd == "ablate") {
        const Dataset data = load_dataset(cfg, root);
        const auto cells = run_ablation(data, cfg.experiment(), cfg.seeds);
        prepare();
        write_text((dir / "ablation.json").string(), json_text(ablation_json(cells)));
    } else if (cmd == "sweep") {
        const Dataset data = load_dataset(cfg, root);
        const auto& grid = cfg.sweep_param == SweepParam::C ? cfg.c_grid : cfg.alpha_grid;
        const SweepCurve curve = sweep(cfg.sweep_param, grid, data, cfg.experiment(), cfg.seeds);
        prepare();
        emit_report(curve, ReportFormat::Json, (dir / "sweep.json").string());
        emit_report(curve, ReportFormat::Csv, (dir / "sweep.csv").string());
    } else if (cmd == "grad-check") {
        const auto [pass, report] = run_gradcheck(cfg);
        prepare();
        write_text((dir / "gradcheck.json").string(), json_text(report));
        result.gradcheck_failed = !pass;
    } else if (cmd == "baseline") {
        const Dataset data = load_dataset(cfg, root);
        std::optional<std::size_t> target;
        if (cfg.baseline_target >= 0) target = static_cast<std::size_t>(cfg.baseline_target);
        const MetricsReport report = baseline_report(cfg, data, cfg.baseline_kind, target);
        prepare();
        emit_report(report, ReportFormat::Json, (dir / "baseline_metrics.json").string());
    } else {
        throw ConfigError("unknown command " + cmd);
    }
    return result;
}

inline std::string one_line(std::string s) {
    for (char& ch : s) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

inline int report_error(std::ostream& err, int code, const std::string& kind, const std::string& message) {
    err << Json{{"error", kind}, {"code", code}, {"message", one_line(message)}}.dump() << "\n";
    return code;
}

struct CliArgs {
    std::string command;
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    std::vector<std::uint64_t> seeds;
};

/// Full command execution with error mapping: prints the run directory on
/// success and a single JSON error line on failure.
inline int run_command(const CliArgs& args, std::ostream& out, std::ostream& err) {
    try {
        if (std::find(command_names().begin(), command_names().end(), args.command) == command_names().end()) {
            throw ConfigError("unknown command " + args.command);
        }
        std::vector<std::string> sets = args.sets;
        if (!args.seeds.empty()) sets.push_back("run.seeds=" + detail::format_list(args.seeds));
        const RunConfig cfg = parse_config(args.config_path, sets);
        const CommandResult r = execute(args.command, cfg, output_root(args.out));
        out << r.dir.string() << "\n";
        if (r.gradcheck_failed) {
            return report_error(err, kExitGradCheck, "grad-check", "gradient check failed; see " +
                                                                       (r.dir / "gradcheck.json").string());
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        return report_error(err, kExitConfig, "config", e.what());
    } catch (const MissingInputError& e) {
        return report_error(err, kExitMissingInput, "missing-input", e.what());
    } catch (const std::exception& e) {
        return report_error(err, kExitModule, "module", e.what());
    }
}

}  // namespace mscan
