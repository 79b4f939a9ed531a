// Copyright 2026 The mscan Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include <CLI11.hpp>

#include "mscan/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"mscan: multi-scenario click models, debiasing experiments and reports"};
    app.require_subcommand(1, 1);
    mscan::CliArgs args;

    for (const auto& name : mscan::command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", args.config_path, "INI config file");
        sub->add_option("--set", args.sets, "key=value override, repeatable")->allow_extra_args(false);
        sub->add_option("--out", args.out, "output root (default $MSCAN_OUT_ROOT, then ./runs)");
        sub->add_option("--seed", args.seeds, "seed, repeatable; replaces run.seeds")->allow_extra_args(false);
        sub->callback([&args, name] { args.command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return mscan::report_error(std::cerr, mscan::kExitConfig, "config", e.what());
    }
    return mscan::run_command(args, std::cout, std::cerr);
}
