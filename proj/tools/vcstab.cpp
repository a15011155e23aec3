// vcstab: equilibria, simulation, sweeps and stability reports for the
// star DC network with voltage-collapse-stabilising load control.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "vcstab/cli.hpp"

int main(int argc, char** argv) {
    using namespace vcstab::cli;

    CLI::App app{"Voltage collapse analysis for star DC networks"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_path;
    double dt = 0.0;
    long long seed = 0;  // reserved, nothing is random

    for (const char* name : {"equilibria", "simulate", "sweep", "stability"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_path, "output file (default: stdout)");
        sub->add_option("--dt", dt, "integration step override [s]")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "reserved");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        RunConfig cfg = load_config(config_path);
        if (dt > 0.0) cfg.dt = dt;
        if (out_path.empty() && cfg.out) out_path = *cfg.out;

        const CommandResult res = run_command(command, cfg);
        if (!res.message.empty()) std::cerr << res.message << '\n';
        if (out_path.empty()) {
            std::cout << res.output;
        } else {
            write_atomically(out_path, res.output);
        }
        return res.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
