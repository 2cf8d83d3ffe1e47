// Command-line driver for the simulation, reconstruction and experiment pipelines.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bcinv/bcinv.hpp"

namespace {

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool paper_scale = false;
    std::string input;
    std::optional<double> eps;
    std::vector<std::string> overrides;
};

bcinv::ExperimentConfig resolve_config(const GlobalOptions& g) {
    bcinv::KeyValueConfig kv;
    if (!g.config.empty()) kv = bcinv::KeyValueConfig::load(g.config);
    for (const auto& item : g.overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw bcinv::ConfigError("--set expects key=value, got '" + item + "'");
        kv.set(item.substr(0, eq), item.substr(eq + 1));
    }
    if (!g.out.empty()) kv.set("output_dir", g.out);
    if (!g.input.empty()) kv.set("input", g.input);
    if (g.eps) kv.set("eps", bcinv::num(*g.eps));
    if (g.seed) kv.set("seeds", std::to_string(*g.seed));
    return bcinv::ExperimentConfig::from_keys(kv, g.paper_scale);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Boundary-control reconstruction of a 1D wave speed from noisy ND maps"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--config", g.config, "key = value configuration file");
    app.add_option("--seed", g.seed, "noise seed (replaces the configured seed list)");
    app.add_option("--out", g.out, "output directory");
    app.add_flag("--paper-scale", g.paper_scale, "N1 = 2^10, n_x = 2^13, n_sim = 2^15 unless configured");
    app.add_option("--input", g.input, "input file for build-ndmap, add-noise, reconstruct, reconstruct-single");
    app.add_option("--eps", g.eps, "noise level for add-noise, reconstruct and reconstruct-single");
    app.add_option("--set", g.overrides, "override a configuration key (key=value), repeatable");

    struct Command {
        const char* name;
        const char* help;
    };
    const std::vector<Command> commands = {
        {"simulate", "simulate the pulse response of the configured profile and build its ND map"},
        {"build-ndmap", "build the ND map from a stored pulse-response trace"},
        {"add-noise", "add operator-norm calibrated noise to an ND map"},
        {"reconstruct", "multi-measurement reconstruction from an ND map"},
        {"reconstruct-single", "single-measurement reconstruction from one step response"},
        {"calibrate", "error against c_reg for every noise level"},
        {"convergence", "error against noise level over several seeds, with fitted slope"},
        {"mdp", "discrepancy-principle parameter choice against the schedule"},
        {"export-profile", "write the built-in speed profiles as text files"},
    };
    for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? bcinv::kExitOk : bcinv::kExitConfig;
    }

    try {
        const bcinv::ExperimentConfig cfg = resolve_config(g);
        const std::string cmd = app.get_subcommands().front()->get_name();
        const std::uint64_t seed = cfg.seeds.front();
        std::ostream& log = std::cout;
        if (cmd == "simulate") {
            bcinv::cmd_simulate(cfg, log);
        } else if (cmd == "build-ndmap") {
            bcinv::cmd_build_ndmap(cfg, log);
        } else if (cmd == "add-noise") {
            bcinv::cmd_add_noise(cfg, seed, log);
        } else if (cmd == "reconstruct") {
            bcinv::cmd_reconstruct(cfg, log);
        } else if (cmd == "reconstruct-single") {
            bcinv::cmd_reconstruct_single(cfg, seed, log);
        } else if (cmd == "calibrate") {
            bcinv::cmd_calibrate(cfg, log);
        } else if (cmd == "convergence") {
            bcinv::cmd_convergence(cfg, log);
        } else if (cmd == "mdp") {
            bcinv::cmd_mdp(cfg, log);
        } else if (cmd == "export-profile") {
            bcinv::cmd_export_profiles(cfg, log);
        }
    } catch (const bcinv::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return bcinv::kExitConfig;
    } catch (const bcinv::DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return bcinv::kExitConfig;
    } catch (const bcinv::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return bcinv::kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return bcinv::kExitNumeric;
    }
    return bcinv::kExitOk;
}
