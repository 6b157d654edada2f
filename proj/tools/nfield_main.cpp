#include <cstdint>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nfield/commands.hpp"
#include "nfield/version.hpp"

namespace {

void add_common(CLI::App* cmd, nfield::CommonOptions& opts, std::uint64_t& seed_slot,
                bool& seed_set) {
    cmd->add_option("config", opts.config_path, "scenario config file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "output directory (created if missing)");
    cmd->add_option("--seed", seed_slot, "override the [solver] seed")
        ->each([&seed_set](const std::string&) { seed_set = true; });
    cmd->add_flag("--quiet", opts.quiet, "suppress stdout status lines");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coupled two-population neural field tool: equilibria, delayed dynamics, "
                 "parameter sweeps"};
    app.set_version_flag("--version", std::string(nfield::kToolVersion));
    app.require_subcommand(1);

    nfield::CommonOptions eq_opts;
    std::uint64_t eq_seed = 0;
    bool eq_seed_set = false;
    CLI::App* eq = app.add_subcommand("equilibrium", "solve for a closed-loop equilibrium");
    add_common(eq, eq_opts, eq_seed, eq_seed_set);

    nfield::SimulateCliOptions sim_opts;
    std::uint64_t sim_seed = 0;
    bool sim_seed_set = false;
    CLI::App* sim = app.add_subcommand("simulate", "integrate the delayed dynamics");
    add_common(sim, sim_opts, sim_seed, sim_seed_set);
    sim->add_flag("--from-equilibrium", sim_opts.from_equilibrium,
                  "solve for the equilibrium first and start there");
    sim->add_option("--prehistory", sim_opts.prehistory_file,
                    "CSV with z1,z2 (and optionally y1) columns to start from")
        ->check(CLI::ExistingFile);
    sim->add_option("--perturb", sim_opts.perturb,
                    "seeded normal perturbation scale applied to the start state");

    nfield::SweepCliOptions sweep_opts;
    std::uint64_t sweep_seed = 0;
    bool sweep_seed_set = false;
    CLI::App* sweep = app.add_subcommand("sweep", "re-solve the equilibrium along one parameter");
    add_common(sweep, sweep_opts, sweep_seed, sweep_seed_set);
    sweep->add_option("--param", sweep_opts.param, "registered key, e.g. control.k")->required();
    sweep->add_option("--values", sweep_opts.values, "parameter values to visit")->required();

    nfield::CommonOptions verify_opts;
    std::uint64_t verify_seed = 0;
    bool verify_seed_set = false;
    CLI::App* verify = app.add_subcommand("verify", "run structural self-checks on a scenario");
    add_common(verify, verify_opts, verify_seed, verify_seed_set);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : nfield::kExitConfigError;
    }

    if (eq->parsed()) {
        if (eq_seed_set) eq_opts.seed = eq_seed;
        return nfield::cmd_equilibrium(eq_opts);
    }
    if (sim->parsed()) {
        if (sim_seed_set) sim_opts.seed = sim_seed;
        return nfield::cmd_simulate(sim_opts);
    }
    if (sweep->parsed()) {
        if (sweep_seed_set) sweep_opts.seed = sweep_seed;
        return nfield::cmd_sweep(sweep_opts);
    }
    if (verify_seed_set) verify_opts.seed = verify_seed;
    return nfield::cmd_verify(verify_opts);
}
