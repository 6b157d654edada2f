#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nfield/config.hpp"
#include "nfield/csv.hpp"
#include "nfield/manifest.hpp"
#include "nfield/simulator.hpp"
#include "nfield/solver.hpp"
#include "nfield/version.hpp"

namespace nfield {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitNonConvergence = 2;
inline constexpr int kExitNonFiniteState = 3;

struct CommonOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;  // overrides [solver] seed
    bool quiet = false;
};

struct SimulateCliOptions : CommonOptions {
    bool from_equilibrium = false;
    std::string prehistory_file;  // CSV with z1,z2 (and optionally y1) columns
    double perturb = 0.0;
};

struct SweepCliOptions : CommonOptions {
    std::string param;
    std::vector<double> values;
};

namespace cmddetail {

inline void info(bool quiet, const std::string& line) {
    if (!quiet) std::fprintf(stdout, "%s\n", line.c_str());
}

inline void warn(const std::string& line) { std::fprintf(stderr, "warning: %s\n", line.c_str()); }

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfigError;
    }
}

inline ScenarioConfig load_with_overrides(const CommonOptions& opts) {
    ScenarioConfig cfg = load_config(opts.config_path);
    if (opts.seed) cfg.solver.seed = *opts.seed;
    return cfg;
}

inline void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
}

inline std::vector<std::string> coordinate_header(const DomainPtr& domain) {
    std::vector<std::string> h = {"node", "r0"};
    if (domain->dimension() == 2) h.push_back("r1");
    return h;
}

inline std::vector<std::string> coordinate_cells(const DomainPtr& domain, std::size_t a) {
    std::vector<std::string> c = {std::to_string(a), csv::format_double(domain->coordinate(a, 0))};
    if (domain->dimension() == 2) c.push_back(csv::format_double(domain->coordinate(a, 1)));
    return c;
}

inline void write_summary(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& kv,
                          const std::vector<std::string>& warnings) {
    csv::Writer w(path);
    w.row({"key", "value"});
    for (const auto& [k, v] : kv) w.row({k, v});
    for (const auto& t : warnings) w.row({"warning", t});
    w.close();
}

/// Loads a state pair (and optional integrator state) from a CSV carrying
/// z1,z2[,y1] columns in node order, e.g. an earlier equilibrium.csv.
inline void read_state_csv(const std::string& path, const DomainPtr& domain, FieldPair& pair_out,
                           std::optional<Field>& y1_out) {
    const csv::Table t = csv::read(path);
    std::ptrdiff_t c_z1 = -1, c_z2 = -1, c_y1 = -1;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == "z1") c_z1 = static_cast<std::ptrdiff_t>(i);
        if (t.header[i] == "z2") c_z2 = static_cast<std::ptrdiff_t>(i);
        if (t.header[i] == "y1") c_y1 = static_cast<std::ptrdiff_t>(i);
    }
    if (c_z1 < 0 || c_z2 < 0) throw Error(path + " needs z1 and z2 columns");
    if (t.rows.size() != domain->node_count())
        throw Error(path + " has " + std::to_string(t.rows.size()) + " rows, domain has " +
                    std::to_string(domain->node_count()) + " nodes");
    FieldPair p = FieldPair::zero(domain);
    Field y1 = Field::zero(domain);
    for (std::size_t a = 0; a < t.rows.size(); ++a) {
        const auto& row = t.rows[a];
        const std::size_t need = static_cast<std::size_t>(std::max({c_z1, c_z2, c_y1})) + 1;
        if (row.size() < need) throw Error(path + " row " + std::to_string(a) + " is short");
        p.pop1[a] = std::strtod(row[static_cast<std::size_t>(c_z1)].c_str(), nullptr);
        p.pop2[a] = std::strtod(row[static_cast<std::size_t>(c_z2)].c_str(), nullptr);
        if (c_y1 >= 0) y1[a] = std::strtod(row[static_cast<std::size_t>(c_y1)].c_str(), nullptr);
    }
    if (!p.all_finite()) throw NonFiniteValue(path + " contains non-finite state values");
    pair_out = std::move(p);
    y1_out = c_y1 >= 0 ? std::optional<Field>(std::move(y1)) : std::nullopt;
}

}  // namespace cmddetail

// ---------------------------------------------------------------------------
// equilibrium
// ---------------------------------------------------------------------------

inline int cmd_equilibrium(const CommonOptions& opts) {
    using namespace cmddetail;
    return guarded([&]() -> int {
        const ScenarioConfig cfg = load_with_overrides(opts);
        const DomainPtr domain = make_domain(cfg);
        const NeuralFieldModel model = build_model(cfg, domain);
        const SolverOptions sopts = solver_options(cfg);
        ensure_out_dir(opts.out_dir);

        RunManifest man;
        man.command = "equilibrium";
        man.config_hash = hash_hex(config_hash(cfg));
        man.seed = cfg.solver.seed;
        man.tool_version = kToolVersion;

        if (model.controller.mode == ControlMode::prop_int) {
            const PIEquilibriumResult r = solve_pi_equilibrium(model, sopts);
            {
                csv::Writer w(opts.out_dir + "/equilibrium.csv");
                auto header = coordinate_header(domain);
                header.insert(header.end(), {"z1", "z2", "y1"});
                w.row(header);
                for (std::size_t a = 0; a < model.node_count(); ++a) {
                    auto cells = coordinate_cells(domain, a);
                    cells.push_back(csv::format_double(r.z1_star[a]));
                    cells.push_back(csv::format_double(r.z2_star[a]));
                    cells.push_back(csv::format_double(r.y1_star[a]));
                    w.row(cells);
                }
                w.close();
            }
            write_summary(opts.out_dir + "/summary.csv",
                          {{"mode", "prop_int"},
                           {"converged", r.converged ? "1" : "0"},
                           {"iterations", std::to_string(r.iterations)},
                           {"residual_z2_l2", csv::format_double(r.residual_z2_l2)},
                           {"residual_z2_linf", csv::format_double(r.residual_z2_linf)},
                           {"residual_z1_l2", csv::format_double(r.residual_z1_l2)},
                           {"residual_z1_linf", csv::format_double(r.residual_z1_linf)},
                           {"z1_equals_z_ref", "1"}},
                          r.warnings);
            man.outputs = {"equilibrium.csv", "summary.csv"};
            write_manifest(opts.out_dir, man);
            for (const auto& t : r.warnings) warn(t);
            info(opts.quiet, std::string("equilibrium (prop_int): ") +
                                 (r.converged ? "converged" : "NOT converged") + " in " +
                                 std::to_string(r.iterations) + " iterations");
            return r.converged ? kExitOk : kExitNonConvergence;
        }

        const EquilibriumResult r = solve_fixed_point(model, sopts);
        {
            csv::Writer w(opts.out_dir + "/equilibrium.csv");
            auto header = coordinate_header(domain);
            header.insert(header.end(), {"x1", "x2", "z1", "z2"});
            w.row(header);
            for (std::size_t a = 0; a < model.node_count(); ++a) {
                auto cells = coordinate_cells(domain, a);
                cells.push_back(csv::format_double(r.x_star.pop1[a]));
                cells.push_back(csv::format_double(r.x_star.pop2[a]));
                cells.push_back(csv::format_double(r.z_star.pop1[a]));
                cells.push_back(csv::format_double(r.z_star.pop2[a]));
                w.row(cells);
            }
            w.close();
        }
        {
            csv::Writer w(opts.out_dir + "/iterations.csv");
            w.row({"index", "residual", "step_norm"});
            for (const auto& rec : r.iteration_log)
                w.row({std::to_string(rec.index), csv::format_double(rec.residual_tcal),
                       csv::format_double(rec.step_norm)});
            w.close();
        }
        std::vector<std::pair<std::string, std::string>> kv = {
            {"mode", cfg.control.mode == ControlMode::open_loop ? "open_loop" : "proportional"},
            {"converged", r.converged ? "1" : "0"},
            {"iterations", std::to_string(r.iterations)},
            {"residual_tcal", csv::format_double(r.residual_tcal)},
            {"residual_T", csv::format_double(r.residual_t)},
            {"z_star_pair_norm", csv::format_double(pair_norm(r.z_star))},
            {"a_priori_bound",
             r.a_priori_bound ? csv::format_double(*r.a_priori_bound) : std::string("n/a")},
            {"within_bound", r.within_bound ? "1" : "0"},
            {"contraction_estimate", r.contraction_estimate
                                         ? csv::format_double(*r.contraction_estimate)
                                         : std::string("n/a")}};
        write_summary(opts.out_dir + "/summary.csv", kv, r.warnings);
        man.outputs = {"equilibrium.csv", "iterations.csv", "summary.csv"};
        write_manifest(opts.out_dir, man);
        for (const auto& t : r.warnings) warn(t);
        info(opts.quiet, std::string("equilibrium: ") +
                             (r.converged ? "converged" : "NOT converged") + " in " +
                             std::to_string(r.iterations) + " iterations, residual " +
                             csv::format_double(r.residual_tcal));
        return r.converged ? kExitOk : kExitNonConvergence;
    });
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline int cmd_simulate(const SimulateCliOptions& opts) {
    using namespace cmddetail;
    return guarded([&]() -> int {
        const ScenarioConfig cfg = load_with_overrides(opts);
        const DomainPtr domain = make_domain(cfg);
        const NeuralFieldModel model = build_model(cfg, domain);
        ensure_out_dir(opts.out_dir);

        const bool pi = model.controller.mode == ControlMode::prop_int;
        SimulationOptions sim = simulation_options(cfg);

        FieldPair phi = FieldPair::zero(domain);
        if (opts.from_equilibrium && !opts.prehistory_file.empty())
            throw ConfigError("--from-equilibrium and --prehistory are mutually exclusive");
        if (opts.from_equilibrium) {
            const SolverOptions sopts = solver_options(cfg);
            if (pi) {
                const PIEquilibriumResult eq = solve_pi_equilibrium(model, sopts);
                if (!eq.converged) {
                    std::fprintf(stderr, "error: PI equilibrium solve did not converge\n");
                    return kExitNonConvergence;
                }
                phi = FieldPair(eq.z1_star, eq.z2_star);
                sim.y1_init = eq.y1_star;
            } else {
                const EquilibriumResult eq = solve_fixed_point(model, sopts);
                if (!eq.converged) {
                    std::fprintf(stderr, "error: equilibrium solve did not converge\n");
                    return kExitNonConvergence;
                }
                phi = eq.z_star;
            }
            sim.reference = phi;
        } else if (!opts.prehistory_file.empty()) {
            std::optional<Field> y1_file;
            read_state_csv(opts.prehistory_file, domain, phi, y1_file);
            if (pi && y1_file) sim.y1_init = std::move(y1_file);
            sim.reference = phi;
        } else {
            phi = FieldPair(cfg.simulation.prehistory_z1.evaluate(domain),
                            cfg.simulation.prehistory_z2.evaluate(domain));
            sim.reference = phi;
        }

        if (opts.perturb != 0.0) {
            Rng rng(cfg.solver.seed);
            for (std::size_t a = 0; a < phi.size(); ++a) {
                phi.pop1[a] += opts.perturb * rng.normal();
                phi.pop2[a] += opts.perturb * rng.normal();
            }
        }

        const SimulationResult run = simulate(model, phi, sim);

        {
            csv::Writer w(opts.out_dir + "/trajectory.csv");
            std::vector<std::string> header = {"t", "distance_to_reference", "z1_tracking_error"};
            const std::size_t n = model.node_count();
            for (std::size_t a = 0; a < n; ++a) header.push_back("z1_" + std::to_string(a));
            for (std::size_t a = 0; a < n; ++a) header.push_back("z2_" + std::to_string(a));
            if (pi)
                for (std::size_t a = 0; a < n; ++a) header.push_back("y1_" + std::to_string(a));
            w.row(header);
            for (std::size_t i = 0; i < run.times.size(); ++i) {
                std::vector<std::string> cells = {
                    csv::format_double(run.times[i]),
                    csv::format_double(run.distance_to_reference[i]),
                    csv::format_double(run.z1_tracking_error[i])};
                for (std::size_t a = 0; a < n; ++a)
                    cells.push_back(csv::format_double(run.states[i].pop1[a]));
                for (std::size_t a = 0; a < n; ++a)
                    cells.push_back(csv::format_double(run.states[i].pop2[a]));
                if (pi)
                    for (std::size_t a = 0; a < n; ++a)
                        cells.push_back(csv::format_double(run.y1[i][a]));
                w.row(cells);
            }
            w.close();
        }
        write_summary(opts.out_dir + "/summary.csv",
                      {{"method", integrator_name(run.method)},
                       {"dt", csv::format_double(run.dt)},
                       {"steps_completed", std::to_string(run.steps_completed)},
                       {"samples", std::to_string(run.times.size())},
                       {"aborted_nonfinite", run.aborted_nonfinite ? "1" : "0"},
                       {"final_distance_to_reference",
                        csv::format_double(run.distance_to_reference.back())},
                       {"final_z1_tracking_error",
                        csv::format_double(run.z1_tracking_error.back())}},
                      run.warnings);

        RunManifest man;
        man.command = "simulate";
        man.config_hash = hash_hex(config_hash(cfg));
        man.seed = cfg.solver.seed;
        man.tool_version = kToolVersion;
        man.outputs = {"trajectory.csv", "summary.csv"};
        write_manifest(opts.out_dir, man);

        for (const auto& t : run.warnings) warn(t);
        info(opts.quiet,
             "simulate: " + std::to_string(run.steps_completed) + " steps, " +
                 std::to_string(run.times.size()) + " samples, final distance " +
                 csv::format_double(run.distance_to_reference.back()));
        return run.aborted_nonfinite ? kExitNonFiniteState : kExitOk;
    });
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

inline int cmd_sweep(const SweepCliOptions& opts) {
    using namespace cmddetail;
    return guarded([&]() -> int {
        if (opts.values.empty()) throw ConfigError("sweep needs at least one value");
        const ScenarioConfig base = load_with_overrides(opts);
        {
            // Validate the key before doing any work.
            ScenarioConfig probe = base;
            apply_sweep_value(probe, opts.param, opts.values.front());
        }
        ensure_out_dir(opts.out_dir);

        csv::Writer w(opts.out_dir + "/sweep.csv");
        w.row({"value", "converged", "residual_T", "z_star_pair_norm", "iterations"});
        bool all_converged = true;
        for (const double v : opts.values) {
            ScenarioConfig cfg = base;
            apply_sweep_value(cfg, opts.param, v);
            const NeuralFieldModel model = build_model(cfg);
            SolverOptions sopts = solver_options(cfg);
            sopts.contraction_samples = 0;  // per-point estimates are not part of the table
            bool converged = false;
            double residual = 0.0, z_norm = 0.0;
            std::size_t iterations = 0;
            if (model.controller.mode == ControlMode::prop_int) {
                const PIEquilibriumResult r = solve_pi_equilibrium(model, sopts);
                converged = r.converged;
                residual = std::max(r.residual_z1_linf, r.residual_z2_linf);
                z_norm = pair_norm(FieldPair(r.z1_star, r.z2_star));
                iterations = r.iterations;
            } else {
                const EquilibriumResult r = solve_fixed_point(model, sopts);
                converged = r.converged;
                residual = r.residual_t;
                z_norm = pair_norm(r.z_star);
                iterations = r.iterations;
            }
            all_converged = all_converged && converged;
            w.row({csv::format_double(v), converged ? "1" : "0", csv::format_double(residual),
                   csv::format_double(z_norm), std::to_string(iterations)});
        }
        w.close();

        RunManifest man;
        man.command = "sweep " + opts.param;
        man.config_hash = hash_hex(config_hash(base));
        man.seed = base.solver.seed;
        man.tool_version = kToolVersion;
        man.outputs = {"sweep.csv"};
        write_manifest(opts.out_dir, man);

        info(opts.quiet, "sweep " + opts.param + ": " + std::to_string(opts.values.size()) +
                             " points, " + (all_converged ? "all converged" : "NOT all converged"));
        return all_converged ? kExitOk : kExitNonConvergence;
    });
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

namespace cmddetail {

inline FieldPair random_pair(const DomainPtr& domain, Rng& rng, double scale) {
    FieldPair p = FieldPair::zero(domain);
    for (std::size_t a = 0; a < p.size(); ++a) {
        p.pop1[a] = scale * rng.normal();
        p.pop2[a] = scale * rng.normal();
    }
    return p;
}

}  // namespace cmddetail

/// Structural self-checks of the assembled model: quadrature sanity, the
/// monotone-inverse round trip, operator identities, and the zero-delay
/// reduction of the integrator. These guard the discretization, not the
/// science; each check prints one PASS/FAIL line.
inline int cmd_verify(const CommonOptions& opts) {
    using namespace cmddetail;
    return guarded([&]() -> int {
        const ScenarioConfig cfg = load_with_overrides(opts);
        const DomainPtr domain = make_domain(cfg);
        const NeuralFieldModel model = build_model(cfg, domain);
        const std::size_t n = model.node_count();

        struct Check {
            std::string name;
            std::optional<std::string> failure;  // empty = pass
            std::string note;
        };
        std::vector<Check> checks;

        {  // quadrature weights: positive, summing to the box volume
            double sum = 0.0;
            bool positive = true;
            for (std::size_t a = 0; a < n; ++a) {
                sum += domain->weight(a);
                positive = positive && domain->weight(a) > 0.0;
            }
            const double rel = std::abs(sum - domain->volume()) / domain->volume();
            Check c{"quadrature_weight_sum", std::nullopt, ""};
            if (!positive) c.failure = "non-positive weight found";
            else if (rel > 1e-12)
                c.failure = "weight sum off by relative " + csv::format_double(rel);
            checks.push_back(c);
        }
        {  // composite rules integrate affine integrands exactly
            double acc = 0.0, exact = 0.0;
            const int dim = domain->dimension();
            for (std::size_t a = 0; a < n; ++a) {
                double v = 0.7;
                for (int d = 0; d < dim; ++d) v += (d == 0 ? 1.3 : -0.4) * domain->node(a)[d];
                acc += domain->weight(a) * v;
            }
            exact = 0.7 * domain->volume();
            for (int d = 0; d < dim; ++d) {
                const double lo = cfg.domain.lower[d], hi = cfg.domain.upper[d];
                double cross = domain->volume() / (hi - lo) * 0.5 * (hi * hi - lo * lo);
                exact += (d == 0 ? 1.3 : -0.4) * cross;
            }
            const double rel = std::abs(acc - exact) / std::max(1.0, std::abs(exact));
            Check c{"quadrature_affine_exact", std::nullopt, ""};
            if (rel > 1e-12) c.failure = "affine integrand off by relative " + csv::format_double(rel);
            checks.push_back(c);
        }
        {  // H inverse round trip at the configured gain, zero, and 10x
            const double g_cur = model.controller.stationary_gain();
            const double gains[3] = {0.0, g_cur, 10.0 * (g_cur > 0.0 ? g_cur : 1.0)};
            for (double g : gains) {
                NeuralFieldModel m2 = model;
                m2.controller = g == 0.0 ? Controller::open_loop() : Controller::proportional(g);
                Rng rng(cfg.solver.seed + 17);
                double worst = 0.0;
                for (int trial = 0; trial < 20; ++trial) {
                    const FieldPair v = random_pair(domain, rng, 2.0);
                    const FieldPair x = invert_H(v, m2, 1e-12);
                    worst = std::max(worst, pair_linf(sub(apply_H(x, m2), v)));
                }
                Check c{"h_roundtrip_gain_" + csv::format_double(g), std::nullopt,
                        g == 0.0 ? "identity path" : ""};
                if (worst > 1e-9)
                    c.failure = "max |H(H^-1(v)) - v| = " + csv::format_double(worst);
                checks.push_back(c);
            }
        }
        {  // sigma is monotone: <sigma(x) - sigma(y), x - y> >= 0
            Rng rng(cfg.solver.seed + 29);
            double worst = 0.0;
            for (int trial = 0; trial < 20; ++trial) {
                const FieldPair x = random_pair(domain, rng, 3.0);
                const FieldPair y = random_pair(domain, rng, 3.0);
                const FieldPair dxy = sub(x, y);
                const FieldPair ds = sub(apply_sigma(x, model), apply_sigma(y, model));
                const double ip =
                    l2_inner(ds.pop1, dxy.pop1) + l2_inner(ds.pop2, dxy.pop2);
                worst = std::min(worst, ip);
            }
            Check c{"sigma_monotone", std::nullopt, ""};
            if (worst < -1e-12) c.failure = "inner product " + csv::format_double(worst);
            checks.push_back(c);
        }
        {  // rho stays inside the activation bounds
            Check c{"rho_bounded", std::nullopt, ""};
            if (!model.activations_bounded()) {
                c.note = "skipped: an activation is unbounded";
            } else {
                const double cap =
                    std::max(model.S1.bound(), model.S2.bound()) * (1.0 + 1e-12) + 1e-300;
                Rng rng(cfg.solver.seed + 43);
                double worst = 0.0;
                for (int trial = 0; trial < 20; ++trial) {
                    const FieldPair x = random_pair(domain, rng, 50.0);
                    worst = std::max(worst, pair_linf(apply_rho(x, model)));
                }
                if (worst > cap) c.failure = "|rho(x)| reached " + csv::format_double(worst);
            }
            checks.push_back(c);
        }
        {  // T on rates and Tcal on inputs describe one fixed-point problem
            Rng rng(cfg.solver.seed + 61);
            const double lip = std::max(model.S1.lipschitz(), model.S2.lipschitz());
            Check c{"t_tcal_consistent", std::nullopt, ""};
            for (int trial = 0; trial < 10 && !c.failure; ++trial) {
                const FieldPair x = random_pair(domain, rng, 2.0);
                const FieldPair z = apply_rho(x, model);
                const FieldPair lhs = sub(apply_T(z, model), z);
                const FieldPair rhs_gap = sub(apply_Tcal(x, model), x);
                for (std::size_t a = 0; a < n; ++a) {
                    const double b1 = lip * std::abs(rhs_gap.pop1[a]) + 1e-12;
                    const double b2 = lip * std::abs(rhs_gap.pop2[a]) + 1e-12;
                    if (std::abs(lhs.pop1[a]) > b1 || std::abs(lhs.pop2[a]) > b2) {
                        c.failure = "nodewise bound violated at node " + std::to_string(a);
                        break;
                    }
                }
            }
            checks.push_back(c);
        }
        {  // zero-delay runs match an inline undelayed Euler stepper
            NeuralFieldModel m0 = model;
            m0.d1 = zero_delays(domain);
            m0.d2 = zero_delays(domain);
            const FieldPair phi(cfg.simulation.prehistory_z1.evaluate(domain),
                                cfg.simulation.prehistory_z2.evaluate(domain));
            SimulationOptions so = simulation_options(cfg);
            so.method = Integrator::euler;
            so.dt = cfg.simulation.dt;
            so.t_end = 50.0 * so.dt;
            so.stride = 1;
            const bool pi = m0.controller.mode == ControlMode::prop_int;
            const SimulationResult run = simulate(m0, phi, so);

            FieldPair state = phi;
            Field y1 = Field::zero(domain);
            double worst = 0.0;
            std::size_t idx = 0;
            auto compare = [&]() {
                if (idx < run.states.size())
                    worst = std::max(worst, pair_linf(sub(run.states[idx], state)));
                ++idx;
            };
            compare();
            for (int step = 0; step < 50; ++step) {
                const Field w1 = add(m0.w11.apply(state.pop1), m0.w12.apply(state.pop2));
                const Field w2 = add(m0.w21.apply(state.pop1), m0.w22.apply(state.pop2));
                FieldPair next = state;
                Field y1_next = y1;
                for (std::size_t a = 0; a < n; ++a) {
                    double u = 0.0;
                    if (m0.controller.mode == ControlMode::proportional)
                        u = -m0.controller.k * (state.pop1[a] - m0.z_ref[a]);
                    else if (pi)
                        u = -m0.controller.k_P * (state.pop1[a] - m0.z_ref[a]) -
                            m0.controller.k_I * y1[a];
                    const double in1 = m0.Istar1[a] + m0.alpha[a] * u + w1[a];
                    const double in2 = m0.Istar2[a] + w2[a];
                    next.pop1[a] =
                        state.pop1[a] + so.dt * (-state.pop1[a] + m0.S1(in1)) / m0.tau1[a];
                    next.pop2[a] =
                        state.pop2[a] + so.dt * (-state.pop2[a] + m0.S2(in2)) / m0.tau2[a];
                    if (pi) y1_next[a] = y1[a] + so.dt * (state.pop1[a] - m0.z_ref[a]);
                }
                state = next;
                y1 = y1_next;
                compare();
            }
            Check c{"zero_delay_reduction", std::nullopt, ""};
            if (worst > 1e-12)
                c.failure = "max deviation from the undelayed stepper " + csv::format_double(worst);
            checks.push_back(c);
        }

        bool all_pass = true;
        for (const auto& c : checks) {
            all_pass = all_pass && !c.failure;
            if (!opts.quiet) {
                std::string line = (c.failure ? "FAIL " : "PASS ") + c.name;
                if (c.failure) line += ": " + *c.failure;
                if (!c.note.empty()) line += " (" + c.note + ")";
                std::fprintf(stdout, "%s\n", line.c_str());
            }
        }
        info(opts.quiet, all_pass ? "verify: all checks passed" : "verify: FAILURES present");
        return all_pass ? kExitOk : kExitConfigError;
    });
}

}  // namespace nfield
