#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nfield/domain.hpp"
#include "nfield/errors.hpp"
#include "nfield/history.hpp"
#include "nfield/model.hpp"
#include "nfield/rng.hpp"

namespace nfield {

enum class Integrator { euler, heun };

inline const char* integrator_name(Integrator m) {
    return m == Integrator::euler ? "euler" : "heun";
}

/// Additive external input u_ext(r, t), applied on top of whatever feedback
/// law the controller defines. Used for open-loop and disturbance studies.
using ExternalInput = std::function<double(const double* r, double t)>;

namespace detail {

/// Samples delayed states while a step is being evaluated. Positions at or
/// below the newest snapshot read the history; positions between the newest
/// snapshot and the evaluation time blend toward `current`, the state the
/// integrator is evaluating (for a corrector stage that is the predictor,
/// which plays the role of the state at the next grid time).
struct DelayedEval {
    const HistoryBuffer& hist;
    double eval_pos;           // evaluation time, in steps
    const FieldPair& current;  // state at eval_pos

    double sample(int pop, std::size_t node, double pos) const {
        pos = HistoryBuffer::snap(pos);
        const double newest = static_cast<double>(hist.newest_step());
        if (pos > newest) {
            if (!(eval_pos > newest))
                throw HistoryUnderflow("delayed sample requested past the stored range");
            double theta = (pos - newest) / (eval_pos - newest);
            if (theta >= 1.0) return pop == 1 ? current.pop1[node] : current.pop2[node];
            const double v0 = hist.fetch(pop, node, hist.newest_step());
            const double v1 = pop == 1 ? current.pop1[node] : current.pop2[node];
            return (1.0 - theta) * v0 + theta * v1;
        }
        return hist.sample(pop, node, pos);
    }
};

/// Per-pair delay offsets in steps, pos(a,b) = eval_pos - offset(a,b).
/// A source with dbar == 0 has every entry zero and skips the table.
struct DelayTables {
    std::vector<double> off1, off2;  // row-major (a, b), empty when uniform zero
    bool zero1 = true, zero2 = true;

    DelayTables() = default;
    DelayTables(const NeuralFieldModel& model, double dt) {
        const std::size_t n = model.node_count();
        zero1 = model.d1.dbar == 0.0;
        zero2 = model.d2.dbar == 0.0;
        if (!zero1) {
            off1.resize(n * n);
            for (std::size_t i = 0; i < n * n; ++i) off1[i] = model.d1.entries[i] / dt;
        }
        if (!zero2) {
            off2.resize(n * n);
            for (std::size_t i = 0; i < n * n; ++i) off2[i] = model.d2.entries[i] / dt;
        }
    }
};

/// Right-hand side of the closed-loop field dynamics at eval time, writing
/// the z time-derivatives into `out`. `y1` is the PI integrator state and is
/// required exactly when the controller is prop_int.
inline void rhs_core(const NeuralFieldModel& model, const DelayedEval& ev,
                     const DelayTables& tables, double t, const ExternalInput& u_ext,
                     const Field* y1, FieldPair& out) {
    const std::size_t n = model.node_count();
    const bool pi = model.controller.mode == ControlMode::prop_int;
    if (pi && y1 == nullptr) throw Error("prop_int rhs needs the integrator state y1");

    const bool has11 = !model.w11.is_zero(), has12 = !model.w12.is_zero();
    const bool has21 = !model.w21.is_zero(), has22 = !model.w22.is_zero();
    const bool need1 = has11 || has21, need2 = has12 || has22;

    for (std::size_t a = 0; a < n; ++a) {
        double ksum1 = 0.0, ksum2 = 0.0;
        if (need1 || need2) {
            const std::size_t row = a * n;
            for (std::size_t b = 0; b < n; ++b) {
                double s1 = 0.0, s2 = 0.0;
                if (need1) {
                    const double pos =
                        tables.zero1 ? ev.eval_pos : ev.eval_pos - tables.off1[row + b];
                    s1 = ev.sample(1, b, pos);
                }
                if (need2) {
                    const double pos =
                        tables.zero2 ? ev.eval_pos : ev.eval_pos - tables.off2[row + b];
                    s2 = ev.sample(2, b, pos);
                }
                if (has11) ksum1 += model.w11.entry(a, b) * s1;
                if (has12) ksum1 += model.w12.entry(a, b) * s2;
                if (has21) ksum2 += model.w21.entry(a, b) * s1;
                if (has22) ksum2 += model.w22.entry(a, b) * s2;
            }
        }

        double u = 0.0;
        switch (model.controller.mode) {
            case ControlMode::open_loop:
                break;
            case ControlMode::proportional:
                u = -model.controller.k * (ev.current.pop1[a] - model.z_ref[a]);
                break;
            case ControlMode::prop_int:
                u = -model.controller.k_P * (ev.current.pop1[a] - model.z_ref[a]) -
                    model.controller.k_I * (*y1)[a];
                break;
        }
        if (u_ext) u += u_ext(model.domain->node(a), t);

        const double in1 = model.Istar1[a] + model.alpha[a] * u + ksum1;
        const double in2 = model.Istar2[a] + ksum2;
        out.pop1[a] = (-ev.current.pop1[a] + model.S1(in1)) / model.tau1[a];
        out.pop2[a] = (-ev.current.pop2[a] + model.S2(in2)) / model.tau2[a];
    }
}

}  // namespace detail

/// Time-derivative of the state pair at time t given the current state and
/// the recorded history (which must already hold the snapshot at or before
/// t). Diagnostic entry point; simulate() runs the same arithmetic through a
/// cached delay table.
inline FieldPair rhs(double t, const FieldPair& current, const HistoryBuffer& history,
                     const NeuralFieldModel& model, const ExternalInput& u_ext = {},
                     const Field* y1 = nullptr) {
    if (history.newest_step() < 0)
        throw HistoryUnderflow("history holds no snapshots; append the initial state first");
    detail::DelayTables tables(model, history.dt());
    detail::DelayedEval ev{history, t / history.dt(), current};
    FieldPair out = FieldPair::zero(model.domain);
    detail::rhs_core(model, ev, tables, t, u_ext, y1, out);
    return out;
}

struct SimulationOptions {
    double dt = 1e-3;
    double t_end = 10.0;
    Integrator method = Integrator::euler;
    std::size_t stride = 100;  // record every stride-th step, plus the final one
    std::optional<FieldPair> reference;  // diagnostics target; defaults to the prehistory
    ExternalInput u_ext;
    std::optional<Field> y1_init;  // PI integrator state at t = 0; zero when absent
    double blowup_threshold = 1e12;

    void validate() const {
        if (!(dt > 0.0)) throw Error("simulation dt must be > 0");
        if (!(t_end >= dt)) throw Error("simulation t_end must be at least one step");
        if (stride == 0) throw Error("simulation stride must be >= 1");
        if (!(blowup_threshold > 0.0)) throw Error("blowup_threshold must be > 0");
    }
};

struct SimulationResult {
    std::vector<double> times;
    std::vector<FieldPair> states;
    std::vector<Field> y1;  // PI runs only, aligned with states
    std::vector<double> distance_to_reference;  // pair_norm against the reference
    std::vector<double> z1_tracking_error;      // ||z1 - z_ref|| in L2
    std::size_t steps_completed = 0;
    double dt = 0.0;
    Integrator method = Integrator::euler;
    bool aborted_nonfinite = false;
    std::vector<std::string> warnings;
};

/// Fixed-step method-of-steps integration from a constant prehistory (which
/// is also the initial state). States are appended to the history once per
/// step; delayed terms are read back through linear interpolation. A state
/// leaving [-blowup_threshold, blowup_threshold] (or going non-finite) stops
/// the run early with aborted_nonfinite set and the samples recorded so far.
inline SimulationResult simulate(const NeuralFieldModel& model, const FieldPair& prehistory,
                                 const SimulationOptions& opts) {
    model.validate();
    opts.validate();
    if (prehistory.domain() != model.domain)
        throw DomainMismatch("prehistory lives on a different domain than the model");
    if (!prehistory.all_finite()) throw NonFiniteValue("prehistory contains non-finite values");

    SimulationResult result;
    result.dt = opts.dt;
    result.method = opts.method;

    const std::size_t n = model.node_count();
    const auto steps_ll = std::llround(opts.t_end / opts.dt);
    if (steps_ll < 1) throw Error("t_end / dt rounds to zero steps");
    const std::size_t steps = static_cast<std::size_t>(steps_ll);
    if (std::abs(static_cast<double>(steps) * opts.dt - opts.t_end) >
        1e-6 * std::max(1.0, opts.t_end))
        result.warnings.push_back("t_end is not a multiple of dt; running to " +
                                  std::to_string(static_cast<double>(steps) * opts.dt));
    const double dbar = model.dbar();
    if (dbar > 0.0 && opts.dt > dbar)
        result.warnings.push_back(
            "dt exceeds the maximum delay; delayed samples span less than one step");

    const bool pi = model.controller.mode == ControlMode::prop_int;
    if (opts.y1_init && !pi)
        result.warnings.push_back("y1_init ignored: controller is not prop_int");
    Field y1_state = pi ? (opts.y1_init ? *opts.y1_init : Field::zero(model.domain)) : Field();
    if (pi && y1_state.domain() != model.domain)
        throw DomainMismatch("y1_init lives on a different domain than the model");

    const FieldPair& reference = opts.reference ? *opts.reference : prehistory;
    if (reference.domain() != model.domain)
        throw DomainMismatch("reference pair lives on a different domain than the model");

    HistoryBuffer hist(model.domain, prehistory, opts.dt, dbar);
    detail::DelayTables tables(model, opts.dt);

    FieldPair state = prehistory;
    hist.append(state);

    auto record = [&](std::size_t step) {
        result.times.push_back(static_cast<double>(step) * opts.dt);
        result.states.push_back(state);
        if (pi) result.y1.push_back(y1_state);
        result.distance_to_reference.push_back(pair_norm(sub(state, reference)));
        result.z1_tracking_error.push_back(l2_norm(sub(state.pop1, model.z_ref)));
    };
    record(0);

    FieldPair k1 = FieldPair::zero(model.domain);
    FieldPair k2 = FieldPair::zero(model.domain);
    FieldPair pred = FieldPair::zero(model.domain);

    for (std::size_t step = 0; step < steps; ++step) {
        const double t_n = static_cast<double>(step) * opts.dt;
        const double pos_n = static_cast<double>(step);
        detail::rhs_core(model, detail::DelayedEval{hist, pos_n, state}, tables, t_n,
                         opts.u_ext, pi ? &y1_state : nullptr, k1);

        if (opts.method == Integrator::euler) {
            if (pi)
                for (std::size_t a = 0; a < n; ++a)
                    y1_state[a] += opts.dt * (state.pop1[a] - model.z_ref[a]);
            for (std::size_t a = 0; a < n; ++a) {
                state.pop1[a] += opts.dt * k1.pop1[a];
                state.pop2[a] += opts.dt * k1.pop2[a];
            }
        } else {
            for (std::size_t a = 0; a < n; ++a) {
                pred.pop1[a] = state.pop1[a] + opts.dt * k1.pop1[a];
                pred.pop2[a] = state.pop2[a] + opts.dt * k1.pop2[a];
            }
            Field y1_pred = y1_state;
            if (pi)
                for (std::size_t a = 0; a < n; ++a)
                    y1_pred[a] += opts.dt * (state.pop1[a] - model.z_ref[a]);
            const double t_n1 = static_cast<double>(step + 1) * opts.dt;
            detail::rhs_core(model, detail::DelayedEval{hist, pos_n + 1.0, pred}, tables,
                             t_n1, opts.u_ext, pi ? &y1_pred : nullptr, k2);
            if (pi)
                for (std::size_t a = 0; a < n; ++a)
                    y1_state[a] += 0.5 * opts.dt *
                                   ((state.pop1[a] - model.z_ref[a]) +
                                    (pred.pop1[a] - model.z_ref[a]));
            for (std::size_t a = 0; a < n; ++a) {
                state.pop1[a] += 0.5 * opts.dt * (k1.pop1[a] + k2.pop1[a]);
                state.pop2[a] += 0.5 * opts.dt * (k1.pop2[a] + k2.pop2[a]);
            }
        }

        hist.append(state);
        result.steps_completed = step + 1;

        const bool finite = state.all_finite() && (!pi || y1_state.all_finite());
        const bool blown = finite && pair_linf(state) > opts.blowup_threshold;
        if (!finite || blown) {
            result.aborted_nonfinite = true;
            if (finite) record(step + 1);
            result.warnings.push_back("NonFiniteState: trajectory left the admissible range at t=" +
                                      std::to_string(static_cast<double>(step + 1) * opts.dt) +
                                      ", partial result returned");
            return result;
        }
        if ((step + 1) % opts.stride == 0 || step + 1 == steps) record(step + 1);
    }
    return result;
}

struct ConvergenceProbe {
    SimulationResult trajectory;
    double initial_distance = 0.0;
    double terminal_distance = 0.0;
    double max_after_burnin = 0.0;
    bool bounded_after_burnin = false;
    double burnin_fraction = 0.1;
    std::string label = "empirical, non-certifying";
};

/// Perturbs a candidate equilibrium, simulates, and reports whether the
/// distance to it stays bounded by the initial offset after a burn-in. An
/// empirical probe only: it never certifies stability, it can only flag
/// divergence at the sampled resolution.
inline ConvergenceProbe probe_convergence(const NeuralFieldModel& model, const FieldPair& z_star,
                                          double perturb_scale, SimulationOptions opts,
                                          std::uint64_t seed) {
    FieldPair phi = z_star;
    if (perturb_scale != 0.0) {
        Rng rng(seed);
        for (std::size_t a = 0; a < phi.size(); ++a) {
            phi.pop1[a] += perturb_scale * rng.normal();
            phi.pop2[a] += perturb_scale * rng.normal();
        }
    }
    opts.reference = z_star;

    ConvergenceProbe probe;
    probe.trajectory = simulate(model, phi, opts);
    const auto& dist = probe.trajectory.distance_to_reference;
    probe.initial_distance = dist.front();
    probe.terminal_distance = dist.back();
    const std::size_t burn =
        static_cast<std::size_t>(std::ceil(probe.burnin_fraction *
                                           static_cast<double>(dist.size() - 1)));
    for (std::size_t i = burn; i < dist.size(); ++i)
        probe.max_after_burnin = std::max(probe.max_after_burnin, dist[i]);
    const double floor = 1e-9 * (1.0 + pair_norm(z_star));
    probe.bounded_after_burnin =
        !probe.trajectory.aborted_nonfinite &&
        probe.max_after_burnin <= std::max(probe.initial_distance, floor) + floor;
    return probe;
}

}  // namespace nfield
