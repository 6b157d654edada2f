#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nfield/domain.hpp"
#include "nfield/errors.hpp"
#include "nfield/model.hpp"
#include "nfield/operators.hpp"
#include "nfield/rng.hpp"

namespace nfield {

struct SolverOptions {
    std::size_t max_iterations = 10000;
    double tol_res = 1e-10;          // on ||Tcal(x) - x|| in pair_norm
    double damping = 0.5;            // theta in (0, 1]
    std::size_t anderson_depth = 5;  // 0 disables acceleration
    double inner_tol = 0.0;          // invert_H tolerance; 0 means tol_res / 100
    std::size_t multistart = 1;
    std::uint64_t seed = 12345;
    std::size_t contraction_samples = 0;  // > 0: attach a contraction estimate

    double effective_inner_tol() const { return inner_tol > 0.0 ? inner_tol : tol_res / 100.0; }

    void validate() const {
        if (!(tol_res > 0.0)) throw Error("solver tol_res must be > 0");
        if (!(damping > 0.0) || damping > 1.0) throw Error("solver damping must lie in (0, 1]");
        if (max_iterations == 0) throw Error("solver max_iterations must be >= 1");
        if (multistart == 0) throw Error("solver multistart must be >= 1");
    }
};

struct IterationRecord {
    std::size_t index;
    double residual_tcal;
    double step_norm;
};

struct EquilibriumResult {
    FieldPair x_star;
    FieldPair z_star;  // rho(x_star), set exactly from x_star
    double residual_tcal = std::numeric_limits<double>::infinity();
    double residual_t = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
    std::optional<double> a_priori_bound;  // bounded activations only
    bool within_bound = false;
    std::optional<double> contraction_estimate;
    std::vector<IterationRecord> iteration_log;
    std::vector<std::string> warnings;
};

struct ResidualReport {
    double pair_residual;  // ||T(z) - z|| in pair_norm
    double linf_residual;  // max nodewise deviation
};

struct PIEquilibriumResult {
    Field z1_star;  // bit-equal copy of z_ref
    Field z2_star;
    Field y1_star;
    double residual_z2_l2 = 0.0;  // z2 sub-equation
    double residual_z2_linf = 0.0;
    double residual_z1_l2 = 0.0;  // z1 stationarity equation defining y1
    double residual_z1_linf = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<std::string> warnings;
};

struct LinearCaseReport {
    bool solvable = false;  // rhs lies in the column space, to tolerance
    bool unique = false;    // numerical rank is full
    std::size_t rank = 0;
    std::size_t dimension = 0;
    FieldPair solution;     // least-squares solution when not solvable
    double residual_norm = 0.0;
    double rhs_norm = 0.0;
    double forcing_norm = 0.0;
    double tolerance = 0.0;
};

namespace detail {

inline Eigen::VectorXd flatten(const FieldPair& p) {
    const std::size_t n = p.size();
    Eigen::VectorXd v(2 * static_cast<Eigen::Index>(n));
    for (std::size_t a = 0; a < n; ++a) {
        v[static_cast<Eigen::Index>(a)] = p.pop1[a];
        v[static_cast<Eigen::Index>(n + a)] = p.pop2[a];
    }
    return v;
}

inline FieldPair unflatten(const Eigen::VectorXd& v, const DomainPtr& domain) {
    const std::size_t n = domain->node_count();
    FieldPair p = FieldPair::zero(domain);
    for (std::size_t a = 0; a < n; ++a) {
        p.pop1[a] = v[static_cast<Eigen::Index>(a)];
        p.pop2[a] = v[static_cast<Eigen::Index>(n + a)];
    }
    return p;
}

// Anderson acceleration over the last m residuals, damped with theta.
// With m = 0 (or too little history) this reduces to plain damped Picard
// x <- (1 - theta) x + theta g(x). Degenerate least-squares solves reset
// the history and fall back to the damped step.
class AndersonAccelerator {
public:
    AndersonAccelerator(std::size_t depth, double theta) : m_(depth), theta_(theta) {}

    Eigen::VectorXd next(const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
        xs_.push_back(x);
        gs_.push_back(g);
        while (xs_.size() > m_ + 1) {
            xs_.pop_front();
            gs_.pop_front();
        }
        const std::size_t h = xs_.size();
        if (m_ == 0 || h < 2) return (1.0 - theta_) * x + theta_ * g;

        const Eigen::Index n = x.size();
        const Eigen::Index cols = static_cast<Eigen::Index>(h - 1);
        Eigen::VectorXd fk = g - x;
        Eigen::MatrixXd dF(n, cols), dX(n, cols), dG(n, cols);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const auto& x0 = xs_[static_cast<std::size_t>(j)];
            const auto& x1 = xs_[static_cast<std::size_t>(j) + 1];
            const auto& g0 = gs_[static_cast<std::size_t>(j)];
            const auto& g1 = gs_[static_cast<std::size_t>(j) + 1];
            dX.col(j) = x1 - x0;
            dG.col(j) = g1 - g0;
            dF.col(j) = (g1 - x1) - (g0 - x0);
        }
        Eigen::VectorXd gamma = dF.colPivHouseholderQr().solve(fk);
        if (!gamma.allFinite()) {
            xs_.clear();
            gs_.clear();
            return (1.0 - theta_) * x + theta_ * g;
        }
        const Eigen::VectorXd x_bar = x - dX * gamma;
        const Eigen::VectorXd g_bar = g - dG * gamma;
        return (1.0 - theta_) * x_bar + theta_ * g_bar;
    }

    void reset() {
        xs_.clear();
        gs_.clear();
    }

private:
    std::size_t m_;
    double theta_;
    std::deque<Eigen::VectorXd> xs_, gs_;
};

inline FieldPair perturb_pair(const FieldPair& base, double scale, Rng& rng) {
    FieldPair out = base;
    for (std::size_t a = 0; a < out.size(); ++a) {
        out.pop1[a] += scale * rng.normal();
        out.pop2[a] += scale * rng.normal();
    }
    return out;
}

}  // namespace detail

/// ||T(z) - z|| in pair_norm plus the max nodewise deviation. Pure.
inline ResidualReport verify_equilibrium(const FieldPair& z, const NeuralFieldModel& model) {
    const FieldPair d = sub(apply_T(z, model), z);
    return ResidualReport{pair_norm(d), pair_linf(d)};
}

/// Samples a local Lipschitz estimate of pi around the default initial
/// iterate: pairs (x, x + delta u_i) with u_1 random (seeded) and each
/// subsequent direction taken from the image of the previous difference, so
/// for linear maps the ratio sequence behaves like power iteration. Returns
/// the max ratio over all sampled pairs. A value < 1 suggests (but never
/// certifies) Banach-type uniqueness.
inline double estimate_contraction(const NeuralFieldModel& model, const SolverOptions& opts,
                                   std::size_t sample_count) {
    if (sample_count < 2) throw Error("estimate_contraction needs sample count >= 2");
    const double tol = opts.effective_inner_tol();
    const FieldPair base = forcing_f(model);
    const FieldPair pi_base = apply_pi(base, model, tol);
    Rng rng(opts.seed);
    const double step = 1e-2 * (1.0 + pair_norm(base));

    auto random_unit = [&]() {
        FieldPair d = detail::perturb_pair(FieldPair::zero(base.domain()), 1.0, rng);
        const double n = pair_norm(d);
        return n > 0.0 ? scale(d, 1.0 / n) : d;
    };

    FieldPair dir = random_unit();
    double best = 0.0;
    for (std::size_t i = 0; i < sample_count; ++i) {
        const FieldPair y = add(base, scale(dir, step));
        const FieldPair diff = sub(apply_pi(y, model, tol), pi_base);
        const double num = pair_norm(diff);
        const double den = pair_norm(sub(y, base));
        if (den == 0.0) continue;
        best = std::max(best, num / den);
        dir = num > 0.0 ? scale(diff, 1.0 / num) : random_unit();
    }
    return best;
}

namespace detail {

struct SingleSolve {
    FieldPair x;
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<IterationRecord> log;
};

inline SingleSolve solve_from(FieldPair x, const NeuralFieldModel& model,
                              const SolverOptions& opts) {
    SingleSolve out;
    out.x = x;  // fallback when the first iterate already diverges
    const double inner_tol = opts.effective_inner_tol();
    AndersonAccelerator aa(opts.anderson_depth, opts.damping);
    double last_step = 0.0;
    for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
        out.iterations = it;
        // Divergence to overflow is reported as non-convergence, not thrown.
        FieldPair tcal_x, pi_x;
        try {
            tcal_x = apply_Tcal(x, model);
        } catch (const NonFiniteValue&) {
            break;
        }
        const FieldPair resid = sub(tcal_x, x);
        const double res = pair_norm(resid);
        out.log.push_back(IterationRecord{it, res, last_step});
        if (!std::isfinite(res)) break;  // diverged; report best effort
        if (res <= opts.tol_res) {
            out.converged = true;
            out.residual = res;
            out.x = x;
            return out;
        }
        if (res < out.residual) {
            out.residual = res;
            out.x = x;
        }
        // pi(x) = H^-1(W(rho(x)) + f) = H^-1(Tcal(x) + sigma(x)).
        try {
            pi_x = invert_H(add(tcal_x, apply_sigma(x, model)), model, inner_tol);
        } catch (const NonFiniteValue&) {
            break;
        }
        const Eigen::VectorXd next = aa.next(flatten(x), flatten(pi_x));
        if (!next.allFinite()) break;
        FieldPair x_next = unflatten(next, x.domain());
        last_step = pair_norm(sub(x_next, x));
        x = std::move(x_next);
    }
    return out;
}

}  // namespace detail

/// Finds a fixed point of Tcal by damped Picard iteration on pi, with
/// optional Anderson acceleration and multistart. The iterate path is an
/// implementation choice; the contract is the fixed point itself. Starts
/// from x0 = f (exact for the decoupled case); additional starts perturb f
/// with per-start seeded noise. Non-convergence is a reported state, not an
/// error: the best iterate comes back with converged = false.
inline EquilibriumResult solve_fixed_point(const NeuralFieldModel& model,
                                           const SolverOptions& opts) {
    model.validate();
    opts.validate();

    const FieldPair f = forcing_f(model);
    detail::SingleSolve best;
    bool have = false;
    for (std::size_t start = 0; start < opts.multistart; ++start) {
        FieldPair x0 = f;
        if (start > 0) {
            Rng rng(opts.seed + 1000003ULL * start);
            x0 = detail::perturb_pair(f, 0.5 * (1.0 + pair_linf(f)), rng);
        }
        detail::SingleSolve s = detail::solve_from(std::move(x0), model, opts);
        if (!have || (s.converged && !best.converged) ||
            (s.converged == best.converged && s.residual < best.residual)) {
            best = std::move(s);
            have = true;
        }
        if (best.converged) break;
    }

    EquilibriumResult r;
    r.x_star = best.x;
    r.z_star = apply_rho(best.x, model);
    r.residual_tcal = best.residual;
    r.residual_t = verify_equilibrium(r.z_star, model).pair_residual;
    r.iterations = best.iterations;
    r.converged = best.converged;
    r.iteration_log = std::move(best.log);
    r.a_priori_bound = a_priori_bound(model);
    if (r.a_priori_bound)
        r.within_bound = pair_norm(r.x_star) <= *r.a_priori_bound * (1.0 + 1e-6);
    if (model.existence_not_guaranteed())
        r.warnings.push_back(
            "existence_not_guaranteed: an activation is unbounded, the bounded-activation "
            "equilibrium guarantee does not apply");
    if (!r.converged)
        r.warnings.push_back("NonConvergence: iteration cap hit, best iterate returned");
    if (opts.contraction_samples >= 2)
        r.contraction_estimate = estimate_contraction(model, opts, opts.contraction_samples);
    return r;
}

/// Constructive equilibrium under proportional-integral feedback:
/// z1* = z_ref exactly; z2* solves its own sub-fixed-point with z1 frozen at
/// z_ref; y1* is chosen nodewise so the z1 stationarity equation holds,
/// y1*(r) = (I1*(r) + (M11 z_ref)(r) + (M12 z2*)(r) - S1^-1(z_ref(r))) / (k_I alpha(r)).
inline PIEquilibriumResult solve_pi_equilibrium(const NeuralFieldModel& model,
                                                const SolverOptions& opts) {
    model.validate();
    opts.validate();
    if (model.controller.mode != ControlMode::prop_int)
        throw Error("solve_pi_equilibrium requires a prop_int controller");
    if (!(model.controller.k_I > 0.0)) throw Error("solve_pi_equilibrium requires k_I > 0");

    const std::size_t n = model.node_count();
    PIEquilibriumResult r;
    r.z1_star = model.z_ref;  // bit-equal by construction

    if (!model.S2.is_bounded())
        r.warnings.push_back("existence_not_guaranteed: S2 unbounded, z2 sub-solve may diverge");

    // Step 1: z2 <- S2(I2* + M21 z_ref + M22 z2), damped with Anderson.
    const Field drive = add(model.Istar2, model.w21.apply(model.z_ref));
    auto z2_map = [&](const Field& z2) {
        Field img = add(drive, model.w22.apply(z2));
        for (std::size_t a = 0; a < n; ++a) img[a] = model.S2(img[a]);
        return img;
    };
    Field z2(model.domain, std::vector<double>(n, 0.0));
    {
        Field z2_img = z2_map(z2);
        z2 = z2_img;  // start from the image of zero
        detail::AndersonAccelerator aa(opts.anderson_depth, opts.damping);
        auto flatten1 = [](const Field& f) {
            return Eigen::Map<const Eigen::VectorXd>(f.values().data(),
                                                     static_cast<Eigen::Index>(f.size()))
                .eval();
        };
        for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
            r.iterations = it;
            z2_img = z2_map(z2);
            const double res = l2_norm(sub(z2_img, z2));
            if (!std::isfinite(res)) break;
            if (res <= opts.tol_res) {
                r.converged = true;
                break;
            }
            Eigen::VectorXd next = aa.next(flatten1(z2), flatten1(z2_img));
            if (!next.allFinite()) break;
            for (std::size_t a = 0; a < n; ++a) z2[a] = next[static_cast<Eigen::Index>(a)];
        }
        if (!r.converged)
            r.warnings.push_back("NonConvergence: z2 sub-solve hit the iteration cap");
    }
    r.z2_star = z2;

    // Step 2: nodewise monotone inversion of S1 at z_ref, then y1*.
    const Field m11_zref = model.w11.apply(model.z_ref);
    const Field m12_z2 = model.w12.apply(z2);
    Field y1(model.domain, std::vector<double>(n, 0.0));
    std::vector<std::size_t> unreachable;
    for (std::size_t a = 0; a < n; ++a) {
        const auto c = model.S1.try_invert(model.z_ref[a]);
        if (!c) {
            unreachable.push_back(a);
            continue;
        }
        const double numerator = model.Istar1[a] + m11_zref[a] + m12_z2[a] - *c;
        const double denom = model.controller.k_I * model.alpha[a];
        if (denom == 0.0) {
            const double tol_deg = 1e-12 * std::max(1.0, std::abs(model.Istar1[a]) +
                                                             std::abs(m11_zref[a]) +
                                                             std::abs(m12_z2[a]) + std::abs(*c));
            if (std::abs(numerator) > tol_deg)
                throw DivisionDegenerate(
                    "k_I * alpha vanishes at node " + std::to_string(a) +
                        " where the stationarity equation needs nonzero integral action",
                    a);
            y1[a] = 0.0;
        } else {
            y1[a] = numerator / denom;
        }
    }
    if (!unreachable.empty()) {
        std::string msg = "z_ref outside the attainable range of S1 at " +
                          std::to_string(unreachable.size()) + " node(s), first offenders:";
        for (std::size_t i = 0; i < unreachable.size() && i < 5; ++i)
            msg += " " + std::to_string(unreachable[i]);
        throw ReferenceUnreachable(msg, std::move(unreachable));
    }
    r.y1_star = y1;

    // Residuals of both defining relations.
    {
        const Field z2_img = z2_map(z2);
        const Field dz2 = sub(z2_img, z2);
        r.residual_z2_l2 = l2_norm(dz2);
        r.residual_z2_linf = linf_norm(dz2);

        Field dz1(model.domain, std::vector<double>(n, 0.0));
        for (std::size_t a = 0; a < n; ++a) {
            const double arg = model.Istar1[a] -
                               model.controller.k_I * model.alpha[a] * y1[a] + m11_zref[a] +
                               m12_z2[a];
            dz1[a] = model.S1(arg) - model.z_ref[a];
        }
        r.residual_z1_l2 = l2_norm(dz1);
        r.residual_z1_linf = linf_norm(dz1);
    }
    return r;
}

/// With both activations linear the stationarity condition is an affine
/// equation A x = b with A = I + sigma_lin - W rho_lin and
/// b = f - sigma(0) + W(rho(0)) (b = f when the offsets vanish, the case the
/// theory discusses). Assembles A densely, factors it with a rank-revealing
/// decomposition, and reports solvability (b in the column space), uniqueness
/// (full numerical rank), and the (least-squares) solution. Degenerate cases
/// are reported, never thrown.
inline LinearCaseReport solve_linear_case(const NeuralFieldModel& model) {
    model.validate();
    if (model.S1.kind() != ActivationKind::linear || model.S2.kind() != ActivationKind::linear)
        throw Error("solve_linear_case requires linear activations for both populations");

    const std::size_t n = model.node_count();
    const Eigen::Index dim = static_cast<Eigen::Index>(2 * n);
    const double m1 = model.S1.param0();
    const double m2 = model.S2.param0();
    const double g = model.controller.stationary_gain();

    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(dim, dim);
    for (std::size_t a = 0; a < n; ++a) {
        const Eigen::Index ia = static_cast<Eigen::Index>(a);
        A(ia, ia) += g * model.alpha[a] * m1;
        for (std::size_t b = 0; b < n; ++b) {
            const Eigen::Index ib = static_cast<Eigen::Index>(b);
            const Eigen::Index nb = static_cast<Eigen::Index>(n + b);
            A(ia, ib) -= model.w11.entry(a, b) * m1;
            A(ia, nb) -= model.w12.entry(a, b) * m2;
            A(static_cast<Eigen::Index>(n + a), ib) -= model.w21.entry(a, b) * m1;
            A(static_cast<Eigen::Index>(n + a), nb) -= model.w22.entry(a, b) * m2;
        }
    }

    const FieldPair f = forcing_f(model);
    const FieldPair zero = FieldPair::zero(model.domain);
    const FieldPair b_pair =
        add(sub(f, apply_sigma(zero, model)), apply_W(apply_rho(zero, model), model));
    const Eigen::VectorXd b = detail::flatten(b_pair);

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    const Eigen::VectorXd x = cod.solve(b);

    LinearCaseReport rep;
    rep.dimension = static_cast<std::size_t>(dim);
    rep.rank = static_cast<std::size_t>(cod.rank());
    rep.unique = (cod.rank() == dim);
    rep.solution = detail::unflatten(x, model.domain);
    rep.residual_norm = (A * x - b).norm();
    rep.rhs_norm = b.norm();
    rep.forcing_norm = detail::flatten(f).norm();
    const double scale = rep.forcing_norm > 0.0 ? rep.forcing_norm : std::max(rep.rhs_norm, 1.0);
    rep.tolerance = 1e-8 * scale;
    rep.solvable = rep.residual_norm <= rep.tolerance;
    return rep;
}

}  // namespace nfield
