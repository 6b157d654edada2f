#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>

#include "nfield/domain.hpp"
#include "nfield/errors.hpp"
#include "nfield/model.hpp"

namespace nfield {

// The stationary operator chain. An equilibrium of the closed loop is a
// fixed point of T acting on firing rates z = (z1, z2); equivalently a fixed
// point of Tcal acting on synaptic inputs x = (x1, x2), with
// z = rho(x). Tcal decomposes as Tcal(x) = W(rho(x)) - sigma(x) + f, and its
// fixed points coincide with those of pi(x) = H^-1(W(rho(x)) + f) where
// H(x) = x + sigma(x) is nodewise strictly increasing in x1.

/// rho(x1, x2) = (S1(x1), S2(x2)) nodewise.
inline FieldPair apply_rho(const FieldPair& x, const NeuralFieldModel& model) {
    FieldPair out = x;
    for (std::size_t a = 0; a < x.size(); ++a) {
        out.pop1[a] = model.S1(x.pop1[a]);
        out.pop2[a] = model.S2(x.pop2[a]);
    }
    return out;
}

/// sigma(x1, x2) = (g alpha S1(x1), 0) with g the stationary feedback gain.
/// The second component is exactly zero.
inline FieldPair apply_sigma(const FieldPair& x, const NeuralFieldModel& model) {
    const double g = model.controller.stationary_gain();
    FieldPair out = FieldPair::zero(x.domain());
    if (g != 0.0)
        for (std::size_t a = 0; a < x.size(); ++a)
            out.pop1[a] = g * model.alpha[a] * model.S1(x.pop1[a]);
    return out;
}

/// W(p)(r) = (sum_j <w_1j(r,.), p_j>, sum_j <w_2j(r,.), p_j>) via the
/// Nystrom matrices; linear in p.
inline FieldPair apply_W(const FieldPair& p, const NeuralFieldModel& model) {
    Field c1 = add(model.w11.apply(p.pop1), model.w12.apply(p.pop2));
    Field c2 = add(model.w21.apply(p.pop1), model.w22.apply(p.pop2));
    FieldPair out(std::move(c1), std::move(c2));
    if (!out.all_finite()) throw NonFiniteValue("W produced non-finite values");
    return out;
}

/// Forcing term f = (I1* + g alpha z_ref, I2*), g as in apply_sigma.
inline FieldPair forcing_f(const NeuralFieldModel& model) {
    const double g = model.controller.stationary_gain();
    FieldPair out(model.Istar1, model.Istar2);
    if (g != 0.0)
        for (std::size_t a = 0; a < out.size(); ++a)
            out.pop1[a] += g * model.alpha[a] * model.z_ref[a];
    return out;
}

/// H(x) = x + sigma(x).
inline FieldPair apply_H(const FieldPair& x, const NeuralFieldModel& model) {
    return add(x, apply_sigma(x, model));
}

namespace detail {

/// Solves s + c S(s) = v for the unique root of the strictly increasing
/// scalar map (c >= 0, S non-decreasing continuous). Safeguarded Newton with
/// bisection fallback; accepts on |residual| <= tol or once the bracket has
/// collapsed to machine resolution (for very large c the absolute residual
/// floor is c * eps and a tighter demand is unmeetable).
inline double invert_h_scalar(double v, double c, const Activation& S, double tol,
                              int max_iterations) {
    if (c == 0.0) return v;

    double lo, hi;
    if (S.is_bounded()) {
        const double m = c * S.bound();
        lo = v - m;
        hi = v + m;
    } else {
        // Expand geometrically around v until the root is bracketed.
        double step = std::max(1.0, std::abs(v));
        lo = v - step;
        hi = v + step;
        int guard = 0;
        while (lo + c * S(lo) > v) {
            step *= 2.0;
            lo -= step;
            if (++guard > 200) throw BracketFailure("invert_H: no lower bracket found");
        }
        guard = 0;
        while (hi + c * S(hi) < v) {
            step *= 2.0;
            hi += step;
            if (++guard > 200) throw BracketFailure("invert_H: no upper bracket found");
        }
    }
    if (lo + c * S(lo) > v || hi + c * S(hi) < v)
        throw BracketFailure("invert_H: supplied activation is not non-decreasing");

    double s = std::clamp(v - c * S(v), lo, hi);  // crude initial guess
    double dx_old = hi - lo;
    double dx = dx_old;
    for (int it = 0; it < max_iterations; ++it) {
        const double g = s + c * S(s);
        const double resid = g - v;
        if (std::abs(resid) <= tol) return s;

        // Maintain the bracket.
        if (resid > 0.0)
            hi = s;
        else
            lo = s;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() *
                           std::max(1.0, std::max(std::abs(lo), std::abs(hi))))
            return 0.5 * (lo + hi);

        // Take the Newton step only if it stays inside the bracket AND keeps
        // halving the step size; a step that fails either test (e.g. the
        // oscillation between a flat tail and a steep rise of c S) is
        // replaced by a bisection, which guarantees the bracket shrinks.
        const double deriv = 1.0 + c * S.slope(s);
        const double next = s - resid / deriv;
        dx_old = dx;
        if (next > lo && next < hi && std::abs(2.0 * resid) <= std::abs(dx_old * deriv)) {
            dx = s - next;
            s = next;
        } else {
            dx = 0.5 * (hi - lo);
            s = 0.5 * (lo + hi);
        }
    }
    throw ToleranceNotMet("invert_H: iteration cap hit before reaching tolerance");
}

}  // namespace detail

/// H^-1(v): solves x + sigma(x) = v. The second component is v2 exactly;
/// the first solves s + g alpha(r) S1(s) = v1(r) nodewise. With g = 0 the
/// identity path returns v bit-for-bit.
inline FieldPair invert_H(const FieldPair& v, const NeuralFieldModel& model, double tol,
                          int max_iterations = 200) {
    if (!(tol > 0.0)) throw Error("invert_H tolerance must be > 0");
    const double g = model.controller.stationary_gain();
    if (g == 0.0) return v;
    FieldPair out = v;
    for (std::size_t a = 0; a < v.size(); ++a) {
        const double c = g * model.alpha[a];
        out.pop1[a] = detail::invert_h_scalar(v.pop1[a], c, model.S1, tol, max_iterations);
    }
    if (!out.pop1.all_finite()) throw NonFiniteValue("invert_H produced non-finite values");
    return out;
}

/// Fixed-point map on firing rates:
///   T1(z)(r) = S1(I1*(r) - g alpha(r) (z1(r) - z_ref(r)) + sum_j (M_1j z_j)(r))
///   T2(z)(r) = S2(I2*(r) + sum_j (M_2j z_j)(r))
inline FieldPair apply_T(const FieldPair& z, const NeuralFieldModel& model) {
    const double g = model.controller.stationary_gain();
    Field c1 = add(model.w11.apply(z.pop1), model.w12.apply(z.pop2));
    Field c2 = add(model.w21.apply(z.pop1), model.w22.apply(z.pop2));
    FieldPair out(std::move(c1), std::move(c2));
    for (std::size_t a = 0; a < z.size(); ++a) {
        double arg1 = model.Istar1[a] + out.pop1[a];
        if (g != 0.0) arg1 -= g * model.alpha[a] * (z.pop1[a] - model.z_ref[a]);
        out.pop1[a] = model.S1(arg1);
        out.pop2[a] = model.S2(model.Istar2[a] + out.pop2[a]);
    }
    if (!out.all_finite()) throw NonFiniteValue("T produced non-finite values");
    return out;
}

/// Fixed-point map on synaptic inputs: Tcal(x) = W(rho(x)) - sigma(x) + f.
inline FieldPair apply_Tcal(const FieldPair& x, const NeuralFieldModel& model) {
    FieldPair out = add(sub(apply_W(apply_rho(x, model), model), apply_sigma(x, model)),
                        forcing_f(model));
    if (!out.all_finite()) throw NonFiniteValue("Tcal produced non-finite values");
    return out;
}

/// Schaefer map pi(x) = H^-1(W(rho(x)) + f); shares its fixed points with
/// Tcal up to the inversion tolerance.
inline FieldPair apply_pi(const FieldPair& x, const NeuralFieldModel& model, double tol) {
    return invert_H(add(apply_W(apply_rho(x, model), model), forcing_f(model)), model, tol);
}

/// A-priori fixed-point norm bound for bounded activations:
///   R = ||f|| + ||W||_HS sqrt(2 |Omega|) max(M1, M2) + ||g alpha||_inf M1 sqrt(|Omega|).
/// Mirrors the boundedness of the Schaefer set; nullopt when an activation
/// is unbounded.
inline std::optional<double> a_priori_bound(const NeuralFieldModel& model) {
    if (!model.activations_bounded()) return std::nullopt;
    const double M1 = model.S1.bound();
    const double M2 = model.S2.bound();
    const double vol = model.domain->volume();
    const double hs = std::sqrt(model.w11.hs_norm() * model.w11.hs_norm() +
                                model.w12.hs_norm() * model.w12.hs_norm() +
                                model.w21.hs_norm() * model.w21.hs_norm() +
                                model.w22.hs_norm() * model.w22.hs_norm());
    const double g = model.controller.stationary_gain();
    double galpha_inf = 0.0;
    for (std::size_t a = 0; a < model.node_count(); ++a)
        galpha_inf = std::max(galpha_inf, std::abs(g * model.alpha[a]));
    return pair_norm(forcing_f(model)) + hs * std::sqrt(2.0 * vol) * std::max(M1, M2) +
           galpha_inf * M1 * std::sqrt(vol);
}

}  // namespace nfield
