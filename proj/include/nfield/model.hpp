#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nfield/activation.hpp"
#include "nfield/domain.hpp"
#include "nfield/errors.hpp"
#include "nfield/kernel.hpp"

namespace nfield {

enum class ControlMode { open_loop, proportional, prop_int };

/// Feedback applied through the input in-homogeneity of population 1:
///   open_loop      u = 0 (or an externally supplied signal)
///   proportional   u = -k (z1 - z_ref)
///   prop_int       u = -k_P (z1 - z_ref) - k_I y1,  with  y1' = z1 - z_ref
struct Controller {
    ControlMode mode = ControlMode::open_loop;
    double k = 0.0;
    double k_P = 0.0;
    double k_I = 0.0;

    static Controller open_loop() { return Controller{}; }
    static Controller proportional(double gain) {
        return Controller{ControlMode::proportional, gain, 0.0, 0.0};
    }
    static Controller prop_int(double kp, double ki) {
        return Controller{ControlMode::prop_int, 0.0, kp, ki};
    }

    /// Gain entering the stationary operators (sigma, H, f): k for
    /// proportional feedback, k_P for PI, 0 in open loop.
    double stationary_gain() const {
        switch (mode) {
            case ControlMode::open_loop:
                return 0.0;
            case ControlMode::proportional:
                return k;
            case ControlMode::prop_int:
                return k_P;
        }
        return 0.0;
    }

    bool operator==(const Controller& o) const {
        return mode == o.mode && k == o.k && k_P == o.k_P && k_I == o.k_I;
    }
};

/// Pairwise transmission delays d(r_a, r_b) in [0, dbar], one matrix per
/// source population. Entries are indexed (target a, source b), row-major.
struct DelayMatrix {
    std::vector<double> entries;  // n*n, entry(a, b) = entries[a*n + b]
    std::size_t n = 0;
    double dbar = 0.0;
    bool zero = true;

    double entry(std::size_t a, std::size_t b) const { return zero ? 0.0 : entries[a * n + b]; }
};

inline DelayMatrix zero_delays(const DomainPtr& domain) {
    DelayMatrix d;
    d.n = domain->node_count();
    d.dbar = 0.0;
    d.zero = true;
    return d;
}

inline DelayMatrix constant_delays(const DomainPtr& domain, double c) {
    if (!(c >= 0.0)) throw Error("constant delay must be >= 0");
    DelayMatrix d;
    d.n = domain->node_count();
    d.dbar = c;
    d.zero = (c == 0.0);
    if (!d.zero) d.entries.assign(d.n * d.n, c);
    return d;
}

/// Finite propagation speed v > 0: d(r, r') = min(|r - r'| / v, cap).
inline DelayMatrix distance_proportional_delays(const DomainPtr& domain, double v, double cap) {
    if (!(v > 0.0)) throw Error("propagation speed must be > 0");
    if (!(cap >= 0.0)) throw Error("delay cap must be >= 0");
    DelayMatrix d;
    d.n = domain->node_count();
    d.dbar = cap;
    d.zero = (cap == 0.0);
    if (!d.zero) {
        d.entries.resize(d.n * d.n);
        const int q = domain->dimension();
        for (std::size_t a = 0; a < d.n; ++a) {
            const double* ra = domain->node(a);
            for (std::size_t b = 0; b < d.n; ++b) {
                const double* rb = domain->node(b);
                double dist2 = 0.0;
                for (int c = 0; c < q; ++c) dist2 += (ra[c] - rb[c]) * (ra[c] - rb[c]);
                d.entries[a * d.n + b] = std::min(std::sqrt(dist2) / v, cap);
            }
        }
    }
    return d;
}

/// The discretized closed-loop model: time constants, constant inputs,
/// synaptic kernels, transmission delays, activations, and the controller.
/// Immutable in use; validate() enforces the structural invariants once
/// after assembly.
struct NeuralFieldModel {
    DomainPtr domain;

    Field tau1, tau2;      // strictly positive time constants
    Field Istar1, Istar2;  // constant uncontrolled inputs
    Field alpha;           // input in-homogeneity, >= 0
    Field z_ref;           // target distribution

    KernelMatrix w11, w12, w21, w22;
    DelayMatrix d1, d2;

    Activation S1 = Activation::relu();
    Activation S2 = Activation::relu();

    Controller controller;

    std::size_t node_count() const { return domain->node_count(); }

    double dbar() const { return std::max(d1.dbar, d2.dbar); }

    bool activations_bounded() const { return S1.is_bounded() && S2.is_bounded(); }

    /// Theorem-level existence guarantees need bounded activations; runs with
    /// unbounded ones proceed but carry this warning flag.
    bool existence_not_guaranteed() const { return !activations_bounded(); }

    void validate() const {
        if (!domain) throw Error("model has no domain");
        auto check_field = [&](const Field& f, const char* name) {
            if (f.domain() != domain)
                throw DomainMismatch(std::string("model field '") + name +
                                     "' lives on a different domain");
            if (!f.all_finite())
                throw NonFiniteValue(std::string("model field '") + name +
                                     "' contains non-finite values");
        };
        check_field(tau1, "tau1");
        check_field(tau2, "tau2");
        check_field(Istar1, "I_star1");
        check_field(Istar2, "I_star2");
        check_field(alpha, "alpha");
        check_field(z_ref, "z_ref");
        for (std::size_t a = 0; a < node_count(); ++a) {
            if (!(tau1[a] > 0.0)) throw Error("tau1 must be strictly positive everywhere");
            if (!(tau2[a] > 0.0)) throw Error("tau2 must be strictly positive everywhere");
            if (!(alpha[a] >= 0.0)) throw Error("alpha must be nonnegative everywhere");
        }
        auto check_kernel = [&](const KernelMatrix& kmat, const char* name) {
            if (kmat.domain() != domain)
                throw DomainMismatch(std::string("kernel '") + name +
                                     "' lives on a different domain");
        };
        check_kernel(w11, "w11");
        check_kernel(w12, "w12");
        check_kernel(w21, "w21");
        check_kernel(w22, "w22");
        auto check_delay = [&](const DelayMatrix& d, const char* name) {
            if (!d.zero && d.n != node_count())
                throw DomainMismatch(std::string("delay matrix '") + name + "' has wrong size");
            if (!d.zero)
                for (double e : d.entries)
                    if (!(e >= 0.0) || e > d.dbar)
                        throw Error(std::string("delay entries of '") + name +
                                    "' must lie in [0, dbar]");
        };
        check_delay(d1, "d1");
        check_delay(d2, "d2");
        if (!(controller.k >= 0.0) || !(controller.k_P >= 0.0) || !(controller.k_I >= 0.0))
            throw Error("controller gains must be nonnegative");
        if (!S1.is_nondecreasing() || !S2.is_nondecreasing())
            throw Error("activations must be non-decreasing");
    }
};

}  // namespace nfield
