#pragma once

// Shared model factories for the unit suites.

#include <cmath>
#include <cstddef>
#include <vector>

#include "nfield/model.hpp"
#include "nfield/rng.hpp"

namespace helpers {

inline nfield::DomainPtr domain_1d(std::size_t n,
                                   nfield::QuadratureRule rule = nfield::QuadratureRule::trapezoid,
                                   double a = 0.0, double b = 1.0) {
    nfield::SpatialDomain::Spec s;
    s.dimension = 1;
    s.lower = {a, 0.0};
    s.upper = {b, 1.0};
    s.nodes_per_axis = {n, n};
    s.rule = rule;
    return nfield::build_domain(s);
}

inline nfield::KernelFn gaussian_profile(double amp, double width) {
    return [amp, width](const double* r, const double* s) {
        const double d = r[0] - s[0];
        return amp * std::exp(-d * d / (2.0 * width * width));
    };
}

inline nfield::KernelFn constant_profile(double c) {
    return [c](const double*, const double*) { return c; };
}

/// Two logistic populations on [0, 1] with mild Gaussian coupling, smooth
/// inputs, no delays, open loop. Contractive in the Schaefer map for every
/// feedback gain (total kernel mass well under one).
inline nfield::NeuralFieldModel smooth_model(const nfield::DomainPtr& dom) {
    using namespace nfield;
    NeuralFieldModel m;
    m.domain = dom;
    m.tau1 = Field::constant(dom, 1.0);
    m.tau2 = Field::constant(dom, 1.0);
    std::vector<double> i1(dom->node_count()), i2(dom->node_count());
    for (std::size_t a = 0; a < dom->node_count(); ++a) {
        const double r = dom->coordinate(a, 0);
        i1[a] = 0.2 * std::exp(-(r - 0.5) * (r - 0.5) / (2.0 * 0.15 * 0.15));
        i2[a] = 0.05 + 0.02 * r;
    }
    m.Istar1 = Field(dom, std::move(i1));
    m.Istar2 = Field(dom, std::move(i2));
    m.alpha = Field::constant(dom, 1.0);
    m.z_ref = Field::constant(dom, 0.5);
    m.w11 = assemble_kernel(dom, gaussian_profile(0.8, 0.3));
    m.w12 = assemble_kernel(dom, gaussian_profile(0.3, 0.25));
    m.w21 = assemble_kernel(dom, gaussian_profile(0.3, 0.25));
    m.w22 = assemble_kernel(dom, gaussian_profile(0.5, 0.2));
    m.d1 = zero_delays(dom);
    m.d2 = zero_delays(dom);
    m.S1 = Activation::logistic(1.0, 4.0, 0.0);
    m.S2 = Activation::logistic(1.0, 4.0, 0.0);
    m.controller = Controller::open_loop();
    return m;
}

/// Uncoupled pair (all kernels zero): each node follows its own scalar ODE.
inline nfield::NeuralFieldModel decoupled_model(const nfield::DomainPtr& dom) {
    using namespace nfield;
    NeuralFieldModel m = smooth_model(dom);
    m.Istar1 = Field::constant(dom, 0.0);
    m.Istar2 = Field::constant(dom, 0.0);
    m.w11 = zero_kernel(dom);
    m.w12 = zero_kernel(dom);
    m.w21 = zero_kernel(dom);
    m.w22 = zero_kernel(dom);
    m.S1 = Activation::logistic(1.0, 1.0, 0.0);
    m.S2 = Activation::logistic(1.0, 1.0, 0.0);
    return m;
}

/// Spatially homogeneous model: constant kernels, inputs, and coefficients,
/// so the equilibrium collapses to two scalar unknowns.
inline nfield::NeuralFieldModel homogeneous_model(const nfield::DomainPtr& dom, double c11,
                                                  double c12, double c21, double c22, double I1,
                                                  double I2) {
    using namespace nfield;
    NeuralFieldModel m = smooth_model(dom);
    m.Istar1 = Field::constant(dom, I1);
    m.Istar2 = Field::constant(dom, I2);
    m.w11 = c11 == 0.0 ? zero_kernel(dom) : assemble_kernel(dom, constant_profile(c11));
    m.w12 = c12 == 0.0 ? zero_kernel(dom) : assemble_kernel(dom, constant_profile(c12));
    m.w21 = c21 == 0.0 ? zero_kernel(dom) : assemble_kernel(dom, constant_profile(c21));
    m.w22 = c22 == 0.0 ? zero_kernel(dom) : assemble_kernel(dom, constant_profile(c22));
    return m;
}

inline nfield::FieldPair random_pair(const nfield::DomainPtr& dom, nfield::Rng& rng,
                                     double scale) {
    std::vector<double> v1(dom->node_count()), v2(dom->node_count());
    for (double& x : v1) x = rng.uniform(-scale, scale);
    for (double& x : v2) x = rng.uniform(-scale, scale);
    return nfield::FieldPair(nfield::Field(dom, std::move(v1)),
                             nfield::Field(dom, std::move(v2)));
}

}  // namespace helpers
