#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "nfield/errors.hpp"

namespace nfield {

enum class QuadratureRule { midpoint, trapezoid };

/// Discretization of a compact axis-aligned box in R^q (q = 1 or 2) with
/// quadrature weights. Node ordering is row-major with axis 0 slowest:
/// in 2D the node index is a = i0 * n1 + i1.
///
/// Immutable after construction; share via shared_ptr. All discrete L2
/// geometry (inner products, norms, kernel operators) runs through the
/// weights stored here.
class SpatialDomain {
public:
    struct Spec {
        int dimension = 1;                      // 1 or 2
        std::array<double, 2> lower{0.0, 0.0};  // a_d
        std::array<double, 2> upper{1.0, 1.0};  // b_d
        std::array<std::size_t, 2> nodes_per_axis{2, 2};
        QuadratureRule rule = QuadratureRule::trapezoid;
    };

    int dimension() const { return spec_.dimension; }
    QuadratureRule rule() const { return spec_.rule; }
    const Spec& spec() const { return spec_; }
    std::size_t node_count() const { return weights_.size(); }

    /// Coordinate of node a along axis d.
    double coordinate(std::size_t a, int d) const { return coords_[a * spec_.dimension + d]; }

    /// All coordinates of node a (length = dimension).
    const double* node(std::size_t a) const { return &coords_[a * spec_.dimension]; }

    double weight(std::size_t a) const { return weights_[a]; }
    const std::vector<double>& weights() const { return weights_; }

    /// Measure of the box, product of the per-axis extents.
    double volume() const { return volume_; }

    friend std::shared_ptr<const SpatialDomain> build_domain(const Spec& spec);

private:
    SpatialDomain() = default;

    Spec spec_;
    std::vector<double> coords_;   // node-major, then axis
    std::vector<double> weights_;
    double volume_ = 0.0;
};

using DomainPtr = std::shared_ptr<const SpatialDomain>;

/// Builds the uniform-grid discretization for the requested rule.
///   midpoint:  n cells of width h = (b-a)/n, nodes at cell centers, weight h.
///   trapezoid: n nodes at spacing h = (b-a)/(n-1), end weights h/2.
/// 2D grids are tensor products of the per-axis rules.
inline std::shared_ptr<const SpatialDomain> build_domain(const SpatialDomain::Spec& spec) {
    if (spec.dimension != 1 && spec.dimension != 2)
        throw InvalidExtent("domain dimension must be 1 or 2, got " + std::to_string(spec.dimension));
    for (int d = 0; d < spec.dimension; ++d) {
        if (!(spec.lower[d] < spec.upper[d]))
            throw InvalidExtent("extent on axis " + std::to_string(d) + " must satisfy a < b");
        if (spec.nodes_per_axis[d] < 2)
            throw TooFewNodes("need at least 2 nodes on axis " + std::to_string(d));
    }

    std::vector<std::vector<double>> axis_coords(spec.dimension);
    std::vector<std::vector<double>> axis_weights(spec.dimension);
    for (int d = 0; d < spec.dimension; ++d) {
        const double a = spec.lower[d];
        const double b = spec.upper[d];
        const std::size_t n = spec.nodes_per_axis[d];
        axis_coords[d].resize(n);
        axis_weights[d].resize(n);
        if (spec.rule == QuadratureRule::midpoint) {
            const double h = (b - a) / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                axis_coords[d][i] = a + (static_cast<double>(i) + 0.5) * h;
                axis_weights[d][i] = h;
            }
        } else {
            const double h = (b - a) / static_cast<double>(n - 1);
            for (std::size_t i = 0; i < n; ++i) {
                axis_coords[d][i] = a + static_cast<double>(i) * h;
                axis_weights[d][i] = (i == 0 || i + 1 == n) ? 0.5 * h : h;
            }
        }
    }

    auto dom = std::shared_ptr<SpatialDomain>(new SpatialDomain());
    dom->spec_ = spec;
    dom->volume_ = 1.0;
    for (int d = 0; d < spec.dimension; ++d) dom->volume_ *= spec.upper[d] - spec.lower[d];

    if (spec.dimension == 1) {
        const std::size_t n = spec.nodes_per_axis[0];
        dom->coords_ = axis_coords[0];
        dom->weights_ = axis_weights[0];
        (void)n;
    } else {
        const std::size_t n0 = spec.nodes_per_axis[0];
        const std::size_t n1 = spec.nodes_per_axis[1];
        dom->coords_.resize(n0 * n1 * 2);
        dom->weights_.resize(n0 * n1);
        for (std::size_t i0 = 0; i0 < n0; ++i0) {
            for (std::size_t i1 = 0; i1 < n1; ++i1) {
                const std::size_t a = i0 * n1 + i1;
                dom->coords_[a * 2 + 0] = axis_coords[0][i0];
                dom->coords_[a * 2 + 1] = axis_coords[1][i1];
                dom->weights_[a] = axis_weights[0][i0] * axis_weights[1][i1];
            }
        }
    }
    return dom;
}

/// Grid samples of one scalar state over a SpatialDomain.
class Field {
public:
    Field() = default;
    Field(DomainPtr domain, std::vector<double> values)
        : domain_(std::move(domain)), values_(std::move(values)) {
        if (values_.size() != domain_->node_count())
            throw DomainMismatch("field length does not match domain node count");
    }

    static Field constant(DomainPtr domain, double value) {
        std::vector<double> v(domain->node_count(), value);
        return Field(std::move(domain), std::move(v));
    }

    static Field zero(DomainPtr domain) { return constant(std::move(domain), 0.0); }

    const DomainPtr& domain() const { return domain_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t a) const { return values_[a]; }
    double& operator[](std::size_t a) { return values_[a]; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    bool all_finite() const {
        for (double v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    DomainPtr domain_;
    std::vector<double> values_;
};

/// States of both populations on one shared domain.
struct FieldPair {
    Field pop1;
    Field pop2;

    FieldPair() = default;
    FieldPair(Field p1, Field p2) : pop1(std::move(p1)), pop2(std::move(p2)) {
        if (pop1.domain() != pop2.domain())
            throw DomainMismatch("pair components must share one domain");
    }

    static FieldPair constant(DomainPtr domain, double v1, double v2) {
        return FieldPair(Field::constant(domain, v1), Field::constant(domain, v2));
    }

    static FieldPair zero(DomainPtr domain) { return constant(std::move(domain), 0.0, 0.0); }

    const DomainPtr& domain() const { return pop1.domain(); }
    std::size_t size() const { return pop1.size(); }
    bool all_finite() const { return pop1.all_finite() && pop2.all_finite(); }
};

inline void require_same_domain(const Field& f, const Field& g) {
    if (f.domain() != g.domain()) throw DomainMismatch("fields live on different domains");
}

/// Quadrature-weighted L2 inner product, sum_a q_a f_a g_a.
/// Summation order is fixed ascending in a for reproducibility.
inline double l2_inner(const Field& f, const Field& g) {
    require_same_domain(f, g);
    const auto& q = f.domain()->weights();
    double acc = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) acc += q[a] * f[a] * g[a];
    return acc;
}

inline double l2_norm(const Field& f) { return std::sqrt(l2_inner(f, f)); }

/// Norm of L2(Omega)^2: sqrt(||f1||^2 + ||f2||^2).
inline double pair_norm(const FieldPair& p) {
    return std::sqrt(l2_inner(p.pop1, p.pop1) + l2_inner(p.pop2, p.pop2));
}

inline double linf_norm(const Field& f) {
    double m = 0.0;
    for (std::size_t a = 0; a < f.size(); ++a) m = std::max(m, std::abs(f[a]));
    return m;
}

inline double pair_linf(const FieldPair& p) {
    return std::max(linf_norm(p.pop1), linf_norm(p.pop2));
}

// Elementwise helpers used throughout the operator and solver layers.

inline Field add(const Field& f, const Field& g) {
    require_same_domain(f, g);
    Field out = f;
    for (std::size_t a = 0; a < out.size(); ++a) out[a] += g[a];
    return out;
}

inline Field sub(const Field& f, const Field& g) {
    require_same_domain(f, g);
    Field out = f;
    for (std::size_t a = 0; a < out.size(); ++a) out[a] -= g[a];
    return out;
}

inline Field scale(const Field& f, double s) {
    Field out = f;
    for (std::size_t a = 0; a < out.size(); ++a) out[a] *= s;
    return out;
}

inline FieldPair add(const FieldPair& p, const FieldPair& q) {
    return FieldPair(add(p.pop1, q.pop1), add(p.pop2, q.pop2));
}

inline FieldPair sub(const FieldPair& p, const FieldPair& q) {
    return FieldPair(sub(p.pop1, q.pop1), sub(p.pop2, q.pop2));
}

inline FieldPair scale(const FieldPair& p, double s) {
    return FieldPair(scale(p.pop1, s), scale(p.pop2, s));
}

/// (1 - theta) * p + theta * q.
inline FieldPair blend(const FieldPair& p, const FieldPair& q, double theta) {
    FieldPair out = p;
    for (std::size_t a = 0; a < out.size(); ++a) {
        out.pop1[a] = (1.0 - theta) * p.pop1[a] + theta * q.pop1[a];
        out.pop2[a] = (1.0 - theta) * p.pop2[a] + theta * q.pop2[a];
    }
    return out;
}

}  // namespace nfield
