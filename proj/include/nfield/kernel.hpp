#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nfield/domain.hpp"
#include "nfield/errors.hpp"

namespace nfield {

/// Pointwise synaptic kernel w(r, r'); both arguments are node coordinate
/// arrays of length domain->dimension().
using KernelFn = std::function<double(const double*, const double*)>;

/// Nystrom realization of the Hilbert-Schmidt integral operator
/// z -> integral_Omega w(., r') z(r') dr'. Entry (a, b) stores
/// w(r_a, r_b) * q_b so a matrix-vector product approximates the integral
/// at every node. Immutable after assembly.
class KernelMatrix {
public:
    KernelMatrix() = default;

    const DomainPtr& domain() const { return domain_; }
    std::size_t size() const { return n_; }
    double entry(std::size_t a, std::size_t b) const { return data_[a * n_ + b]; }
    const std::vector<double>& data() const { return data_; }

    /// Discrete Hilbert-Schmidt norm sqrt(sum_ab q_a q_b w(r_a, r_b)^2),
    /// recorded at assembly time from the raw kernel samples.
    double hs_norm() const { return hs_norm_; }

    bool is_zero() const { return zero_; }

    /// (M v)_a = sum_b w(r_a, r_b) q_b v_b, summed ascending in b.
    Field apply(const Field& v) const {
        if (v.domain() != domain_) throw DomainMismatch("kernel and field domains differ");
        std::vector<double> out(n_, 0.0);
        if (!zero_) {
            for (std::size_t a = 0; a < n_; ++a) {
                const double* row = &data_[a * n_];
                double acc = 0.0;
                for (std::size_t b = 0; b < n_; ++b) acc += row[b] * v[b];
                out[a] = acc;
            }
        }
        return Field(domain_, std::move(out));
    }

    friend KernelMatrix assemble_kernel(const DomainPtr& domain, const KernelFn& kernel_fn);
    friend KernelMatrix zero_kernel(const DomainPtr& domain);

private:
    DomainPtr domain_;
    std::size_t n_ = 0;
    std::vector<double> data_;
    double hs_norm_ = 0.0;
    bool zero_ = true;
};

/// Samples the kernel on all node pairs and folds in the column quadrature
/// weights. Throws NonFiniteKernel on any non-finite sample.
inline KernelMatrix assemble_kernel(const DomainPtr& domain, const KernelFn& kernel_fn) {
    KernelMatrix m;
    m.domain_ = domain;
    m.n_ = domain->node_count();
    m.data_.resize(m.n_ * m.n_);
    const auto& q = domain->weights();
    double hs2 = 0.0;
    bool any_nonzero = false;
    for (std::size_t a = 0; a < m.n_; ++a) {
        double row_hs = 0.0;
        for (std::size_t b = 0; b < m.n_; ++b) {
            const double w = kernel_fn(domain->node(a), domain->node(b));
            if (!std::isfinite(w))
                throw NonFiniteKernel("kernel non-finite at node pair (" + std::to_string(a) +
                                      ", " + std::to_string(b) + ")");
            m.data_[a * m.n_ + b] = w * q[b];
            row_hs += q[b] * w * w;
            any_nonzero = any_nonzero || (w != 0.0);
        }
        hs2 += q[a] * row_hs;
    }
    m.hs_norm_ = std::sqrt(hs2);
    m.zero_ = !any_nonzero;
    return m;
}

/// Zero operator; apply() short-circuits to the zero field.
inline KernelMatrix zero_kernel(const DomainPtr& domain) {
    KernelMatrix m;
    m.domain_ = domain;
    m.n_ = domain->node_count();
    m.data_.assign(m.n_ * m.n_, 0.0);
    m.hs_norm_ = 0.0;
    m.zero_ = true;
    return m;
}

}  // namespace nfield
