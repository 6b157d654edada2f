#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "nfield/errors.hpp"

namespace nfield {

enum class ActivationKind { logistic, saturating_linear, linear, relu };

/// Non-decreasing continuous activation S: R -> R from a fixed catalog:
///   logistic(L, beta, theta)       S(s) = L / (1 + exp(-beta (s - theta)))
///   saturating_linear(m, lo, hi)   S(s) = clamp(m s, lo, hi)
///   linear(m, c)                   S(s) = m s + c
///   relu                           S(s) = max(0, s)
/// Carries the monotonicity/boundedness metadata the equilibrium theory
/// needs: logistic and saturating_linear are bounded, linear is bounded only
/// for m = 0, relu is unbounded.
class Activation {
public:
    static Activation logistic(double L, double beta, double theta) {
        if (!(L > 0.0)) throw Error("logistic amplitude L must be > 0");
        if (!(beta > 0.0)) throw Error("logistic steepness beta must be > 0");
        Activation s;
        s.kind_ = ActivationKind::logistic;
        s.p0_ = L;
        s.p1_ = beta;
        s.p2_ = theta;
        return s;
    }

    static Activation saturating_linear(double m, double lo, double hi) {
        if (!(m >= 0.0)) throw Error("saturating_linear slope m must be >= 0");
        if (!(lo <= hi)) throw Error("saturating_linear clamp requires lo <= hi");
        Activation s;
        s.kind_ = ActivationKind::saturating_linear;
        s.p0_ = m;
        s.p1_ = lo;
        s.p2_ = hi;
        return s;
    }

    static Activation linear(double m, double c) {
        if (!(m >= 0.0)) throw Error("linear slope m must be >= 0");
        Activation s;
        s.kind_ = ActivationKind::linear;
        s.p0_ = m;
        s.p1_ = c;
        return s;
    }

    static Activation relu() {
        Activation s;
        s.kind_ = ActivationKind::relu;
        return s;
    }

    ActivationKind kind() const { return kind_; }
    double param0() const { return p0_; }
    double param1() const { return p1_; }
    double param2() const { return p2_; }

    double operator()(double s) const {
        switch (kind_) {
            case ActivationKind::logistic:
                return p0_ / (1.0 + std::exp(-p1_ * (s - p2_)));
            case ActivationKind::saturating_linear:
                return std::clamp(p0_ * s, p1_, p2_);
            case ActivationKind::linear:
                return p0_ * s + p1_;
            case ActivationKind::relu:
                return s > 0.0 ? s : 0.0;
        }
        return 0.0;
    }

    /// Derivative (one-sided at kinks), used only to speed up root finding.
    double slope(double s) const {
        switch (kind_) {
            case ActivationKind::logistic: {
                const double v = (*this)(s) / p0_;  // in [0, 1]
                return p1_ * p0_ * v * (1.0 - v);
            }
            case ActivationKind::saturating_linear: {
                const double raw = p0_ * s;
                return (raw > p1_ && raw < p2_) ? p0_ : 0.0;
            }
            case ActivationKind::linear:
                return p0_;
            case ActivationKind::relu:
                return s > 0.0 ? 1.0 : 0.0;
        }
        return 0.0;
    }

    bool is_nondecreasing() const { return true; }

    bool is_bounded() const {
        switch (kind_) {
            case ActivationKind::logistic:
                return true;
            case ActivationKind::saturating_linear:
                return true;
            case ActivationKind::linear:
                return p0_ == 0.0;
            case ActivationKind::relu:
                return false;
        }
        return false;
    }

    /// M with |S(s)| <= M everywhere; only valid when is_bounded().
    double bound() const {
        switch (kind_) {
            case ActivationKind::logistic:
                return p0_;
            case ActivationKind::saturating_linear:
                return std::max(std::abs(p1_), std::abs(p2_));
            case ActivationKind::linear:
                return std::abs(p1_);
            case ActivationKind::relu:
                return std::numeric_limits<double>::infinity();
        }
        return 0.0;
    }

    /// Global Lipschitz constant.
    double lipschitz() const {
        switch (kind_) {
            case ActivationKind::logistic:
                return p0_ * p1_ / 4.0;
            case ActivationKind::saturating_linear:
                return p0_;
            case ActivationKind::linear:
                return p0_;
            case ActivationKind::relu:
                return 1.0;
        }
        return 0.0;
    }

    double range_min() const {
        switch (kind_) {
            case ActivationKind::logistic:
                return 0.0;
            case ActivationKind::saturating_linear:
                return p1_;
            case ActivationKind::linear:
                return p0_ == 0.0 ? p1_ : -std::numeric_limits<double>::infinity();
            case ActivationKind::relu:
                return 0.0;
        }
        return 0.0;
    }

    double range_max() const {
        switch (kind_) {
            case ActivationKind::logistic:
                return p0_;
            case ActivationKind::saturating_linear:
                return p2_;
            case ActivationKind::linear:
                return p0_ == 0.0 ? p1_ : std::numeric_limits<double>::infinity();
            case ActivationKind::relu:
                return std::numeric_limits<double>::infinity();
        }
        return 0.0;
    }

    /// Whether range_min / range_max are attained (closed ends). The logistic
    /// approaches its bounds without reaching them.
    bool range_min_attained() const {
        return kind_ != ActivationKind::logistic && std::isfinite(range_min());
    }
    bool range_max_attained() const {
        return kind_ != ActivationKind::logistic && std::isfinite(range_max());
    }

    /// Monotone inverse by bisection. Returns the midpoint of the preimage
    /// interval when S is flat at level z; when that interval is half
    /// infinite (an attained clamp value), returns its finite endpoint.
    /// nullopt when z has no finite preimage (outside the attainable range,
    /// or at an unattained bound like the logistic asymptotes).
    std::optional<double> try_invert(double z) const {
        if (kind_ == ActivationKind::linear) {
            if (p0_ == 0.0) return z == p1_ ? std::optional<double>(0.0) : std::nullopt;
            return (z - p1_) / p0_;
        }
        const double rmin = range_min();
        const double rmax = range_max();
        if (z < rmin || z > rmax) return std::nullopt;
        if (z == rmin && !range_min_attained()) return std::nullopt;
        if (z == rmax && !range_max_attained()) return std::nullopt;
        if (kind_ == ActivationKind::saturating_linear && p0_ == 0.0) {
            // Constant activation: the whole line is the preimage of its value.
            return z == (*this)(0.0) ? std::optional<double>(0.0) : std::nullopt;
        }

        const bool left_infinite = (z == rmin && range_min_attained());
        const bool right_infinite = (z == rmax && range_max_attained());

        double left = left_infinite ? -std::numeric_limits<double>::infinity()
                                    : leftmost_at_or_above(z);
        double right = right_infinite ? std::numeric_limits<double>::infinity()
                                      : rightmost_at_or_below(z);
        if (left_infinite && right_infinite) return 0.0;  // cannot happen for this catalog
        if (left_infinite) return right;
        if (right_infinite) return left;
        return 0.5 * (left + right);
    }

    bool operator==(const Activation& o) const {
        return kind_ == o.kind_ && p0_ == o.p0_ && p1_ == o.p1_ && p2_ == o.p2_;
    }

private:
    // Smallest s with S(s) >= z, to bisection accuracy.
    double leftmost_at_or_above(double z) const {
        double hi = first_with([&](double s) { return (*this)(s) >= z; }, +1.0);
        double lo = first_with([&](double s) { return (*this)(s) < z; }, -1.0);
        for (int it = 0; it < 200 && tight(lo, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((*this)(mid) >= z)
                hi = mid;
            else
                lo = mid;
        }
        return hi;
    }

    // Largest s with S(s) <= z, to bisection accuracy.
    double rightmost_at_or_below(double z) const {
        double lo = first_with([&](double s) { return (*this)(s) <= z; }, -1.0);
        double hi = first_with([&](double s) { return (*this)(s) > z; }, +1.0);
        for (int it = 0; it < 200 && tight(lo, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((*this)(mid) <= z)
                lo = mid;
            else
                hi = mid;
        }
        return lo;
    }

    static bool tight(double lo, double hi) {
        return hi - lo > 1e-14 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    }

    // First point in the given direction satisfying pred, by geometric sweep.
    template <class Pred>
    double first_with(Pred pred, double direction) const {
        double s = 0.0;
        double step = 1.0;
        for (int it = 0; it < 2048; ++it) {
            if (pred(s)) return s;
            s += direction * step;
            step *= 2.0;
        }
        throw BracketFailure("activation inverse: sweep failed to bracket the level");
    }

    ActivationKind kind_ = ActivationKind::relu;
    double p0_ = 0.0, p1_ = 0.0, p2_ = 0.0;
};

}  // namespace nfield
