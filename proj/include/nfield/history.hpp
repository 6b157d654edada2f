#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "nfield/domain.hpp"
#include "nfield/errors.hpp"

namespace nfield {

/// Ring buffer of state snapshots on a uniform time grid t_k = k * dt, with a
/// constant prehistory pair standing in for every time at or below zero.
/// Capacity is sized from the maximum delay so that any lookup in
/// [t - dbar, t] stays resident; reaching below the resident window (other
/// than into the prehistory) throws HistoryUnderflow.
///
/// Positions are expressed in steps: pos = tau / dt. Positions within
/// 1e-9 * max(1, |pos|) of an integer snap to it, so an exactly-zero delay
/// reproduces stored samples bitwise instead of interpolating.
class HistoryBuffer {
public:
    HistoryBuffer(DomainPtr domain, FieldPair prehistory, double dt, double dbar)
        : domain_(std::move(domain)), prehistory_(std::move(prehistory)), dt_(dt) {
        if (prehistory_.domain() != domain_)
            throw DomainMismatch("prehistory pair lives on a different domain");
        if (!(dt_ > 0.0)) throw Error("history dt must be > 0");
        if (!(dbar >= 0.0) || !std::isfinite(dbar)) throw Error("history dbar must be finite, >= 0");
        capacity_ = static_cast<std::size_t>(std::ceil(dbar / dt_)) + 3;
        if (capacity_ < 4) capacity_ = 4;
        slots_.resize(capacity_, Slot{std::vector<double>(domain_->node_count()),
                                      std::vector<double>(domain_->node_count())});
    }

    const DomainPtr& domain() const { return domain_; }
    double dt() const { return dt_; }
    std::size_t capacity() const { return capacity_; }
    const FieldPair& prehistory() const { return prehistory_; }

    /// Step index of the newest snapshot; -1 before the first append.
    std::int64_t newest_step() const { return newest_; }

    std::int64_t oldest_resident_step() const {
        if (newest_ < 0) return 0;
        const std::int64_t lo = newest_ - static_cast<std::int64_t>(capacity_) + 1;
        return lo > 0 ? lo : 0;
    }

    /// Stores the state as the snapshot at step newest_step() + 1 (the first
    /// append lands on step 0, time zero).
    void append(const FieldPair& state) {
        if (state.domain() != domain_)
            throw DomainMismatch("appended state lives on a different domain");
        ++newest_;
        Slot& s = slots_[static_cast<std::size_t>(newest_ % static_cast<std::int64_t>(capacity_))];
        s.z1 = state.pop1.values();
        s.z2 = state.pop2.values();
    }

    /// Exact snapshot access. Steps below zero read the prehistory.
    double fetch(int pop, std::size_t node, std::int64_t step) const {
        if (step < 0) return pop == 1 ? prehistory_.pop1[node] : prehistory_.pop2[node];
        if (step > newest_)
            throw HistoryUnderflow("history fetch at step " + std::to_string(step) +
                                   " past newest " + std::to_string(newest_));
        if (step < oldest_resident_step())
            throw HistoryUnderflow("history fetch at step " + std::to_string(step) +
                                   " already evicted (oldest resident " +
                                   std::to_string(oldest_resident_step()) + ")");
        const Slot& s = slots_[static_cast<std::size_t>(step % static_cast<std::int64_t>(capacity_))];
        return pop == 1 ? s.z1[node] : s.z2[node];
    }

    /// Snap positions within 1e-9 * max(1, |pos|) of an integer step.
    static double snap(double pos) {
        const double k = std::nearbyint(pos);
        return std::abs(pos - k) <= 1e-9 * std::max(1.0, std::abs(pos)) ? k : pos;
    }

    /// Linear interpolation between adjacent snapshots at a (snapped)
    /// position in steps. Positions at or below zero return the prehistory
    /// (continuous with snapshot 0 when the run starts from it).
    double sample(int pop, std::size_t node, double pos) const {
        pos = snap(pos);
        if (pos <= 0.0) {
            if (pos == 0.0 && newest_ >= 0) return fetch(pop, node, 0);
            return pop == 1 ? prehistory_.pop1[node] : prehistory_.pop2[node];
        }
        const double fl = std::floor(pos);
        const std::int64_t lo = static_cast<std::int64_t>(fl);
        const double theta = pos - fl;
        const double v_lo = fetch(pop, node, lo);
        if (theta == 0.0) return v_lo;
        const double v_hi = fetch(pop, node, lo + 1);
        return (1.0 - theta) * v_lo + theta * v_hi;
    }

    /// Time-based lookup, tau in the same units as dt.
    double lookup(int pop, std::size_t node, double tau) const {
        return sample(pop, node, tau / dt_);
    }

private:
    struct Slot {
        std::vector<double> z1, z2;
    };

    DomainPtr domain_;
    FieldPair prehistory_;
    double dt_;
    std::size_t capacity_ = 0;
    std::int64_t newest_ = -1;
    std::vector<Slot> slots_;
};

}  // namespace nfield
