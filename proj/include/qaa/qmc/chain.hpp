#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qaa/hamiltonian.hpp"
#include "qaa/qmc/kernels.hpp"
#include "qaa/qmc/path.hpp"
#include "qaa/rng.hpp"
#include "qaa/sat_instance.hpp"

namespace qaa::qmc {

/// Stretch of imaginary time on which every spin other than j is constant.
struct Segment {
    double start = 0.0;
    double length = 0.0;
    /// Local field f_j on the segment: H0 = g + h sigma_z^j.
    double h = 0.0;
};

/// One flip event of the whole path.
struct Event {
    double time;
    std::uint32_t spin;
};

namespace detail {

inline void collect_events(const WorldlinePath& path, std::size_t skip, std::vector<Event>& events)
{
    events.clear();
    for (std::size_t i = 0; i < path.flips.size(); ++i) {
        if (i == skip)
            continue;
        for (double t : path.flips[i])
            events.push_back({t, static_cast<std::uint32_t>(i)});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.time < b.time; });
}

} // namespace detail

/// Cuts [0, beta) at every flip of the other spins. Segments with equal h are
/// kept separate.
inline void segments_for_spin(const WorldlinePath& path, std::size_t j, const ProblemHamiltonian& hp, double s,
                              std::vector<Segment>& segs, std::vector<Event>& events)
{
    if (j >= path.n())
        throw std::out_of_range("spin index out of range");
    detail::collect_events(path, j, events);
    BitString z = path.start;
    segs.clear();
    double h = s * hp.local_difference(z, j).value() / 2.0;
    double t0 = 0.0;
    for (const auto& e : events) {
        segs.push_back({t0, e.time - t0, h});
        t0 = e.time;
        z.flip(e.spin);
        if (hp.clausemates(j, e.spin))
            h = s * hp.local_difference(z, j).value() / 2.0;
    }
    segs.push_back({t0, path.beta - t0, h});
}

inline std::vector<Segment> segments_for_spin(const WorldlinePath& path, std::size_t j, const Instance& inst,
                                              const FieldCoefficients& /*coeffs*/, double s)
{
    std::vector<Segment> segs;
    std::vector<Event> events;
    segments_for_spin(path, j, ProblemHamiltonian(inst), s, segs, events);
    return segs;
}

/// Thermal averages along one path: (1/beta) int H0 dt, transitions, (1/beta) int W dt.
struct QmcSample {
    double diag_integral = 0.0;
    std::size_t transitions = 0;
    double weight_integral = 0.0;
};

/// Heat-bath resampling of whole single-spin worldlines at fixed s.
class HeatBath {
public:
    HeatBath(const ProblemHamiltonian& hp, const FieldCoefficients& coeffs, double s,
             std::uint64_t retry_cap = default_retry_cap)
        : hp_(hp), coeffs_(coeffs), s_(s), retry_cap_(retry_cap)
    {
        if (!(s >= 0.0 && s <= 1.0))
            throw std::invalid_argument("schedule parameter s must lie in [0,1]");
        if (coeffs.size() != hp.n())
            throw std::invalid_argument("coefficient count differs from instance size");
        gamma_.resize(hp.n());
        for (std::size_t i = 0; i < hp.n(); ++i)
            gamma_[i] = (1.0 - s) * coeffs[i] / 2.0;
        offset_ = (1.0 - s) * coeffs.sum() / 2.0;
    }

    const SamplerStats& stats() const noexcept { return stats_; }
    double s() const noexcept { return s_; }

    /// Replaces spin j's worldline by a draw from its conditional given the others.
    void update(WorldlinePath& path, std::size_t j, Rng& rng)
    {
        check(path);
        segments_for_spin(path, j, hp_, s_, segs_, events_);
        const double c = gamma_[j];
        auto& mine = path.flips[j];
        if (c == 0.0) {
            // no transverse field: constant spin with weight exp(-/+ int h dt)
            double area = 0.0;
            for (const auto& sg : segs_)
                area += sg.length * sg.h;
            const double p1 = 1.0 / (1.0 + std::exp(-2.0 * area));
            path.start.set(j, uniform01(rng) < p1);
            mine.clear();
            return;
        }
        mats_.resize(segs_.size());
        for (std::size_t k = 0; k < segs_.size(); ++k)
            mats_[k] = transfer_matrix(segs_[k].length, segs_[k].h, c);
        sample_boundaries(mats_, rng, bits_, ws_);
        path.start.set(j, bits_[0] != 0);
        mine.clear();
        const std::size_t q = segs_.size();
        for (std::size_t k = 0; k < q; ++k) {
            const auto s_out = bits_[(k + 1) % q];
            for (;;) {
                offsets_.clear();
                sample_subpath(segs_[k].length, segs_[k].h, c, bits_[k], s_out, rng, offsets_, stats_, retry_cap_);
                const double end = k + 1 < q ? segs_[k + 1].start : path.beta;
                const std::size_t before = mine.size();
                bool ok = true;
                for (double tau : offsets_) {
                    const double t = segs_[k].start + tau;
                    if (!(t < end) || (!mine.empty() && !(t > mine.back()))) {
                        ok = false;
                        break;
                    }
                    mine.push_back(t);
                }
                if (ok)
                    break;
                mine.resize(before); // absolute times collided after rounding; redraw the segment
            }
        }
    }

    /// n updates on uniformly chosen spins.
    void sweep(WorldlinePath& path, Rng& rng)
    {
        const std::size_t n = path.n();
        for (std::size_t k = 0; k < n; ++k)
            update(path, static_cast<std::size_t>(uniform_index(rng, n)), rng);
    }

    QmcSample measure(const WorldlinePath& path) const
    {
        check(path);
        detail::collect_events(path, path.n(), events_);
        BitString z = path.start;
        HalfUnits e = hp_.energy(z);
        double w = static_cast<double>(z.hamming_weight());
        double t0 = 0.0;
        double e_int = 0.0;
        double w_int = 0.0;
        for (const auto& ev : events_) {
            const double dt = ev.time - t0;
            e_int += dt * e.value();
            w_int += dt * w;
            e += hp_.flip_delta(z, ev.spin);
            w += z[ev.spin] ? -1.0 : 1.0;
            z.flip(ev.spin);
            t0 = ev.time;
        }
        const double dt = path.beta - t0;
        e_int += dt * e.value();
        w_int += dt * w;
        QmcSample out;
        out.diag_integral = s_ * e_int / path.beta + offset_;
        out.weight_integral = w_int / path.beta;
        out.transitions = events_.size();
        return out;
    }

private:
    void check(const WorldlinePath& path) const
    {
        if (path.n() != hp_.n() || path.flips.size() != hp_.n())
            throw std::invalid_argument("path size differs from instance size");
    }

    const ProblemHamiltonian& hp_;
    FieldCoefficients coeffs_;
    double s_;
    std::uint64_t retry_cap_;
    std::vector<double> gamma_;
    double offset_ = 0.0;
    SamplerStats stats_;

    std::vector<Segment> segs_;
    mutable std::vector<Event> events_;
    std::vector<TransferMatrix> mats_;
    std::vector<std::uint8_t> bits_;
    std::vector<double> offsets_;
    BoundaryWorkspace ws_;
};

inline void heat_bath_update(WorldlinePath& path, std::size_t j, const Instance& inst, const FieldCoefficients& coeffs,
                             double s, Rng& rng)
{
    const ProblemHamiltonian hp(inst);
    HeatBath hb(hp, coeffs, s);
    hb.update(path, j, rng);
}

inline void sweep(WorldlinePath& path, const Instance& inst, const FieldCoefficients& coeffs, double s, Rng& rng)
{
    const ProblemHamiltonian hp(inst);
    HeatBath hb(hp, coeffs, s);
    hb.sweep(path, rng);
}

inline QmcSample measure(const WorldlinePath& path, const Instance& inst, const FieldCoefficients& coeffs, double s)
{
    const ProblemHamiltonian hp(inst);
    return HeatBath(hp, coeffs, s).measure(path);
}

} // namespace qaa::qmc
