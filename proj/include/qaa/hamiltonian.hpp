#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "qaa/bitstring.hpp"
#include "qaa/rng.hpp"
#include "qaa/sat_instance.hpp"

namespace qaa {

/// An exact problem energy, stored as an integer count of 1/2 units.
class HalfUnits {
public:
    constexpr HalfUnits() = default;
    constexpr explicit HalfUnits(std::int64_t halves) : halves_(halves) {}

    static constexpr HalfUnits from_clauses(std::int64_t count) { return HalfUnits(2 * count); }

    constexpr std::int64_t halves() const noexcept { return halves_; }
    constexpr double value() const noexcept { return 0.5 * static_cast<double>(halves_); }

    constexpr HalfUnits& operator+=(HalfUnits o) noexcept
    {
        halves_ += o.halves_;
        return *this;
    }
    constexpr HalfUnits& operator-=(HalfUnits o) noexcept
    {
        halves_ -= o.halves_;
        return *this;
    }
    friend constexpr HalfUnits operator+(HalfUnits a, HalfUnits b) noexcept { return a += b; }
    friend constexpr HalfUnits operator-(HalfUnits a, HalfUnits b) noexcept { return a -= b; }
    friend constexpr HalfUnits operator-(HalfUnits a) noexcept { return HalfUnits(-a.halves_); }
    friend constexpr auto operator<=>(HalfUnits, HalfUnits) = default;

private:
    std::int64_t halves_ = 0;
};

/// Per-spin transverse weights c_i of the beginning Hamiltonian
/// sum_i c_i (1 - sigma_x^i) / 2.
class FieldCoefficients {
public:
    FieldCoefficients() = default;
    explicit FieldCoefficients(std::vector<double> c) : c_(std::move(c))
    {
        for (double v : c_)
            if (!(v > 0.0))
                throw std::invalid_argument("field coefficients must be strictly positive");
    }

    static FieldCoefficients uniform(std::size_t n) { return FieldCoefficients(std::vector<double>(n, 1.0)); }

    /// Each c_i is 1/2 or 3/2 with equal probability.
    static FieldCoefficients randomized(std::size_t n, Rng& rng)
    {
        std::vector<double> c(n);
        for (auto& v : c)
            v = (rng() >> 63) ? 1.5 : 0.5;
        return FieldCoefficients(std::move(c));
    }

    std::size_t size() const noexcept { return c_.size(); }
    double operator[](std::size_t i) const noexcept { return c_[i]; }
    const std::vector<double>& values() const noexcept { return c_; }
    double sum() const noexcept { return std::accumulate(c_.begin(), c_.end(), 0.0); }
    bool is_uniform() const noexcept
    {
        return std::all_of(c_.begin(), c_.end(), [](double v) { return v == 1.0; });
    }

    friend bool operator==(const FieldCoefficients&, const FieldCoefficients&) = default;

private:
    std::vector<double> c_;
};

/// H(s) = H0 + V with H0 = s H_P + offset and V = -sum_i gamma_i sigma_x^i.
struct Decomposition {
    double s = 0.0;
    double diagonal_offset = 0.0;
    std::vector<double> gamma;

    static Decomposition at(const FieldCoefficients& coeffs, double s)
    {
        if (!(s >= 0.0 && s <= 1.0))
            throw std::invalid_argument("schedule parameter s must lie in [0,1]");
        Decomposition d;
        d.s = s;
        d.diagonal_offset = (1.0 - s) * coeffs.sum() / 2.0;
        d.gamma.resize(coeffs.size());
        for (std::size_t i = 0; i < coeffs.size(); ++i)
            d.gamma[i] = (1.0 - s) * coeffs[i] / 2.0;
        return d;
    }
};

/// Problem Hamiltonian with a per-spin clause incidence index, so that local
/// quantities touch only the clauses containing the spin.
class ProblemHamiltonian {
public:
    explicit ProblemHamiltonian(Instance instance) : inst_(std::move(instance))
    {
        clauses_of_.resize(inst_.n);
        penalties_of_.resize(inst_.n);
        for (std::size_t c = 0; c < inst_.clauses.size(); ++c)
            for (auto s : inst_.clauses[c].spins) {
                if (s >= inst_.n)
                    throw std::invalid_argument("clause spin out of range");
                clauses_of_[s].push_back(static_cast<std::uint32_t>(c));
            }
        for (std::size_t p = 0; p < inst_.penalties.size(); ++p)
            for (auto s : inst_.penalties[p].spins) {
                if (s >= inst_.n)
                    throw std::invalid_argument("penalty spin out of range");
                penalties_of_[s].push_back(static_cast<std::uint32_t>(p));
            }
        neighbours_.assign(inst_.n, std::vector<std::uint8_t>(inst_.n, 0));
        auto link = [&](const SpinTriple& t) {
            for (auto a : t)
                for (auto b : t)
                    if (a != b)
                        neighbours_[a][b] = 1;
        };
        for (const auto& c : inst_.clauses)
            link(c.spins);
        for (const auto& p : inst_.penalties)
            link(p.spins);
    }

    const Instance& instance() const noexcept { return inst_; }
    std::size_t n() const noexcept { return inst_.n; }
    const std::vector<std::uint32_t>& clauses_of(std::size_t spin) const { return clauses_of_[spin]; }

    /// True when i != j share a clause or a penalty term.
    bool clausemates(std::size_t i, std::size_t j) const { return neighbours_[i][j] != 0; }

    HalfUnits energy(const BitString& z) const
    {
        check_size(z);
        std::int64_t halves = 0;
        for (const auto& c : inst_.clauses)
            if (c.violated_by(z))
                halves += 2;
        for (const auto& p : inst_.penalties)
            if (p.fires_on(z))
                halves += PenaltyTerm::weight_half_units;
        return HalfUnits(halves);
    }

    /// H_P(z with spin j = 0) - H_P(z with spin j = 1), from the clauses containing j.
    HalfUnits local_difference(const BitString& z, std::size_t j) const
    {
        std::int64_t halves = 0;
        for (auto ci : clauses_of_[j]) {
            const auto& c = inst_.clauses[ci];
            bool others_match = true;
            std::uint8_t wanted = 0;
            for (std::size_t k = 0; k < 3; ++k) {
                if (c.spins[k] == j)
                    wanted = c.pattern[k];
                else if (z[c.spins[k]] != (c.pattern[k] != 0))
                    others_match = false;
            }
            if (others_match)
                halves += wanted ? -2 : 2;
        }
        for (auto pi : penalties_of_[j]) {
            const auto& p = inst_.penalties[pi];
            bool others_match = true;
            std::uint8_t wanted = 0;
            for (std::size_t k = 0; k < 3; ++k) {
                if (p.spins[k] == j)
                    wanted = p.pattern[k];
                else if (z[p.spins[k]] != (p.pattern[k] != 0))
                    others_match = false;
            }
            if (others_match)
                halves += wanted ? -PenaltyTerm::weight_half_units : PenaltyTerm::weight_half_units;
        }
        return HalfUnits(halves);
    }

    /// H_P(z xor e_j) - H_P(z).
    HalfUnits flip_delta(const BitString& z, std::size_t j) const
    {
        const HalfUnits diff = local_difference(z, j);
        return z[j] ? diff : -diff;
    }

private:
    void check_size(const BitString& z) const
    {
        if (z.size() != inst_.n)
            throw std::invalid_argument("bit string length differs from instance size");
    }

    Instance inst_;
    std::vector<std::vector<std::uint32_t>> clauses_of_;
    std::vector<std::vector<std::uint32_t>> penalties_of_;
    std::vector<std::vector<std::uint8_t>> neighbours_;
};

/// Number of violated clauses, with multiplicity, plus 1/2 per firing penalty.
inline HalfUnits problem_energy(const Instance& inst, const BitString& z)
{
    if (z.size() != inst.n)
        throw std::invalid_argument("bit string length differs from instance size");
    std::int64_t halves = 0;
    for (const auto& c : inst.clauses)
        if (c.violated_by(z))
            halves += 2;
    for (const auto& p : inst.penalties)
        if (p.fires_on(z))
            halves += PenaltyTerm::weight_half_units;
    return HalfUnits(halves);
}

/// <z|H0|z> = s H_P(z) + (1 - s) sum_i c_i / 2.
inline double diag_energy(const Instance& inst, const FieldCoefficients& coeffs, double s, const BitString& z)
{
    if (!(s >= 0.0 && s <= 1.0))
        throw std::invalid_argument("schedule parameter s must lie in [0,1]");
    return s * problem_energy(inst, z).value() + (1.0 - s) * coeffs.sum() / 2.0;
}

/// f_j in H0 = g_j + f_j sigma_z^j, evaluated on the other spins of z (the
/// value of bit j in z is ignored). sigma_z is +1 on |0>.
inline double field_coefficient(const ProblemHamiltonian& hp, double s, std::size_t j, const BitString& z)
{
    return s * hp.local_difference(z, j).value() / 2.0;
}

inline double field_coefficient(const Instance& inst, double s, const FieldCoefficients& /*coeffs*/, std::size_t j,
                                const BitString& z)
{
    return field_coefficient(ProblemHamiltonian(inst), s, j, z);
}

} // namespace qaa
