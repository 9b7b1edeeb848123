#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qaa/bitstring.hpp"
#include "qaa/format.hpp"
#include "qaa/hamiltonian.hpp"
#include "qaa/rng.hpp"
#include "qaa/sat_instance.hpp"

namespace qaa {

class ZeroDenominator : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CoefficientsNotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateRow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Level { lower, upper };

/// Which plant ends up lower and which upper at s = 1. With a penalty the
/// upper plant is the one it fires on; without one the order is plants[0], plants[1].
struct PlantRoles {
    std::size_t lower = 0;
    std::size_t upper = 1;
};

inline PlantRoles plant_roles(const Instance& inst)
{
    if (inst.plants.size() != 2)
        throw std::invalid_argument("expected a double-plant instance");
    if (inst.penalties.empty())
        return {};
    const bool fires0 = std::any_of(inst.penalties.begin(), inst.penalties.end(),
                                    [&](const PenaltyTerm& p) { return p.fires_on(inst.plants[0]); });
    const bool fires1 = std::any_of(inst.penalties.begin(), inst.penalties.end(),
                                    [&](const PenaltyTerm& p) { return p.fires_on(inst.plants[1]); });
    if (fires0 == fires1)
        throw std::invalid_argument("penalty must lift exactly one plant");
    return fires0 ? PlantRoles{1, 0} : PlantRoles{0, 1};
}

/// Energy gaps H_P(z xor e_i) - H_P(z), exact in half units.
inline std::vector<HalfUnits> single_flip_gaps(const ProblemHamiltonian& hp, const BitString& z)
{
    std::vector<HalfUnits> gaps(hp.n());
    for (std::size_t i = 0; i < hp.n(); ++i)
        gaps[i] = hp.flip_delta(z, i);
    return gaps;
}

namespace detail {

inline double checked_gap(HalfUnits g, std::size_t i)
{
    if (g.halves() == 0)
        throw ZeroDenominator("single-flip neighbour " + std::to_string(i + 1) +
                              " is degenerate with its plant; instance not certified");
    return g.value();
}

} // namespace detail

/// Second-order coefficient of the level attached to plant z:
/// -(1/4) sum_i c_i^2 / (H_P(z xor e_i) - H_P(z)).
inline double e2_for_plant(const ProblemHamiltonian& hp, const FieldCoefficients& coeffs, const BitString& z)
{
    if (coeffs.size() != hp.n())
        throw std::invalid_argument("coefficient count differs from instance size");
    const auto gaps = single_flip_gaps(hp, z);
    double sum = 0.0;
    for (std::size_t i = 0; i < gaps.size(); ++i)
        sum += coeffs[i] * coeffs[i] / detail::checked_gap(gaps[i], i);
    return -0.25 * sum;
}

inline double e2(const Instance& inst, const FieldCoefficients& coeffs, Level which)
{
    const auto roles = plant_roles(inst);
    const ProblemHamiltonian hp(inst);
    return e2_for_plant(hp, coeffs, inst.plants[which == Level::lower ? roles.lower : roles.upper]);
}

/// d_i = (1/4)[1/(H_P(z_L xor e_i) - E_L) - 1/(H_P(z_U xor e_i) - E_U)], so that
/// sum_i c_i^2 d_i is the upper minus lower second-order coefficient.
inline std::vector<double> d_vector(const Instance& inst)
{
    const auto roles = plant_roles(inst);
    const ProblemHamiltonian hp(inst);
    const auto lo = single_flip_gaps(hp, inst.plants[roles.lower]);
    const auto up = single_flip_gaps(hp, inst.plants[roles.upper]);
    std::vector<double> d(inst.n);
    for (std::size_t i = 0; i < inst.n; ++i)
        d[i] = 0.25 * (1.0 / detail::checked_gap(lo[i], i) - 1.0 / detail::checked_gap(up[i], i));
    return d;
}

/// Fourth-order coefficient of the level attached to plant z for uniform
/// coefficients, as the full sum over ordered pairs.
inline double e4_full(const ProblemHamiltonian& hp, const BitString& z)
{
    const std::size_t n = hp.n();
    const auto ref = hp.energy(z);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = detail::checked_gap(hp.energy(z.flipped(i)) - ref, i);
    double direct = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            direct += 1.0 / (d[i] * d[i] * d[j]);
    double paths = 0.0;
    BitString zi = z;
    for (std::size_t i = 0; i < n; ++i) {
        zi.flip(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i)
                continue;
            zi.flip(j);
            const HalfUnits gij = hp.energy(zi) - ref;
            zi.flip(j);
            if (gij.halves() == 0)
                throw ZeroDenominator("double-flip neighbour degenerate with its plant");
            const double dij = gij.value();
            paths += 1.0 / (d[i] * d[j] * dij) + 1.0 / (d[i] * d[i] * dij);
        }
        zi.flip(i);
    }
    return (direct - paths) / 16.0;
}

/// Same coefficient with the sum over pairs restricted to spins that share a
/// clause or penalty term; other pairs cancel because their gaps add.
inline double e4_clausemate(const ProblemHamiltonian& hp, const BitString& z)
{
    const std::size_t n = hp.n();
    const auto gaps = single_flip_gaps(hp, z);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i)
        d[i] = detail::checked_gap(gaps[i], i);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += 1.0 / (d[i] * d[i] * d[i]);
    BitString zi = z;
    for (std::size_t i = 0; i < n; ++i) {
        zi.flip(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || !hp.clausemates(i, j))
                continue;
            // gap of the double flip = gap_i + change from flipping j on top of i
            const HalfUnits gij = gaps[i] + hp.flip_delta(zi, j);
            if (gij.halves() == 0)
                throw ZeroDenominator("double-flip neighbour degenerate with its plant");
            const double dij = gij.value();
            total += (dij - d[i] - d[j]) / (d[i] * d[i] * d[j] * dij);
        }
        zi.flip(i);
    }
    return total / 16.0;
}

struct E4Pair {
    double full = 0.0;
    double clausemate = 0.0;
};

inline E4Pair e4(const Instance& inst, Level which)
{
    const auto roles = plant_roles(inst);
    const ProblemHamiltonian hp(inst);
    const auto& z = inst.plants[which == Level::lower ? roles.lower : roles.upper];
    return {e4_full(hp, z), e4_clausemate(hp, z)};
}

/// Root of 1/2 + x^2 delta2 = 0 with x = (1-s)/s; none unless delta2 < 0.
inline std::optional<double> predict_s_star(double delta2)
{
    if (!std::isfinite(delta2))
        throw std::invalid_argument("delta2 must be finite");
    if (!(delta2 < 0.0))
        return std::nullopt;
    return 1.0 / (1.0 + std::sqrt(-1.0 / (2.0 * delta2)));
}

inline double scaling_factor(double n, double m)
{
    if (!(n >= 1.0 && m >= 1.0))
        throw std::invalid_argument("scaling factor needs n, m >= 1");
    return std::pow(n, -0.25) * std::pow(m / n, 0.75);
}

/// Energy of a level through order 2 (or 4) in x = (1-s)/s:
/// (1-s) sum c/2 + s [e0 + x^2 e2 + x^4 e4].
inline double series_energy(double s, double coeff_sum, double e0, double e2v, double e4v = 0.0)
{
    if (!(s > 0.0 && s <= 1.0))
        throw std::invalid_argument("series energy needs s in (0,1]");
    const double x = (1.0 - s) / s;
    return (1.0 - s) * coeff_sum / 2.0 + s * (e0 + x * x * e2v + x * x * x * x * e4v);
}

/// The plant that lies lower near s = 1 on the unpenalized instance, i.e. the
/// one with the more negative second-order coefficient. Ties go to all-zeros.
inline Plant select_penalty_target(const Instance& inst)
{
    if (inst.plants.size() != 2)
        throw std::invalid_argument("expected a double-plant instance");
    Instance bare = inst;
    bare.penalties.clear();
    const ProblemHamiltonian hp(bare);
    const auto coeffs = FieldCoefficients::uniform(inst.n);
    const double e_zeros = e2_for_plant(hp, coeffs, bare.plants[0]);
    const double e_ones = e2_for_plant(hp, coeffs, bare.plants[1]);
    return e_ones < e_zeros ? Plant::ones : Plant::zeros;
}

struct PerturbationReport {
    std::string lower_plant;
    std::string upper_plant;
    double e2_L = 0.0;
    double e2_U = 0.0;
    /// Only for uniform coefficients.
    std::optional<double> e4_L;
    std::optional<double> e4_U;
    std::vector<double> d;
    double delta2 = 0.0;
    std::optional<double> s_star;
    double scaling = 0.0;
};

inline PerturbationReport perturbation_report(const Instance& inst, const FieldCoefficients& coeffs)
{
    const auto roles = plant_roles(inst);
    const ProblemHamiltonian hp(inst);
    PerturbationReport r;
    r.lower_plant = inst.plants[roles.lower].to_string();
    r.upper_plant = inst.plants[roles.upper].to_string();
    r.e2_L = e2_for_plant(hp, coeffs, inst.plants[roles.lower]);
    r.e2_U = e2_for_plant(hp, coeffs, inst.plants[roles.upper]);
    if (coeffs.is_uniform()) {
        r.e4_L = e4_clausemate(hp, inst.plants[roles.lower]);
        r.e4_U = e4_clausemate(hp, inst.plants[roles.upper]);
    }
    r.d = d_vector(inst);
    r.delta2 = r.e2_U - r.e2_L;
    r.s_star = predict_s_star(r.delta2);
    r.scaling = inst.m() > 0 ? scaling_factor(static_cast<double>(inst.n), static_cast<double>(inst.m())) : 0.0;
    return r;
}

/// sum_i c_i^2 d_i for one coefficient set.
inline double weighted_delta(std::span<const double> d, const FieldCoefficients& coeffs)
{
    if (coeffs.size() != d.size())
        throw std::invalid_argument("coefficient count differs from d length");
    double acc = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        acc += coeffs[i] * coeffs[i] * d[i];
    return acc;
}

struct DeltaSamples {
    std::vector<double> values;
    double mean = 0.0;
    /// Unbiased sample variance.
    double variance = 0.0;
};

/// Independent draws of sum_i c_i^2 d_i with each c_i in {1/2, 3/2}.
inline DeltaSamples randomized_delta_samples(std::span<const double> d, std::size_t count, Rng& rng)
{
    DeltaSamples out;
    out.values.resize(count);
    for (auto& v : out.values)
        v = weighted_delta(d, FieldCoefficients::randomized(d.size(), rng));
    if (count > 0) {
        double sum = 0.0;
        for (double v : out.values)
            sum += v;
        out.mean = sum / static_cast<double>(count);
    }
    if (count > 1) {
        double ss = 0.0;
        for (double v : out.values)
            ss += (v - out.mean) * (v - out.mean);
        out.variance = ss / static_cast<double>(count - 1);
    }
    return out;
}

/// First randomized coefficient set whose weighted delta exceeds the threshold.
inline FieldCoefficients pick_randomized_coeffs(std::span<const double> d, double threshold, Rng& rng,
                                                std::size_t max_tries = 10000)
{
    for (std::size_t t = 0; t < max_tries; ++t) {
        auto c = FieldCoefficients::randomized(d.size(), rng);
        if (weighted_delta(d, c) > threshold)
            return c;
    }
    throw CoefficientsNotFound("no coefficient set exceeded threshold " + format_sci(threshold) + " in " +
                               std::to_string(max_tries) + " tries");
}

/// d_{r,i} = (1/4)[1/(H(z_0 xor e_i) - H(z_0)) - 1/(H(z_r xor e_i) - H(z_r))].
/// With `penalized` false the instance's penalty terms are ignored.
inline std::vector<double> multi_plant_d(const Instance& inst, std::size_t r, std::size_t base = 0,
                                         bool penalized = false)
{
    if (r >= inst.plants.size() || base >= inst.plants.size())
        throw std::out_of_range("plant index out of range");
    Instance h = inst;
    if (!penalized)
        h.penalties.clear();
    const ProblemHamiltonian hp(h);
    const auto g0 = single_flip_gaps(hp, inst.plants[base]);
    const auto gr = single_flip_gaps(hp, inst.plants[r]);
    std::vector<double> d(inst.n);
    for (std::size_t i = 0; i < inst.n; ++i)
        d[i] = 0.25 * (1.0 / detail::checked_gap(g0[i], i) - 1.0 / detail::checked_gap(gr[i], i));
    return d;
}

/// Rows d_{r,.} for r = 1..k-1 against plant 0.
inline std::vector<std::vector<double>> multi_plant_d_matrix(const Instance& inst, bool penalized = false)
{
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 1; r < inst.plants.size(); ++r)
        rows.push_back(multi_plant_d(inst, r, 0, penalized));
    return rows;
}

inline std::vector<std::vector<double>> correlation_matrix(const std::vector<std::vector<double>>& rows)
{
    const std::size_t k = rows.size();
    std::vector<double> norms(k);
    for (std::size_t q = 0; q < k; ++q) {
        double ss = 0.0;
        for (double v : rows[q])
            ss += v * v;
        if (ss == 0.0)
            throw DegenerateRow("d row " + std::to_string(q + 1) + " has zero norm");
        norms[q] = std::sqrt(ss);
    }
    std::vector<std::vector<double>> corr(k, std::vector<double>(k, 0.0));
    for (std::size_t q = 0; q < k; ++q) {
        corr[q][q] = 1.0;
        for (std::size_t r = q + 1; r < k; ++r) {
            if (rows[q].size() != rows[r].size())
                throw std::invalid_argument("d rows differ in length");
            double dot = 0.0;
            for (std::size_t i = 0; i < rows[q].size(); ++i)
                dot += rows[q][i] * rows[r][i];
            const double c = std::clamp(dot / (norms[q] * norms[r]), -1.0, 1.0);
            corr[q][r] = c;
            corr[r][q] = c;
        }
    }
    return corr;
}

struct Probability {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// Fraction of randomized coefficient sets with sum_i c_i^2 d_{r,i} > 0 for every row.
inline Probability empirical_success_prob(const std::vector<std::vector<double>>& rows, std::size_t count, Rng& rng)
{
    if (rows.empty() || count == 0)
        throw std::invalid_argument("success probability needs rows and samples");
    const std::size_t n = rows.front().size();
    std::size_t hits = 0;
    for (std::size_t t = 0; t < count; ++t) {
        const auto c = FieldCoefficients::randomized(n, rng);
        const bool ok = std::all_of(rows.begin(), rows.end(),
                                    [&](const std::vector<double>& d) { return weighted_delta(d, c) > 0.0; });
        hits += ok ? 1 : 0;
    }
    Probability p;
    p.value = static_cast<double>(hits) / static_cast<double>(count);
    p.stderr_ = std::sqrt(p.value * (1.0 - p.value) / static_cast<double>(count));
    return p;
}

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;

    double width() const { return counts.empty() ? 0.0 : (hi - lo) / static_cast<double>(counts.size()); }
};

/// Equal-width bins spanning [min, max] of the values; the maximum lands in the last bin.
inline Histogram make_histogram(std::span<const double> values, std::size_t bins)
{
    if (bins == 0 || values.empty())
        throw std::invalid_argument("histogram needs values and at least one bin");
    Histogram h;
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    h.lo = *mn;
    h.hi = *mx;
    if (h.hi == h.lo) {
        h.lo -= 0.5;
        h.hi += 0.5;
    }
    h.counts.assign(bins, 0);
    const double w = h.width();
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - h.lo) / w);
        h.counts[std::min(b, bins - 1)] += 1;
    }
    return h;
}

inline void write_histogram_csv(std::ostream& out, const Histogram& h)
{
    std::size_t total = 0;
    for (auto c : h.counts)
        total += c;
    out << "bin_lo,bin_hi,count,density\n";
    const double w = h.width();
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double lo = h.lo + static_cast<double>(b) * w;
        const double density = static_cast<double>(h.counts[b]) / (static_cast<double>(total) * w);
        out << format_sci(lo) << ',' << format_sci(lo + w) << ',' << h.counts[b] << ',' << format_sci(density)
            << '\n';
    }
}

/// Empirical quantile (nearest rank on a sorted copy).
inline double quantile(std::span<const double> values, double p)
{
    if (values.empty() || !(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("quantile needs values and p in [0,1]");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
    return v[idx == 0 ? 0 : idx - 1];
}

} // namespace qaa
