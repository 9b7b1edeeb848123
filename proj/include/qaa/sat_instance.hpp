#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qaa/bitstring.hpp"
#include "qaa/dpll.hpp"
#include "qaa/rng.hpp"

namespace qaa {

using SpinTriple = std::array<std::uint32_t, 3>;
using Pattern = std::array<std::uint8_t, 3>;

/// A 3SAT clause stored as the one assignment of three bits that it forbids.
/// Spin indices are 0-based here; files and CLIs use 1-based numbering.
struct Clause {
    SpinTriple spins{};
    Pattern pattern{};

    bool violated_by(const BitString& z) const noexcept
    {
        return z[spins[0]] == (pattern[0] != 0) && z[spins[1]] == (pattern[1] != 0) &&
               z[spins[2]] == (pattern[2] != 0);
    }

    bool contains(std::uint32_t spin) const noexcept
    {
        return spins[0] == spin || spins[1] == spin || spins[2] == spin;
    }

    /// The CNF clause falsified exactly by the forbidden pattern.
    CnfClause to_cnf() const
    {
        CnfClause c(3);
        for (std::size_t k = 0; k < 3; ++k) {
            const auto var = static_cast<Literal>(spins[k] + 1);
            c[k] = pattern[k] ? -var : var;
        }
        return c;
    }

    friend bool operator==(const Clause&, const Clause&) = default;
    friend auto operator<=>(const Clause&, const Clause&) = default;
};

/// Weight-1/2 projector onto one pattern of three bits.
struct PenaltyTerm {
    SpinTriple spins{0, 1, 2};
    Pattern pattern{};

    /// Energy in half units; the weight is fixed at 1/2.
    static constexpr std::int64_t weight_half_units = 1;

    bool fires_on(const BitString& z) const noexcept
    {
        return z[spins[0]] == (pattern[0] != 0) && z[spins[1]] == (pattern[1] != 0) &&
               z[spins[2]] == (pattern[2] != 0);
    }

    bool contains(std::uint32_t spin) const noexcept
    {
        return spins[0] == spin || spins[1] == spin || spins[2] == spin;
    }

    friend bool operator==(const PenaltyTerm&, const PenaltyTerm&) = default;
};

enum class Plant { zeros = 0, ones = 1 };

inline const char* to_string(Plant p) { return p == Plant::zeros ? "zeros" : "ones"; }

/// A planted 3SAT instance. Double-plant instances carry the plants
/// {all-zeros, all-ones} in that order.
struct Instance {
    std::size_t n = 0;
    std::vector<Clause> clauses;
    std::vector<BitString> plants;
    std::vector<PenaltyTerm> penalties;

    std::size_t m() const noexcept { return clauses.size(); }

    const BitString& plant(Plant p) const { return plants.at(static_cast<std::size_t>(p)); }

    /// Complement every pattern and plant; maps the spectrum of H(s) onto itself.
    Instance complemented() const
    {
        Instance out = *this;
        for (auto& c : out.clauses)
            for (auto& b : c.pattern)
                b ^= 1u;
        for (auto& pen : out.penalties)
            for (auto& b : pen.pattern)
                b ^= 1u;
        for (auto& p : out.plants)
            p = p.complement();
        return out;
    }
};

class GenerationLimitExceeded : public std::runtime_error {
public:
    GenerationLimitExceeded(std::size_t cap, std::size_t n)
        : std::runtime_error("instance generation hit the clause cap " + std::to_string(cap) +
                             " at n=" + std::to_string(n)),
          cap_(cap)
    {
    }
    std::size_t cap() const noexcept { return cap_; }

private:
    std::size_t cap_;
};

/// Patterns allowed when generating double-plant clauses (never 000 or 111).
inline constexpr std::array<Pattern, 6> allowed_patterns{{
    {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1},
}};

inline bool is_allowed_pattern(const Pattern& p)
{
    return std::find(allowed_patterns.begin(), allowed_patterns.end(), p) != allowed_patterns.end();
}

/// Uniform integer in [0, bound).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound)
{
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t x = rng();
        if (x >= threshold)
            return x % bound;
    }
}

inline SpinTriple random_triple(std::size_t n, Rng& rng)
{
    SpinTriple t{};
    t[0] = static_cast<std::uint32_t>(uniform_index(rng, n));
    do {
        t[1] = static_cast<std::uint32_t>(uniform_index(rng, n));
    } while (t[1] == t[0]);
    do {
        t[2] = static_cast<std::uint32_t>(uniform_index(rng, n));
    } while (t[2] == t[0] || t[2] == t[1]);
    return t;
}

struct GenerationOptions {
    /// Defaults to 20 n ln n when unset.
    std::optional<std::size_t> clause_cap;
    std::uint64_t decision_budget = DpllSolver::default_budget;
};

inline std::size_t default_clause_cap(std::size_t n)
{
    return static_cast<std::size_t>(std::ceil(20.0 * static_cast<double>(n) * std::log(static_cast<double>(n))));
}

namespace detail {

inline bool satisfies_all(const std::vector<Clause>& clauses, const BitString& z)
{
    return std::none_of(clauses.begin(), clauses.end(), [&](const Clause& c) { return c.violated_by(z); });
}

/// Adds uniformly drawn clauses until the plants are the only models.
/// `draw` returns a clause consistent with every plant.
template <class Draw>
Instance grow_until_certified(std::size_t n, std::vector<BitString> plants, Draw&& draw,
                              const GenerationOptions& options)
{
    const std::size_t cap = options.clause_cap.value_or(default_clause_cap(n));
    Instance inst;
    inst.n = n;
    inst.plants = std::move(plants);

    DpllSolver solver(n, options.decision_budget);
    for (const auto& p : inst.plants)
        solver.add_clause(blocking_clause(p));

    // A model found earlier stays a witness of satisfiability until some new
    // clause rules it out, so the solver only reruns when that happens.
    std::optional<BitString> witness = solver.solve();
    while (witness) {
        if (inst.clauses.size() >= cap)
            throw GenerationLimitExceeded(cap, n);
        Clause c = draw();
        inst.clauses.push_back(c);
        solver.add_clause(c.to_cnf());
        if (c.violated_by(*witness))
            witness = solver.solve();
    }
    return inst;
}

} // namespace detail

/// Draws clauses uniformly over (ordered spin triple, allowed pattern) and stops
/// as soon as all-zeros and all-ones are the only satisfying assignments.
inline Instance generate_double_plant(std::size_t n, Rng& rng, const GenerationOptions& options = {})
{
    if (n < 3)
        throw std::invalid_argument("double-plant instances need n >= 3");
    auto draw = [&] {
        Clause c;
        c.spins = random_triple(n, rng);
        c.pattern = allowed_patterns[uniform_index(rng, allowed_patterns.size())];
        return c;
    };
    return detail::grow_until_certified(n, {BitString::zeros(n), BitString::ones(n)}, draw, options);
}

/// Generates an instance whose only models are k random, mutually distant
/// plants. Each clause forbids a pattern drawn uniformly from the patterns not
/// taken by any plant on its three bits.
inline Instance generate_multi_plant(std::size_t n, std::size_t k, Rng& rng, const GenerationOptions& options = {})
{
    if (n < 3 || k < 1)
        throw std::invalid_argument("multi-plant instances need n >= 3 and k >= 1");
    const std::size_t min_distance = n / 4;
    std::vector<BitString> plants;
    std::size_t attempts = 0;
    while (plants.size() < k) {
        if (++attempts > 100000)
            throw std::runtime_error("could not place mutually distant plants");
        BitString z(n);
        for (std::size_t i = 0; i < n; ++i)
            z.set(i, (rng() >> 63) != 0);
        const bool far = std::all_of(plants.begin(), plants.end(), [&](const BitString& p) {
            return p.hamming_distance(z) >= min_distance;
        });
        if (far)
            plants.push_back(std::move(z));
    }
    auto draw = [&] {
        for (;;) {
            Clause c;
            c.spins = random_triple(n, rng);
            std::array<Pattern, 8> free{};
            std::size_t count = 0;
            for (std::uint8_t code = 0; code < 8; ++code) {
                Pattern p{static_cast<std::uint8_t>(code & 1u), static_cast<std::uint8_t>((code >> 1) & 1u),
                          static_cast<std::uint8_t>((code >> 2) & 1u)};
                const bool taken = std::any_of(plants.begin(), plants.end(), [&](const BitString& z) {
                    return z[c.spins[0]] == (p[0] != 0) && z[c.spins[1]] == (p[1] != 0) && z[c.spins[2]] == (p[2] != 0);
                });
                if (!taken)
                    free[count++] = p;
            }
            if (count == 0)
                continue;
            c.pattern = free[uniform_index(rng, count)];
            return c;
        }
    };
    return detail::grow_until_certified(n, plants, draw, options);
}

/// True iff the plants are the only satisfying assignments.
inline bool certify_exactly_plants(const Instance& instance,
                                   std::uint64_t decision_budget = DpllSolver::default_budget)
{
    for (const auto& p : instance.plants)
        if (!detail::satisfies_all(instance.clauses, p))
            throw std::invalid_argument("plant " + p.to_string() + " violates a clause");
    DpllSolver solver(instance.n, decision_budget);
    for (const auto& c : instance.clauses)
        solver.add_clause(c.to_cnf());
    for (const auto& p : instance.plants)
        solver.add_clause(blocking_clause(p));
    return !solver.solve().has_value();
}

inline bool certify_exactly_two(const Instance& instance,
                                std::uint64_t decision_budget = DpllSolver::default_budget)
{
    if (instance.plants.size() != 2)
        throw std::invalid_argument("certify_exactly_two needs a double-plant instance");
    return certify_exactly_plants(instance, decision_budget);
}

/// Adds the weight-1/2 term that fires only when `spins` match the chosen plant.
inline Instance add_penalty(const Instance& instance, std::size_t plant_index, SpinTriple spins = {0, 1, 2})
{
    const auto& z = instance.plants.at(plant_index);
    for (auto s : spins)
        if (s >= instance.n)
            throw std::invalid_argument("penalty spin out of range");
    if (spins[0] == spins[1] || spins[0] == spins[2] || spins[1] == spins[2])
        throw std::invalid_argument("penalty spins must be distinct");
    Instance out = instance;
    PenaltyTerm pen;
    pen.spins = spins;
    for (std::size_t k = 0; k < 3; ++k)
        pen.pattern[k] = z[spins[k]] ? 1 : 0;
    out.penalties.push_back(pen);
    return out;
}

inline Instance add_penalty(const Instance& instance, Plant target, SpinTriple spins = {0, 1, 2})
{
    if (instance.plants.size() != 2)
        throw std::invalid_argument("plant selector needs a double-plant instance");
    return add_penalty(instance, static_cast<std::size_t>(target), spins);
}

} // namespace qaa
