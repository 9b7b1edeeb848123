#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qaa/bitstring.hpp"

namespace qaa::qmc {

/// Periodic imaginary-time trajectory z(t) on [0, beta). `start` is the state
/// on [0, first flip); each spin toggles at the times in its flip list.
struct WorldlinePath {
    double beta = 0.0;
    BitString start;
    std::vector<std::vector<double>> flips;

    std::size_t n() const noexcept { return start.size(); }

    std::size_t transitions() const noexcept
    {
        std::size_t m = 0;
        for (const auto& f : flips)
            m += f.size();
        return m;
    }

    /// State just after time t, for t in [0, beta).
    BitString state_at(double t) const
    {
        BitString z = start;
        for (std::size_t j = 0; j < flips.size(); ++j) {
            const auto count = std::upper_bound(flips[j].begin(), flips[j].end(), t) - flips[j].begin();
            if (count % 2 == 1)
                z.flip(j);
        }
        return z;
    }

    /// First violated invariant, if any.
    std::optional<std::string> invalid_reason() const
    {
        if (!(beta > 0.0))
            return "beta must be positive";
        if (flips.size() != start.size())
            return "flip lists do not match spin count";
        for (std::size_t j = 0; j < flips.size(); ++j) {
            const auto& f = flips[j];
            if (f.size() % 2 != 0)
                return "spin " + std::to_string(j + 1) + " has an odd flip count";
            for (std::size_t k = 0; k < f.size(); ++k) {
                if (!(f[k] >= 0.0 && f[k] < beta))
                    return "spin " + std::to_string(j + 1) + " has a flip outside [0, beta)";
                if (k > 0 && !(f[k] > f[k - 1]))
                    return "spin " + std::to_string(j + 1) + " flip times not strictly increasing";
            }
        }
        return std::nullopt;
    }

    bool valid() const { return !invalid_reason().has_value(); }
};

/// A flipless path at z.
inline WorldlinePath init_seed_path(const BitString& z, double beta)
{
    if (!(beta > 0.0))
        throw std::invalid_argument("beta must be positive");
    WorldlinePath p;
    p.beta = beta;
    p.start = z;
    p.flips.assign(z.size(), {});
    return p;
}

} // namespace qaa::qmc
