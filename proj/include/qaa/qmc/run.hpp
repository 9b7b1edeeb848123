#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qaa/hamiltonian.hpp"
#include "qaa/qmc/chain.hpp"
#include "qaa/qmc/path.hpp"
#include "qaa/rng.hpp"

namespace qaa::qmc {

class InsufficientSamples : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Stat {
    double mean = 0.0;
    double err = 0.0;
};

/// Mean and standard error from block averages of size 2^k, taking the
/// largest k that still leaves at least `min_blocks` blocks.
struct BlockingResult {
    double mean = 0.0;
    double err = 0.0;
    std::size_t block_size = 1;
    std::size_t blocks = 0;
    /// Standard error at each level k = 0, 1, ...
    std::vector<double> level_errors;
};

inline BlockingResult blocking_analysis(std::span<const double> xs, std::size_t min_blocks = 32)
{
    BlockingResult r;
    const std::size_t n = xs.size();
    if (n == 0)
        return r;
    double sum = 0.0;
    for (double x : xs)
        sum += x;
    r.mean = sum / static_cast<double>(n);
    r.blocks = n;
    if (n < 2)
        return r;
    auto level_error = [&](std::size_t size) {
        const std::size_t nb = n / size;
        std::vector<double> means(nb, 0.0);
        for (std::size_t b = 0; b < nb; ++b) {
            double acc = 0.0;
            for (std::size_t k = 0; k < size; ++k)
                acc += xs[b * size + k];
            means[b] = acc / static_cast<double>(size);
        }
        double m = 0.0;
        for (double v : means)
            m += v;
        m /= static_cast<double>(nb);
        double ss = 0.0;
        for (double v : means)
            ss += (v - m) * (v - m);
        return std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
    };
    std::size_t size = 1;
    r.err = level_error(1);
    r.level_errors.push_back(r.err);
    while (n / (2 * size) >= min_blocks) {
        size *= 2;
        r.err = level_error(size);
        r.level_errors.push_back(r.err);
    }
    r.block_size = size;
    r.blocks = n / size;
    return r;
}

struct RunParams {
    double beta = 150.0;
    std::size_t sweeps = 200000;
    std::size_t thin = 5;
    std::size_t equil = 2500;
    std::uint64_t retry_cap = default_retry_cap;
};

struct Estimates {
    Stat H;
    Stat H0;
    Stat V;
    Stat W;
    double m_mean = 0.0;
    double acc_rate = 1.0;
    std::size_t samples = 0;
    std::size_t discarded = 0;
};

/// Time series recorded by a run, after equilibration.
struct Series {
    std::vector<double> h0;
    std::vector<double> v;
    std::vector<double> w;
    std::vector<double> m;
};

inline Estimates summarize(const Series& series, std::size_t discarded, double acc_rate)
{
    Estimates e;
    const auto h0 = blocking_analysis(series.h0);
    const auto v = blocking_analysis(series.v);
    const auto w = blocking_analysis(series.w);
    std::vector<double> h(series.h0.size());
    for (std::size_t k = 0; k < h.size(); ++k)
        h[k] = series.h0[k] + series.v[k];
    const auto hb = blocking_analysis(h);
    e.H0 = {h0.mean, h0.err};
    e.V = {v.mean, v.err};
    e.W = {w.mean, w.err};
    e.H = {h0.mean + v.mean, hb.err};
    double msum = 0.0;
    for (double m : series.m)
        msum += m;
    e.m_mean = series.m.empty() ? 0.0 : msum / static_cast<double>(series.m.size());
    e.acc_rate = acc_rate;
    e.samples = series.h0.size();
    e.discarded = discarded;
    return e;
}

inline Estimates run_point(const ProblemHamiltonian& hp, const FieldCoefficients& coeffs, double s,
                           const BitString& seed, const RunParams& params, Rng& rng, Series* keep = nullptr)
{
    if (!(params.beta > 0.0) || params.sweeps == 0 || params.thin == 0)
        throw std::invalid_argument("run parameters must be positive");
    if (seed.size() != hp.n())
        throw std::invalid_argument("seed length differs from instance size");
    const std::size_t recorded = params.sweeps / params.thin;
    if (recorded <= params.equil)
        throw InsufficientSamples("sweeps/thin = " + std::to_string(recorded) +
                                  " leaves no samples after discarding " + std::to_string(params.equil));
    HeatBath hb(hp, coeffs, s, params.retry_cap);
    WorldlinePath path = init_seed_path(seed, params.beta);
    Series series;
    series.h0.reserve(recorded - params.equil);
    series.v.reserve(recorded - params.equil);
    series.w.reserve(recorded - params.equil);
    series.m.reserve(recorded - params.equil);
    std::size_t taken = 0;
    for (std::size_t sw = 1; sw <= params.sweeps; ++sw) {
        hb.sweep(path, rng);
        if (sw % params.thin != 0)
            continue;
        if (taken++ < params.equil)
            continue;
        const auto smp = hb.measure(path);
        series.h0.push_back(smp.diag_integral);
        series.v.push_back(-static_cast<double>(smp.transitions) / params.beta);
        series.w.push_back(smp.weight_integral);
        series.m.push_back(static_cast<double>(smp.transitions));
    }
    auto est = summarize(series, params.equil, hb.stats().acceptance_rate());
    if (keep)
        *keep = std::move(series);
    return est;
}

inline Estimates run_point(const Instance& inst, const FieldCoefficients& coeffs, double s, const BitString& seed,
                           const RunParams& params, Rng& rng)
{
    const ProblemHamiltonian hp(inst);
    return run_point(hp, coeffs, s, seed, params, rng);
}

} // namespace qaa::qmc
