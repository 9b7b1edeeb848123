#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qaa/rng.hpp"

namespace qaa::qmc {

class NumericalDegeneracy : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RetryCapExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A = exp(-lambda (h sigma_z - c sigma_x)) in the {|0>, |1>} basis, stored as
/// mantissa entries times exp(log_scale) so long segments do not overflow.
struct TransferMatrix {
    // row-major <r|A|col>
    std::array<double, 4> a{1.0, 0.0, 0.0, 1.0};
    double log_scale = 0.0;

    double mantissa(int r, int col) const noexcept { return a[static_cast<std::size_t>(2 * r + col)]; }
    double entry(int r, int col) const { return mantissa(r, col) * std::exp(log_scale); }
    double determinant() const { return (a[0] * a[3] - a[1] * a[2]) * std::exp(2.0 * log_scale); }
};

inline TransferMatrix transfer_matrix(double lambda, double h, double c)
{
    if (!(lambda >= 0.0) || !(c >= 0.0))
        throw std::invalid_argument("transfer matrix needs lambda >= 0 and c >= 0");
    TransferMatrix t;
    const double omega = std::hypot(h, c);
    if (omega == 0.0 || lambda == 0.0)
        return t;
    const double x = lambda * omega;
    const double e = std::exp(-2.0 * x);
    const double one_minus_e = -std::expm1(-2.0 * x);
    // 1 -/+ h/omega without cancellation: (omega^2 - h^2) = c^2
    const double p = h > 0.0 ? c * c / (omega * (omega + h)) : 1.0 - h / omega;
    const double q = h < 0.0 ? c * c / (omega * (omega - h)) : 1.0 + h / omega;
    t.a[0] = 0.5 * (p + e * q);
    t.a[3] = 0.5 * (q + e * p);
    t.a[1] = t.a[2] = 0.5 * one_minus_e * c / omega;
    t.log_scale = x;
    return t;
}

namespace detail {

using Mat2 = std::array<double, 4>;

inline Mat2 mul(const Mat2& l, const Mat2& r) noexcept
{
    return {l[0] * r[0] + l[1] * r[2], l[0] * r[1] + l[1] * r[3], l[2] * r[0] + l[3] * r[2],
            l[2] * r[1] + l[3] * r[3]};
}

inline void normalize(Mat2& m)
{
    const double mx = std::max(std::max(m[0], m[1]), std::max(m[2], m[3]));
    if (!(mx > 0.0) || !std::isfinite(mx))
        throw NumericalDegeneracy("transfer-matrix product degenerated");
    for (auto& v : m)
        v /= mx;
}

inline std::uint8_t draw_bit(double w0, double w1, Rng& rng)
{
    const double total = w0 + w1;
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericalDegeneracy("boundary weights vanished");
    return uniform01(rng) * total < w0 ? 0 : 1;
}

} // namespace detail

/// Reusable buffer for suffix products.
struct BoundaryWorkspace {
    std::vector<detail::Mat2> suffix;
};

/// Samples the spin values s_0..s_q at the starts of the q+1 segments on the
/// circle from their joint weight prod_k <s_{k+1}|A_k|s_k> (with s_{q+1} = s_0),
/// one conditional at a time.
inline void sample_boundaries(std::span<const TransferMatrix> mats, Rng& rng, std::vector<std::uint8_t>& bits,
                              BoundaryWorkspace& ws)
{
    const std::size_t count = mats.size();
    if (count == 0)
        throw std::invalid_argument("boundary sampling needs at least one segment");
    auto& suffix = ws.suffix;
    suffix.resize(count);
    // suffix[k] ~ A_q ... A_k up to a positive factor
    suffix[count - 1] = mats[count - 1].a;
    detail::normalize(suffix[count - 1]);
    for (std::size_t k = count - 1; k-- > 0;) {
        suffix[k] = detail::mul(suffix[k + 1], mats[k].a);
        detail::normalize(suffix[k]);
    }
    bits.resize(count);
    bits[0] = detail::draw_bit(suffix[0][0], suffix[0][3], rng);
    const int s0 = bits[0];
    for (std::size_t k = 1; k < count; ++k) {
        const int prev = bits[k - 1];
        const auto& p = suffix[k];
        const auto& a = mats[k - 1];
        const double w0 = p[static_cast<std::size_t>(2 * s0 + 0)] * a.mantissa(0, prev);
        const double w1 = p[static_cast<std::size_t>(2 * s0 + 1)] * a.mantissa(1, prev);
        bits[k] = detail::draw_bit(w0, w1, rng);
    }
}

inline std::vector<std::uint8_t> sample_boundaries(std::span<const TransferMatrix> mats, Rng& rng)
{
    std::vector<std::uint8_t> bits;
    BoundaryWorkspace ws;
    sample_boundaries(mats, rng, bits, ws);
    return bits;
}

struct SamplerStats {
    std::uint64_t attempts = 0;
    std::uint64_t accepts = 0;

    double acceptance_rate() const noexcept
    {
        return attempts == 0 ? 1.0 : static_cast<double>(accepts) / static_cast<double>(attempts);
    }
};

inline constexpr std::uint64_t default_retry_cap = 1'000'000;

/// Flip offsets in (0, lambda) of a subpath from s_in to s_out, drawn by running
/// the free two-state jump process with rates omega + B h (B = +1 on |0>, -1 on
/// |1>) and rejecting runs that end in the wrong state. Offsets are appended to `out`.
inline void sample_subpath(double lambda, double h, double c, std::uint8_t s_in, std::uint8_t s_out, Rng& rng,
                           std::vector<double>& out, SamplerStats& stats,
                           std::uint64_t retry_cap = default_retry_cap)
{
    if (!(lambda >= 0.0) || !(c >= 0.0))
        throw std::invalid_argument("subpath needs lambda >= 0 and c >= 0");
    if (lambda == 0.0 || c == 0.0) {
        if (s_in != s_out)
            throw NumericalDegeneracy("no flip possible on this segment");
        return;
    }
    const double omega = std::hypot(h, c);
    const double slow = c * c / (omega + std::abs(h));
    // rate out of |0> is omega + h, out of |1> is omega - h
    const double rate0 = h >= 0.0 ? omega + h : slow;
    const double rate1 = h <= 0.0 ? omega - h : slow;
    const std::size_t base = out.size();
    for (std::uint64_t attempt = 0; attempt < retry_cap; ++attempt) {
        ++stats.attempts;
        out.resize(base);
        std::uint8_t state = s_in;
        double t = 0.0;
        for (;;) {
            const double next = t + exponential(rng, state ? rate1 : rate0);
            if (next >= lambda)
                break;
            if (next <= t)
                continue; // rounding collision, redraw the wait
            t = next;
            out.push_back(t);
            state ^= 1u;
        }
        if (state == s_out) {
            ++stats.accepts;
            return;
        }
    }
    out.resize(base);
    throw RetryCapExceeded("subpath rejection sampler exceeded " + std::to_string(retry_cap) +
                           " attempts (lambda=" + std::to_string(lambda) + ", h=" + std::to_string(h) +
                           ", c=" + std::to_string(c) + ")");
}

inline std::vector<double> sample_subpath(double lambda, double h, double c, std::uint8_t s_in, std::uint8_t s_out,
                                          Rng& rng, std::uint64_t retry_cap = default_retry_cap)
{
    std::vector<double> out;
    SamplerStats stats;
    sample_subpath(lambda, h, c, s_in, s_out, rng, out, stats, retry_cap);
    return out;
}

} // namespace qaa::qmc
