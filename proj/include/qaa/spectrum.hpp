#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qaa/format.hpp"
#include "qaa/hamiltonian.hpp"
#include "qaa/rng.hpp"

namespace qaa {

/// Lowest two eigenpairs of H(s) summarized by energies and Hamming weights.
struct SpectrumResult {
    double s = 0.0;
    double E0 = 0.0;
    double E1 = 0.0;
    double W0 = 0.0;
    double W1 = 0.0;
    double residual0 = 0.0;
    double residual1 = 0.0;

    double gap() const noexcept { return E1 - E0; }
};

class EigenNotConverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EigenOptions {
    double tolerance = 1e-8;
    std::size_t block_size = 3;
    /// Krylov basis size per restart; 0 picks a size from the dimension.
    std::size_t max_basis = 0;
    std::size_t max_restarts = 500;
    /// Dense diagonalization at or below this spin count.
    std::size_t dense_max_n = 8;
    std::size_t max_n = 20;
};

/// H(s) = (1-s) sum_i c_i (1 - sigma_x^i)/2 + s H_P over the full 2^n basis,
/// applied implicitly. Basis index bit k is spin k.
class InterpolatedHamiltonian {
public:
    InterpolatedHamiltonian(const Instance& inst, FieldCoefficients coeffs, std::size_t max_n = 20)
        : n_(inst.n), coeffs_(std::move(coeffs))
    {
        if (inst.n > max_n)
            throw std::invalid_argument("exact spectrum limited to n <= " + std::to_string(max_n));
        if (coeffs_.size() != inst.n)
            throw std::invalid_argument("coefficient count differs from instance size");
        const std::size_t dim = std::size_t{1} << n_;
        problem_.resize(dim);
        for (std::size_t z = 0; z < dim; ++z) {
            std::int64_t halves = 0;
            for (const auto& c : inst.clauses) {
                bool hit = true;
                for (std::size_t k = 0; k < 3 && hit; ++k)
                    hit = ((z >> c.spins[k]) & 1u) == c.pattern[k];
                halves += hit ? 2 : 0;
            }
            for (const auto& p : inst.penalties) {
                bool hit = true;
                for (std::size_t k = 0; k < 3 && hit; ++k)
                    hit = ((z >> p.spins[k]) & 1u) == p.pattern[k];
                halves += hit ? PenaltyTerm::weight_half_units : 0;
            }
            problem_[z] = 0.5 * static_cast<double>(halves);
        }
    }

    std::size_t n() const noexcept { return n_; }
    std::size_t dim() const noexcept { return problem_.size(); }
    const FieldCoefficients& coeffs() const noexcept { return coeffs_; }
    double problem_energy(std::size_t z) const { return problem_[z]; }

    double diagonal(double s, std::size_t z) const
    {
        return s * problem_[z] + (1.0 - s) * coeffs_.sum() / 2.0;
    }

    /// out = H(s) in.
    void apply(double s, std::span<const double> in, std::span<double> out) const
    {
        if (in.size() != dim() || out.size() != dim())
            throw std::invalid_argument("state vector dimension mismatch");
        const double offset = (1.0 - s) * coeffs_.sum() / 2.0;
        for (std::size_t z = 0; z < in.size(); ++z)
            out[z] = (s * problem_[z] + offset) * in[z];
        if (s == 1.0)
            return;
        for (std::size_t i = 0; i < n_; ++i) {
            const double g = (1.0 - s) * coeffs_[i] / 2.0;
            const std::size_t bit = std::size_t{1} << i;
            for (std::size_t z = 0; z < in.size(); ++z)
                out[z] -= g * in[z ^ bit];
        }
    }

private:
    std::size_t n_;
    FieldCoefficients coeffs_;
    std::vector<double> problem_;
};

/// w[z] = <z|H0|z> v[z] - sum_i gamma_i v[z xor e_i].
inline std::vector<double> apply_hamiltonian(const Instance& inst, const FieldCoefficients& coeffs, double s,
                                             std::span<const double> v)
{
    InterpolatedHamiltonian h(inst, coeffs);
    std::vector<double> out(v.size());
    h.apply(s, v, out);
    return out;
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        acc += a[k] * b[k];
    return acc;
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    for (std::size_t k = 0; k < x.size(); ++k)
        y[k] += alpha * x[k];
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double weighted_hamming(std::span<const double> v)
{
    double w = 0.0;
    for (std::size_t z = 0; z < v.size(); ++z)
        w += v[z] * v[z] * std::popcount(z);
    return w;
}

/// Orthogonalize v against the basis twice; returns the remaining norm
/// relative to the input norm.
inline double orthogonalize(const std::vector<std::vector<double>>& basis, std::vector<double>& v)
{
    const double before = norm(v);
    if (before == 0.0)
        return 0.0;
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& q : basis)
            axpy(-dot(q, v), q, v);
    return norm(v) / before;
}

inline SpectrumResult diagonal_spectrum(const InterpolatedHamiltonian& h, double s)
{
    std::vector<std::size_t> order(h.dim());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return h.diagonal(s, a) < h.diagonal(s, b); });
    SpectrumResult r;
    r.s = s;
    r.E0 = h.diagonal(s, order[0]);
    r.W0 = std::popcount(order[0]);
    if (h.dim() > 1) {
        r.E1 = h.diagonal(s, order[1]);
        r.W1 = std::popcount(order[1]);
    } else {
        r.E1 = r.E0;
        r.W1 = r.W0;
    }
    return r;
}

inline SpectrumResult dense_spectrum(const InterpolatedHamiltonian& h, double s)
{
    const auto dim = static_cast<Eigen::Index>(h.dim());
    Eigen::MatrixXd m(dim, dim);
    std::vector<double> e(h.dim(), 0.0), col(h.dim());
    for (Eigen::Index k = 0; k < dim; ++k) {
        std::fill(e.begin(), e.end(), 0.0);
        e[static_cast<std::size_t>(k)] = 1.0;
        h.apply(s, e, col);
        for (Eigen::Index r = 0; r < dim; ++r)
            m(r, k) = col[static_cast<std::size_t>(r)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success)
        throw EigenNotConverged("dense eigensolver failed");
    SpectrumResult r;
    r.s = s;
    r.E0 = solver.eigenvalues()(0);
    r.E1 = dim > 1 ? solver.eigenvalues()(1) : r.E0;
    auto weight = [&](Eigen::Index k) {
        double w = 0.0;
        for (Eigen::Index z = 0; z < dim; ++z)
            w += solver.eigenvectors()(z, k) * solver.eigenvectors()(z, k) * std::popcount(static_cast<std::size_t>(z));
        return w;
    };
    r.W0 = weight(0);
    r.W1 = dim > 1 ? weight(1) : r.W0;
    const Eigen::MatrixXd res0 = m * solver.eigenvectors().col(0) - r.E0 * solver.eigenvectors().col(0);
    r.residual0 = res0.norm();
    if (dim > 1) {
        const Eigen::MatrixXd res1 = m * solver.eigenvectors().col(1) - r.E1 * solver.eigenvectors().col(1);
        r.residual1 = res1.norm();
    }
    return r;
}

} // namespace detail

/// Restarted block Krylov eigensolver with full re-orthogonalization for the
/// two lowest eigenpairs. A block of width >= 2 lets nearly degenerate pairs
/// converge together, which single-vector Lanczos cannot do.
class LowestTwoSolver {
public:
    LowestTwoSolver(const InterpolatedHamiltonian& h, EigenOptions options = {}) : h_(h), opt_(options)
    {
        if (opt_.block_size < 2)
            throw std::invalid_argument("block size must be at least 2");
    }

    /// Ritz vectors of the last solve, used to warm-start the next one.
    const std::vector<std::vector<double>>& ritz_vectors() const noexcept { return warm_; }
    void clear_warm_start() { warm_.clear(); }
    std::size_t last_matvecs() const noexcept { return matvecs_; }

    SpectrumResult solve(double s)
    {
        if (!(s >= 0.0 && s <= 1.0))
            throw std::invalid_argument("schedule parameter s must lie in [0,1]");
        matvecs_ = 0;
        if (s == 1.0)
            return detail::diagonal_spectrum(h_, s);
        if (h_.n() <= opt_.dense_max_n)
            return detail::dense_spectrum(h_, s);
        return krylov(s);
    }

private:
    std::vector<std::vector<double>> start_block() const
    {
        const std::size_t dim = h_.dim();
        std::vector<std::vector<double>> block;
        if (warm_.size() == opt_.block_size && warm_.front().size() == dim)
            return warm_;
        std::vector<double> uniform(dim, 1.0);
        std::vector<double> weighted(dim);
        for (std::size_t z = 0; z < dim; ++z)
            weighted[z] = static_cast<double>(std::popcount(z));
        block.push_back(std::move(uniform));
        block.push_back(std::move(weighted));
        Rng rng = make_rng(0x5eed);
        while (block.size() < opt_.block_size) {
            std::vector<double> r(dim);
            for (auto& x : r)
                x = 2.0 * uniform01(rng) - 1.0;
            block.push_back(std::move(r));
        }
        return block;
    }

    SpectrumResult krylov(double s)
    {
        const std::size_t dim = h_.dim();
        const std::size_t b = std::min(opt_.block_size, dim);
        std::size_t kmax = opt_.max_basis;
        if (kmax == 0) {
            // cap memory at roughly 2 x 2^27 doubles for basis plus images
            kmax = std::clamp<std::size_t>((std::size_t{1} << 27) / dim, 4 * b, 60);
        }
        kmax = std::min(kmax, dim);
        Rng filler = make_rng(0xf111);

        std::vector<std::vector<double>> x = start_block();
        for (std::size_t restart = 0; restart < opt_.max_restarts; ++restart) {
            std::vector<std::vector<double>> q, hq;
            q.reserve(kmax);
            hq.reserve(kmax);
            std::vector<std::vector<double>> next = std::move(x);
            while (q.size() < kmax && !next.empty()) {
                std::size_t added = 0;
                for (auto& v : next) {
                    if (q.size() >= kmax)
                        break;
                    double kept = detail::orthogonalize(q, v);
                    int refills = 0;
                    while (kept < 1e-10 && refills < 4) {
                        // Krylov space exhausted in this direction; continue with a fresh vector.
                        for (auto& e : v)
                            e = 2.0 * uniform01(filler) - 1.0;
                        kept = detail::orthogonalize(q, v);
                        ++refills;
                    }
                    if (kept < 1e-10)
                        continue;
                    const double nv = detail::norm(v);
                    for (auto& e : v)
                        e /= nv;
                    std::vector<double> hv(dim);
                    h_.apply(s, v, hv);
                    ++matvecs_;
                    q.push_back(std::move(v));
                    hq.push_back(std::move(hv));
                    ++added;
                }
                if (added == 0)
                    break;
                next.assign(hq.end() - static_cast<std::ptrdiff_t>(added), hq.end());
            }

            const auto k = static_cast<Eigen::Index>(q.size());
            Eigen::MatrixXd t(k, k);
            for (Eigen::Index i = 0; i < k; ++i)
                for (Eigen::Index j = i; j < k; ++j) {
                    const double v = 0.5 * (detail::dot(q[static_cast<std::size_t>(i)], hq[static_cast<std::size_t>(j)]) +
                                            detail::dot(q[static_cast<std::size_t>(j)], hq[static_cast<std::size_t>(i)]));
                    t(i, j) = v;
                    t(j, i) = v;
                }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
            if (es.info() != Eigen::Success)
                throw EigenNotConverged("projected eigenproblem failed");

            const std::size_t keep = std::min<std::size_t>(b, static_cast<std::size_t>(k));
            std::vector<std::vector<double>> ritz(keep, std::vector<double>(dim, 0.0));
            std::vector<double> theta(keep), residual(keep);
            std::vector<double> hr(dim);
            for (std::size_t r = 0; r < keep; ++r) {
                std::fill(hr.begin(), hr.end(), 0.0);
                for (Eigen::Index i = 0; i < k; ++i) {
                    const double y = es.eigenvectors()(i, static_cast<Eigen::Index>(r));
                    detail::axpy(y, q[static_cast<std::size_t>(i)], ritz[r]);
                    detail::axpy(y, hq[static_cast<std::size_t>(i)], hr);
                }
                theta[r] = es.eigenvalues()(static_cast<Eigen::Index>(r));
                detail::axpy(-theta[r], ritz[r], hr);
                residual[r] = detail::norm(hr);
            }
            if (keep >= 2 && residual[0] <= opt_.tolerance && residual[1] <= opt_.tolerance) {
                SpectrumResult out;
                out.s = s;
                out.E0 = theta[0];
                out.E1 = theta[1];
                out.W0 = detail::weighted_hamming(ritz[0]);
                out.W1 = detail::weighted_hamming(ritz[1]);
                out.residual0 = residual[0];
                out.residual1 = residual[1];
                warm_ = ritz;
                return out;
            }
            if (static_cast<std::size_t>(k) == dim && keep >= 2) {
                // the basis spans the whole space; Ritz pairs are exact up to rounding
                throw EigenNotConverged("residual above tolerance with a complete basis");
            }
            x = std::move(ritz);
        }
        throw EigenNotConverged("block Krylov solver did not converge at s=" + std::to_string(s));
    }

    const InterpolatedHamiltonian& h_;
    EigenOptions opt_;
    std::vector<std::vector<double>> warm_;
    std::size_t matvecs_ = 0;
};

inline SpectrumResult lowest_two(const Instance& inst, const FieldCoefficients& coeffs, double s,
                                 const EigenOptions& options = {})
{
    InterpolatedHamiltonian h(inst, coeffs, options.max_n);
    LowestTwoSolver solver(h, options);
    return solver.solve(s);
}

class SpectrumScanError : public std::runtime_error {
public:
    SpectrumScanError(double s, const std::string& what)
        : std::runtime_error("spectrum scan failed at s=" + format_sci(s) + ": " + what), s_(s)
    {
    }
    double s() const noexcept { return s_; }

private:
    double s_;
};

inline std::vector<SpectrumResult> spectrum_scan(const Instance& inst, const FieldCoefficients& coeffs,
                                                 std::span<const double> grid, const EigenOptions& options = {})
{
    InterpolatedHamiltonian h(inst, coeffs, options.max_n);
    LowestTwoSolver solver(h, options);
    std::vector<SpectrumResult> rows;
    rows.reserve(grid.size());
    for (double s : grid) {
        try {
            rows.push_back(solver.solve(s));
        } catch (const std::exception& e) {
            throw SpectrumScanError(s, e.what());
        }
    }
    return rows;
}

/// Inclusive grid start, start+step, ... up to stop (with a small rounding slack).
inline std::vector<double> make_grid(double start, double stop, double step)
{
    if (!(step > 0.0) || stop < start)
        throw std::invalid_argument("grid needs step > 0 and stop >= start");
    std::vector<double> grid;
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t k = 0; k < count; ++k)
        grid.push_back(start + static_cast<double>(k) * step);
    return grid;
}

inline void write_spectrum_csv(std::ostream& out, const std::vector<SpectrumResult>& rows)
{
    out << "s,E0,E1,gap,W0,W1\n";
    for (const auto& r : rows)
        out << format_sci(r.s) << ',' << format_sci(r.E0) << ',' << format_sci(r.E1) << ',' << format_sci(r.gap())
            << ',' << format_sci(r.W0) << ',' << format_sci(r.W1) << '\n';
}

} // namespace qaa
