#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qaa/bitstring.hpp"

namespace qaa {

/// Thrown when a search exceeds its decision budget.
class SolverBudgetExceeded : public std::runtime_error {
public:
    explicit SolverBudgetExceeded(std::uint64_t budget)
        : std::runtime_error("DPLL decision budget of " + std::to_string(budget) + " exceeded"),
          budget_(budget)
    {
    }
    std::uint64_t budget() const noexcept { return budget_; }

private:
    std::uint64_t budget_;
};

/// DIMACS-style literal: +v is x_v, -v is not x_v, variables numbered from 1.
using Literal = int;
using CnfClause = std::vector<Literal>;

/// Chronological-backtracking DPLL with two-watched-literal unit propagation.
///
/// Branching is fixed: the lowest-index unassigned variable, value 0 first.
/// No clause learning, so the search tree and the returned model are a
/// deterministic function of the clause list. Clauses may be added between
/// calls to solve(); each call searches from scratch.
class DpllSolver {
public:
    static constexpr std::uint64_t default_budget = 50'000'000;

    explicit DpllSolver(std::size_t num_vars, std::uint64_t decision_budget = default_budget)
        : num_vars_(num_vars), budget_(decision_budget), watches_(2 * num_vars),
          assigns_(num_vars, unassigned)
    {
    }

    std::size_t num_vars() const noexcept { return num_vars_; }
    std::size_t num_clauses() const noexcept { return clauses_.size() + units_.size() + (has_empty_ ? 1 : 0); }
    std::uint64_t last_decisions() const noexcept { return decisions_; }

    void add_clause(const CnfClause& clause)
    {
        std::vector<std::uint32_t> lits;
        lits.reserve(clause.size());
        for (Literal l : clause) {
            if (l == 0 || static_cast<std::size_t>(std::abs(l)) > num_vars_)
                throw std::invalid_argument("literal " + std::to_string(l) + " out of range");
            lits.push_back(encode(l));
        }
        if (lits.empty()) {
            has_empty_ = true;
            return;
        }
        if (lits.size() == 1) {
            units_.push_back(lits[0]);
            return;
        }
        const auto index = static_cast<std::uint32_t>(clauses_.size());
        watches_[lits[0]].push_back(index);
        watches_[lits[1]].push_back(index);
        clauses_.push_back(std::move(lits));
    }

    /// Returns a satisfying assignment, or nullopt when the clause set is unsatisfiable.
    std::optional<BitString> solve()
    {
        decisions_ = 0;
        trail_.clear();
        levels_.clear();
        qhead_ = 0;
        std::fill(assigns_.begin(), assigns_.end(), unassigned);

        if (has_empty_)
            return std::nullopt;
        for (auto lit : units_) {
            const int v = value(lit);
            if (v == 0)
                return std::nullopt;
            if (v == unassigned)
                enqueue(lit);
        }
        if (!propagate())
            return std::nullopt;

        std::size_t next_var = 0;
        for (;;) {
            while (next_var < num_vars_ && assigns_[next_var] != unassigned)
                ++next_var;
            if (next_var == num_vars_) {
                BitString model(num_vars_);
                for (std::size_t v = 0; v < num_vars_; ++v)
                    model.set(v, assigns_[v] == 1);
                return model;
            }
            count_decision();
            const std::uint32_t decision = 2 * static_cast<std::uint32_t>(next_var) + 1; // x = 0
            levels_.push_back({trail_.size(), decision, false});
            enqueue(decision);

            while (!propagate()) {
                while (!levels_.empty() && levels_.back().flipped) {
                    undo_to(levels_.back().trail_start);
                    levels_.pop_back();
                }
                if (levels_.empty())
                    return std::nullopt;
                auto& top = levels_.back();
                undo_to(top.trail_start);
                top.flipped = true;
                count_decision();
                enqueue(top.decision ^ 1u);
            }
            next_var = 0;
        }
    }

private:
    static constexpr std::int8_t unassigned = -1;

    struct Level {
        std::size_t trail_start;
        std::uint32_t decision;
        bool flipped;
    };

    static std::uint32_t encode(Literal l)
    {
        const auto var = static_cast<std::uint32_t>(std::abs(l) - 1);
        return 2 * var + (l < 0 ? 1u : 0u);
    }

    /// 1 true, 0 false, -1 unassigned.
    int value(std::uint32_t lit) const noexcept
    {
        const auto a = assigns_[lit >> 1];
        if (a == unassigned)
            return unassigned;
        return a ^ static_cast<int>(lit & 1u);
    }

    void enqueue(std::uint32_t lit)
    {
        assigns_[lit >> 1] = static_cast<std::int8_t>(1 ^ (lit & 1u));
        trail_.push_back(lit);
    }

    void undo_to(std::size_t size)
    {
        while (trail_.size() > size) {
            assigns_[trail_.back() >> 1] = unassigned;
            trail_.pop_back();
        }
        qhead_ = size;
    }

    void count_decision()
    {
        if (++decisions_ > budget_)
            throw SolverBudgetExceeded(budget_);
    }

    bool propagate()
    {
        while (qhead_ < trail_.size()) {
            const std::uint32_t false_lit = trail_[qhead_++] ^ 1u;
            auto& ws = watches_[false_lit];
            std::size_t keep = 0;
            for (std::size_t i = 0; i < ws.size(); ++i) {
                const auto ci = ws[i];
                auto& c = clauses_[ci];
                if (c[0] == false_lit)
                    std::swap(c[0], c[1]);
                if (value(c[0]) == 1) {
                    ws[keep++] = ci;
                    continue;
                }
                bool moved = false;
                for (std::size_t k = 2; k < c.size(); ++k) {
                    if (value(c[k]) != 0) {
                        std::swap(c[1], c[k]);
                        watches_[c[1]].push_back(ci);
                        moved = true;
                        break;
                    }
                }
                if (moved)
                    continue;
                ws[keep++] = ci;
                if (value(c[0]) == 0) {
                    for (++i; i < ws.size(); ++i)
                        ws[keep++] = ws[i];
                    ws.resize(keep);
                    return false;
                }
                enqueue(c[0]);
            }
            ws.resize(keep);
        }
        return true;
    }

    std::size_t num_vars_;
    std::uint64_t budget_;
    std::vector<std::vector<std::uint32_t>> clauses_;
    std::vector<std::uint32_t> units_;
    bool has_empty_ = false;
    std::vector<std::vector<std::uint32_t>> watches_;
    std::vector<std::int8_t> assigns_;
    std::vector<std::uint32_t> trail_;
    std::vector<Level> levels_;
    std::size_t qhead_ = 0;
    std::uint64_t decisions_ = 0;
};

/// One-shot convenience wrapper.
inline std::optional<BitString> dpll_solve(std::size_t num_vars, const std::vector<CnfClause>& cnf,
                                           std::uint64_t decision_budget = DpllSolver::default_budget)
{
    DpllSolver solver(num_vars, decision_budget);
    for (const auto& c : cnf)
        solver.add_clause(c);
    return solver.solve();
}

/// The clause excluded by exactly one assignment: at least one variable differs from z.
inline CnfClause blocking_clause(const BitString& z)
{
    CnfClause c;
    c.reserve(z.size());
    for (std::size_t v = 0; v < z.size(); ++v) {
        const auto var = static_cast<Literal>(v + 1);
        c.push_back(z[v] ? -var : var);
    }
    return c;
}

} // namespace qaa
