#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qaa/sat_instance.hpp"

namespace qaa {

class DimacsParseError : public std::runtime_error {
public:
    DimacsParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Instances are written as plain DIMACS CNF. Two comment extensions carry the
// parts that are not clauses:
//   c plant <bits>                        one line per planted assignment
//   c penalty i1 i2 i3 p1 p2 p3 0.5       weight-1/2 projector, 1-based spins
// Readers that ignore comments still see the un-penalized formula.

inline std::string to_dimacs(const Instance& inst)
{
    std::ostringstream out;
    out << "c planted 3SAT instance\n";
    for (const auto& p : inst.plants)
        out << "c plant " << p.to_string() << '\n';
    for (const auto& pen : inst.penalties) {
        out << "c penalty";
        for (auto s : pen.spins)
            out << ' ' << s + 1;
        for (auto b : pen.pattern)
            out << ' ' << static_cast<int>(b);
        out << " 0.5\n";
    }
    out << "p cnf " << inst.n << ' ' << inst.clauses.size() << '\n';
    for (const auto& c : inst.clauses) {
        for (auto lit : c.to_cnf())
            out << lit << ' ';
        out << "0\n";
    }
    return out.str();
}

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line)
{
    std::vector<std::string> tokens;
    std::istringstream in{std::string(line)};
    std::string tok;
    while (in >> tok)
        tokens.push_back(tok);
    return tokens;
}

inline long parse_long(const std::string& tok, std::size_t line)
{
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0')
        throw DimacsParseError(line, "expected an integer, got '" + tok + "'");
    return v;
}

} // namespace detail

/// Parses the format written by to_dimacs. Without "c plant" lines the plants
/// default to all-zeros and all-ones.
inline Instance from_dimacs(std::string_view text)
{
    Instance inst;
    std::optional<std::size_t> declared_m;
    std::vector<Literal> pending;
    std::size_t pending_line = 0;
    std::size_t line_no = 0;

    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        auto tokens = detail::split_ws(line);
        if (tokens.empty())
            continue;
        if (tokens[0] == "c") {
            if (tokens.size() >= 2 && tokens[1] == "plant") {
                if (tokens.size() != 3)
                    throw DimacsParseError(line_no, "malformed plant line");
                try {
                    inst.plants.push_back(BitString::parse(tokens[2]));
                } catch (const std::invalid_argument& e) {
                    throw DimacsParseError(line_no, e.what());
                }
            } else if (tokens.size() >= 2 && tokens[1] == "penalty") {
                if (tokens.size() != 9)
                    throw DimacsParseError(line_no, "penalty line needs 3 spins, 3 bits and a weight");
                PenaltyTerm pen;
                for (std::size_t k = 0; k < 3; ++k) {
                    const long s = detail::parse_long(tokens[2 + k], line_no);
                    if (s < 1)
                        throw DimacsParseError(line_no, "penalty spin must be positive");
                    pen.spins[k] = static_cast<std::uint32_t>(s - 1);
                    const long b = detail::parse_long(tokens[5 + k], line_no);
                    if (b != 0 && b != 1)
                        throw DimacsParseError(line_no, "penalty pattern bits must be 0 or 1");
                    pen.pattern[k] = static_cast<std::uint8_t>(b);
                }
                if (tokens[8] != "0.5")
                    throw DimacsParseError(line_no, "penalty weight must be 0.5");
                inst.penalties.push_back(pen);
            }
            continue;
        }
        if (tokens[0] == "p") {
            if (declared_m)
                throw DimacsParseError(line_no, "duplicate problem line");
            if (tokens.size() != 4 || tokens[1] != "cnf")
                throw DimacsParseError(line_no, "expected 'p cnf <vars> <clauses>'");
            const long n = detail::parse_long(tokens[2], line_no);
            const long m = detail::parse_long(tokens[3], line_no);
            if (n < 0 || m < 0)
                throw DimacsParseError(line_no, "negative size in problem line");
            inst.n = static_cast<std::size_t>(n);
            declared_m = static_cast<std::size_t>(m);
            continue;
        }
        if (!declared_m)
            throw DimacsParseError(line_no, "clause before problem line");
        for (const auto& tok : tokens) {
            const long lit = detail::parse_long(tok, line_no);
            if (pending.empty())
                pending_line = line_no;
            if (lit == 0) {
                if (pending.size() != 3)
                    throw DimacsParseError(pending_line, "clause must have exactly 3 literals");
                Clause c;
                for (std::size_t k = 0; k < 3; ++k) {
                    const long var = std::labs(pending[k]);
                    if (var > static_cast<long>(inst.n))
                        throw DimacsParseError(pending_line, "variable " + std::to_string(var) + " exceeds header");
                    c.spins[k] = static_cast<std::uint32_t>(var - 1);
                    c.pattern[k] = pending[k] < 0 ? 1 : 0;
                }
                if (c.spins[0] == c.spins[1] || c.spins[0] == c.spins[2] || c.spins[1] == c.spins[2])
                    throw DimacsParseError(pending_line, "clause repeats a variable");
                inst.clauses.push_back(c);
                pending.clear();
            } else {
                pending.push_back(static_cast<Literal>(lit));
            }
        }
    }
    if (!declared_m)
        throw DimacsParseError(std::max<std::size_t>(line_no, 1), "missing problem line");
    if (!pending.empty())
        throw DimacsParseError(pending_line, "unterminated clause");
    if (inst.clauses.size() != *declared_m)
        throw DimacsParseError(line_no, "header declares " + std::to_string(*declared_m) + " clauses, body has " +
                                            std::to_string(inst.clauses.size()));
    for (const auto& pen : inst.penalties)
        for (auto s : pen.spins)
            if (s >= inst.n)
                throw DimacsParseError(line_no, "penalty spin exceeds header");
    if (inst.plants.empty()) {
        inst.plants = {BitString::zeros(inst.n), BitString::ones(inst.n)};
    } else {
        for (const auto& p : inst.plants)
            if (p.size() != inst.n)
                throw DimacsParseError(line_no, "plant length differs from header");
    }
    return inst;
}

inline Instance read_dimacs_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_dimacs(buf.str());
}

inline void write_dimacs_file(const Instance& inst, const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << to_dimacs(inst);
}

} // namespace qaa
