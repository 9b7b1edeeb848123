#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qaa/dimacs.hpp"
#include "qaa/dpll.hpp"
#include "qaa/sat_instance.hpp"

using namespace qaa;

namespace {

bool model_satisfies(const std::vector<CnfClause>& cnf, const BitString& z)
{
    return std::all_of(cnf.begin(), cnf.end(), [&](const CnfClause& c) {
        return std::any_of(c.begin(), c.end(), [&](Literal l) {
            const bool v = z[static_cast<std::size_t>(std::abs(l) - 1)];
            return l > 0 ? v : !v;
        });
    });
}

bool cnf_satisfiable_by_enumeration(std::size_t n, const std::vector<CnfClause>& cnf)
{
    for (std::uint64_t z = 0; z < (std::uint64_t{1} << n); ++z)
        if (model_satisfies(cnf, BitString::from_index(z, n)))
            return true;
    return false;
}

} // namespace

TEST(Dpll, EmptyCnfGivesAllZeros)
{
    const auto model = dpll_solve(4, {});
    ASSERT_TRUE(model.has_value());
    EXPECT_EQ(*model, BitString::zeros(4));
}

TEST(Dpll, DirectContradictionIsUnsat)
{
    EXPECT_FALSE(dpll_solve(1, {{1}, {-1}}).has_value());
}

TEST(Dpll, SixPatternBlockedOnBothPlantsIsUnsat)
{
    std::vector<CnfClause> cnf;
    for (const auto& c : oracle::six_pattern().clauses)
        cnf.push_back(c.to_cnf());
    cnf.push_back(blocking_clause(BitString::zeros(3)));
    cnf.push_back(blocking_clause(BitString::ones(3)));
    EXPECT_FALSE(dpll_solve(3, cnf).has_value());
}

TEST(Dpll, AgreesWithEnumerationOnRandomCnf)
{
    Rng rng = make_rng(11);
    int sat = 0, unsat = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 3 + uniform_index(rng, 10);
        const std::size_t m = uniform_index(rng, 6 * n);
        std::vector<CnfClause> cnf;
        for (std::size_t k = 0; k < m; ++k) {
            const auto t = random_triple(n, rng);
            CnfClause c;
            for (auto v : t)
                c.push_back((rng() >> 63) ? static_cast<Literal>(v + 1) : -static_cast<Literal>(v + 1));
            cnf.push_back(c);
        }
        const auto model = dpll_solve(n, cnf);
        const bool truth = cnf_satisfiable_by_enumeration(n, cnf);
        ASSERT_EQ(model.has_value(), truth) << "trial " << trial;
        if (model) {
            EXPECT_TRUE(model_satisfies(cnf, *model));
            ++sat;
        } else {
            ++unsat;
        }
    }
    EXPECT_GT(sat, 0);
    EXPECT_GT(unsat, 0);
}

TEST(Dpll, DeterministicModel)
{
    const std::vector<CnfClause> cnf{{1, 2, 3}, {-1, 2}, {-2, 3}};
    EXPECT_EQ(dpll_solve(3, cnf), dpll_solve(3, cnf));
    // lowest index first, value 0 first: x1 = 0, x2 = 0 forces x3 = 1
    EXPECT_EQ(dpll_solve(3, cnf)->to_string(), "001");
}

TEST(Dpll, BudgetExceeded)
{
    // pigeonhole-like: all 8 sign patterns on 3 variables, needs several decisions
    std::vector<CnfClause> cnf;
    for (int mask = 0; mask < 8; ++mask)
        cnf.push_back({(mask & 1) ? 1 : -1, (mask & 2) ? 2 : -2, (mask & 4) ? 3 : -3});
    EXPECT_THROW(dpll_solve(3, cnf, 1), SolverBudgetExceeded);
    EXPECT_FALSE(dpll_solve(3, cnf).has_value());
}

TEST(Dpll, RejectsOutOfRangeLiteral)
{
    DpllSolver s(2);
    EXPECT_THROW(s.add_clause({3}), std::invalid_argument);
    EXPECT_THROW(s.add_clause({0}), std::invalid_argument);
}

TEST(Dpll, BlockingClauseExcludesOnlyThatString)
{
    const auto z = BitString::parse("0110");
    const auto c = blocking_clause(z);
    for (std::uint64_t x = 0; x < 16; ++x) {
        const auto b = BitString::from_index(x, 4);
        EXPECT_EQ(model_satisfies({c}, b), b != z);
    }
}

TEST(Clause, CnfOfPattern100)
{
    Clause c{{0, 1, 2}, {1, 0, 0}};
    EXPECT_EQ(c.to_cnf(), (CnfClause{-1, 2, 3}));
    Instance inst;
    inst.n = 3;
    inst.clauses = {c};
    inst.plants = {BitString::zeros(3), BitString::ones(3)};
    const auto text = to_dimacs(inst);
    EXPECT_NE(text.find("\n-1 2 3 0\n"), std::string::npos);
}

TEST(Clause, CnfClauseFalsifiedExactlyByPattern)
{
    for (const auto& p : allowed_patterns) {
        Clause c{{2, 0, 4}, p};
        for (std::uint64_t x = 0; x < 32; ++x) {
            const auto z = BitString::from_index(x, 5);
            EXPECT_EQ(c.violated_by(z), !model_satisfies({c.to_cnf()}, z));
        }
    }
}

TEST(Certify, SixPatternHasExactlyTwoModels)
{
    EXPECT_TRUE(certify_exactly_two(oracle::six_pattern()));
}

TEST(Certify, EmptyClauseListIsNotCertified)
{
    Instance inst;
    inst.n = 3;
    inst.plants = {BitString::zeros(3), BitString::ones(3)};
    EXPECT_FALSE(certify_exactly_two(inst));
}

TEST(Certify, PlantViolatingClauseIsRejected)
{
    auto inst = oracle::six_pattern();
    inst.clauses.push_back({{0, 1, 2}, {0, 0, 0}});
    EXPECT_THROW(certify_exactly_two(inst), std::invalid_argument);
}

TEST(Generate, EightBitInstanceHasExactlyThePlants)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng = make_rng(seed);
        const auto inst = generate_double_plant(8, rng);
        EXPECT_EQ(oracle::models(inst), (std::vector<std::uint64_t>{0, 255})) << "seed " << seed;
        EXPECT_TRUE(certify_exactly_two(inst));
        EXPECT_EQ(inst.plants[0], BitString::zeros(8));
        EXPECT_EQ(inst.plants[1], BitString::ones(8));
    }
}

TEST(Generate, CertificationAgreesWithEnumerationUpToTwelveBits)
{
    Rng rng = make_rng(99);
    for (std::size_t n = 3; n <= 12; ++n) {
        const auto inst = generate_double_plant(n, rng);
        const bool two = oracle::models(inst).size() == 2;
        EXPECT_EQ(certify_exactly_two(inst), two);
        EXPECT_TRUE(two);
        // dropping the last clause must leave a third model, otherwise generation stopped late
        auto shorter = inst;
        shorter.clauses.pop_back();
        EXPECT_GT(oracle::models(shorter).size(), 2u) << "n=" << n;
        EXPECT_FALSE(certify_exactly_two(shorter));
    }
}

TEST(Generate, PatternsAreAllowedAndPlantsSatisfy)
{
    Rng rng = make_rng(5);
    for (int k = 0; k < 20; ++k) {
        const auto inst = generate_double_plant(20, rng);
        EXPECT_EQ(inst.m(), inst.clauses.size());
        for (const auto& c : inst.clauses) {
            EXPECT_TRUE(is_allowed_pattern(c.pattern));
            EXPECT_NE(c.spins[0], c.spins[1]);
            EXPECT_NE(c.spins[0], c.spins[2]);
            EXPECT_NE(c.spins[1], c.spins[2]);
            EXPECT_FALSE(c.violated_by(inst.plants[0]));
            EXPECT_FALSE(c.violated_by(inst.plants[1]));
        }
    }
}

TEST(Generate, EverySingleFlipOfAPlantViolatesAClause)
{
    Rng rng = make_rng(6);
    for (int k = 0; k < 20; ++k) {
        const auto inst = generate_double_plant(16, rng);
        for (const auto& p : inst.plants)
            for (std::size_t i = 0; i < inst.n; ++i)
                EXPECT_GE(oracle::energy(inst, oracle::index_of(p.flipped(i))), 1.0);
    }
}

TEST(Generate, ClauseCountConcentrates)
{
    for (std::size_t n : {16u, 24u, 32u}) {
        const double nl = static_cast<double>(n) * std::log(static_cast<double>(n));
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            Rng rng = derive_stream(seed, {n});
            const auto inst = generate_double_plant(n, rng);
            EXPECT_GE(static_cast<double>(inst.m()), nl) << "n=" << n << " seed=" << seed;
            EXPECT_LE(static_cast<double>(inst.m()), 10.0 * nl) << "n=" << n << " seed=" << seed;
        }
    }
}

TEST(Generate, SameSeedSameInstance)
{
    Rng a = make_rng(3), b = make_rng(3);
    const auto x = generate_double_plant(14, a);
    const auto y = generate_double_plant(14, b);
    EXPECT_EQ(x.clauses, y.clauses);
}

TEST(Generate, ClauseCapRaises)
{
    Rng rng = make_rng(1);
    GenerationOptions opt;
    opt.clause_cap = 3;
    EXPECT_THROW(generate_double_plant(12, rng, opt), GenerationLimitExceeded);
    EXPECT_EQ(default_clause_cap(16), static_cast<std::size_t>(std::ceil(20.0 * 16 * std::log(16.0))));
}

TEST(Generate, RejectsTinyN)
{
    Rng rng = make_rng(1);
    EXPECT_THROW(generate_double_plant(2, rng), std::invalid_argument);
}

TEST(MultiPlant, OnlyModelsAreThePlants)
{
    Rng rng = make_rng(21);
    for (int k = 0; k < 5; ++k) {
        const auto inst = generate_multi_plant(12, 3, rng);
        ASSERT_EQ(inst.plants.size(), 3u);
        std::vector<std::uint64_t> expected;
        for (const auto& p : inst.plants)
            expected.push_back(oracle::index_of(p));
        std::sort(expected.begin(), expected.end());
        EXPECT_EQ(oracle::models(inst), expected);
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = a + 1; b < 3; ++b)
                EXPECT_GE(inst.plants[a].hamming_distance(inst.plants[b]), 3u);
        EXPECT_TRUE(certify_exactly_plants(inst));
    }
}

TEST(Penalty, TargetZerosLiftsOnlyZeros)
{
    const auto pen = add_penalty(oracle::six_pattern(), Plant::zeros);
    EXPECT_EQ(oracle::energy(pen, 0b000), 0.5);
    EXPECT_EQ(oracle::energy(pen, 0b111), 0.0);
    ASSERT_EQ(pen.penalties.size(), 1u);
    EXPECT_EQ(pen.penalties[0].pattern, (Pattern{0, 0, 0}));
    EXPECT_EQ(pen.penalties[0].spins, (SpinTriple{0, 1, 2}));
}

TEST(Penalty, TargetOnesMirrors)
{
    const auto pen = add_penalty(oracle::six_pattern(), Plant::ones);
    EXPECT_EQ(oracle::energy(pen, 0b000), 0.0);
    EXPECT_EQ(oracle::energy(pen, 0b111), 0.5);
}

TEST(Penalty, DifferenceIsHalfOnlyOnTargetPattern)
{
    Rng rng = make_rng(8);
    const auto inst = generate_double_plant(9, rng);
    for (Plant t : {Plant::zeros, Plant::ones}) {
        const auto pen = add_penalty(inst, t);
        const int want = t == Plant::ones ? 1 : 0;
        for (std::uint64_t z = 0; z < 512; ++z) {
            const double diff = oracle::energy(pen, z) - oracle::energy(inst, z);
            const bool match = oracle::bit(z, 0) == want && oracle::bit(z, 1) == want && oracle::bit(z, 2) == want;
            EXPECT_EQ(diff, match ? 0.5 : 0.0);
        }
    }
}

TEST(Penalty, ConfigurableSpins)
{
    Rng rng = make_rng(8);
    const auto inst = generate_double_plant(9, rng);
    const auto pen = add_penalty(inst, Plant::ones, {4, 6, 8});
    EXPECT_EQ(pen.penalties[0].spins, (SpinTriple{4, 6, 8}));
    EXPECT_THROW(add_penalty(inst, Plant::ones, {4, 4, 8}), std::invalid_argument);
    EXPECT_THROW(add_penalty(inst, Plant::ones, {4, 5, 9}), std::invalid_argument);
}

TEST(Dimacs, RoundTripKeepsClauseMultiset)
{
    Rng rng = make_rng(4);
    auto inst = add_penalty(generate_double_plant(8, rng), Plant::ones);
    inst.clauses.push_back(inst.clauses.front()); // duplicates survive
    const auto back = from_dimacs(to_dimacs(inst));
    EXPECT_EQ(back.n, inst.n);
    EXPECT_EQ(back.clauses, inst.clauses);
    EXPECT_EQ(back.plants, inst.plants);
    EXPECT_EQ(back.penalties, inst.penalties);
    EXPECT_EQ(to_dimacs(back), to_dimacs(inst));
}

TEST(Dimacs, PenaltyIsACommentLine)
{
    const auto pen = add_penalty(oracle::six_pattern(), Plant::zeros);
    const auto text = to_dimacs(pen);
    EXPECT_NE(text.find("c penalty 1 2 3 0 0 0 0.5\n"), std::string::npos);
    EXPECT_NE(text.find("p cnf 3 6\n"), std::string::npos);
}

TEST(Dimacs, HeaderMismatchIsAParseError)
{
    try {
        from_dimacs("p cnf 3 2\n1 2 3 0\n");
        FAIL() << "expected a parse error";
    } catch (const DimacsParseError& e) {
        EXPECT_GE(e.line(), 1u);
    }
}

TEST(Dimacs, MalformedInputsReportLines)
{
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            from_dimacs(text);
        } catch (const DimacsParseError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of("1 2 3 0\n"), 1u);
    EXPECT_EQ(line_of("c x\np cnf 3 1\n1 2 x 0\n"), 3u);
    EXPECT_EQ(line_of("p cnf 3 1\n1 2 0\n"), 2u);
    EXPECT_EQ(line_of("p cnf 3 1\n1 2 4 0\n"), 2u);
    EXPECT_EQ(line_of("p cnf 3 1\n1 1 2 0\n"), 2u);
    EXPECT_EQ(line_of("p cnf 3 1\nc penalty 1 2 3 0 0 0 1.0\n1 2 3 0\n"), 2u);
    EXPECT_GT(line_of("p cnf 3 1\n1 2 3\n"), 0u);
    EXPECT_GT(line_of(""), 0u);
}

TEST(Dimacs, ClauseMaySpanLinesAndPlantsDefault)
{
    const auto inst = from_dimacs("p cnf 4 2\n-1 2\n3 0 2 -3 4 0\n");
    ASSERT_EQ(inst.m(), 2u);
    EXPECT_EQ(inst.clauses[0].pattern, (Pattern{1, 0, 0}));
    EXPECT_EQ(inst.plants[0], BitString::zeros(4));
    EXPECT_EQ(inst.plants[1], BitString::ones(4));
}
