#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "meaniter/catalog.hpp"
#include "meaniter/mean_families.hpp"
#include "oracles.hpp"

using namespace meaniter;

namespace {

constexpr bits_t B = 256;
// 2^-200 relative: comfortably above roundoff at 256 bits.
const double tight = 1e-60;

Real R(long v) { return Real(v, B); }

std::vector<Real> random_vector(std::mt19937_64& gen, std::size_t n, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Real> v;
    for (std::size_t i = 0; i < n; ++i)
        v.push_back(Real::from_double(u(gen), B));
    return v;
}

std::vector<MeanSpec> all_builtins()
{
    return {MeanSpec::arithmetic(),
            MeanSpec::geometric(),
            MeanSpec::power(Param(2L)),
            MeanSpec::power(Param::parse("-0.5")),
            MeanSpec::gini(Param(2L), Param(1L)),
            MeanSpec::gini(Param(0L), Param(0L)),
            MeanSpec::gini(Param(1L), Param(-1L)),
            MeanSpec::gini(Param(3L), Param(3L)),
            MeanSpec::quasi_arithmetic(catalog::generator("exp")),
            MeanSpec::quasi_arithmetic(catalog::generator("log")),
            MeanSpec::bajraktarevic(catalog::function("x^2", Interval::positive()),
                                    catalog::function("x", Interval::positive())),
            MeanSpec::quasideviation(catalog::deviation("bajraktarevic:x^2,x")),
            MeanSpec::quasideviation(catalog::deviation("difference:log"))};
}

} // namespace

TEST(EvalMean, GiniTwoOneIsFourteenSixths)
{
    Real v = eval_mean(MeanSpec::gini(Param(2L), Param(1L)), {R(1), R(2), R(3)});
    EXPECT_LT(oracle::rel(v, R(14) / 6L), tight);
}

TEST(EvalMean, GiniZeroZeroIsGeometric)
{
    Real v = eval_mean(MeanSpec::gini(Param(0L), Param(0L)), {R(1), R(2), R(3)});
    EXPECT_LT(oracle::rel(v, pow(R(6), R(1) / 3L)), tight);
}

TEST(EvalMean, PowerZeroIsGeometric)
{
    Real v = eval_mean(MeanSpec::power(Param(0L)), {R(1), R(4)});
    EXPECT_LT(oracle::rel(v, R(2)), tight);
}

TEST(EvalMean, GiniMatchesIndependentOracle)
{
    std::mt19937_64 gen(1);
    for (long a = -2; a <= 3; ++a)
        for (long b = -2; b <= 3; ++b) {
            auto x = random_vector(gen, 4, 0.2, 7.0);
            Real v = eval_mean(MeanSpec::gini(Param(a), Param(b)), x);
            EXPECT_LT(oracle::rel(v, oracle::gini(x, a, b, B)), tight) << a << "," << b;
        }
}

TEST(EvalMean, QuasiArithmeticExpMatchesOracle)
{
    std::mt19937_64 gen(2);
    auto m = MeanSpec::quasi_arithmetic(catalog::generator("exp"));
    for (int i = 0; i < 20; ++i) {
        auto x = random_vector(gen, 5, -3.0, 3.0);
        EXPECT_LT(oracle::rel(eval_mean(m, x), oracle::qa_exp(x, B)), tight);
    }
}

TEST(EvalMean, ReflexivityIsExact)
{
    for (const auto& m : all_builtins()) {
        Real c = Real::parse("1.7", B);
        EXPECT_EQ(eval_mean(m, {c, c, c}), c) << m.label();
        EXPECT_EQ(eval_mean(m, {c}), c) << m.label();
    }
}

TEST(EvalMean, RejectsEntriesOutsideTheDomain)
{
    EXPECT_THROW(eval_mean(MeanSpec::geometric(), {R(-1), R(2)}), domain_error);
    EXPECT_THROW(eval_mean(MeanSpec::gini(Param(1L), Param(0L)), {R(0), R(2)}), domain_error);
    EXPECT_THROW(eval_mean(MeanSpec::arithmetic(), std::vector<Real>{}), std::invalid_argument);
}

TEST(EvalMean, PowerAndGiniNeedPositiveDomain)
{
    EXPECT_THROW(MeanSpec::power(Param(2L), Interval::real_line()), domain_error);
    EXPECT_THROW(MeanSpec::gini(Param(2L), Param(1L), Interval{-1, 1}), domain_error);
}

TEST(EvalMean, BajraktarevicAxiomsAreChecked)
{
    // g = x − 2 changes sign on (0, inf)
    EXPECT_THROW(MeanSpec::bajraktarevic(catalog::function("x", Interval::positive()),
                                         catalog::function("x - 2", Interval::positive())),
                 axiom_error);
    // f/g = 1/x decreasing
    EXPECT_THROW(MeanSpec::bajraktarevic(catalog::function("1", Interval::positive()),
                                         catalog::function("x", Interval::positive())),
                 axiom_error);
}

TEST(QaInvert, Examples)
{
    auto lg = catalog::generator("log");
    EXPECT_LT(oracle::rel(qa_invert(lg, R(0), Real::parse("0.5", B), R(2)), R(1)), tight);
    auto sq = catalog::generator("x^2");
    EXPECT_LT(oracle::rel(qa_invert(sq, R(4), R(1), R(3)), R(2)), tight);
    auto ex = catalog::generator("exp");
    EXPECT_LT(oracle::rel(qa_invert(ex, exp(R(1)), Real::parse("0.5", B), R(2)), R(1)), tight);
    EXPECT_THROW(qa_invert(sq, R(100), R(1), R(3)), bracket_error);
}

TEST(QdSolve, Examples)
{
    auto c = Real::parse("2.5", B);
    auto lin = catalog::deviation("difference:x");
    EXPECT_EQ(qd_solve(lin, std::vector<Real>{c, c}), c);
    EXPECT_LT(oracle::rel(qd_solve(lin, std::vector<Real>{R(1), R(2), R(3)}), R(2)), tight);
    auto lg = catalog::deviation("difference:log");
    EXPECT_LT(oracle::rel(qd_solve(lg, std::vector<Real>{R(1), R(4)}), R(2)), tight);
}

TEST(QdSolve, ResidualIsSmallAndRootIsStrictlyInside)
{
    std::mt19937_64 gen(3);
    for (const auto& name : catalog::sample_deviation_names()) {
        auto e = catalog::deviation(name);
        auto x = random_vector(gen, 4, 0.3, 5.0);
        Real u = qd_solve(e, x);
        auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        EXPECT_GT(u, *lo) << name;
        EXPECT_LT(u, *hi) << name;
        Real sum(0L, B), scale(0L, B);
        for (const auto& xi : x) {
            sum += e(xi, u);
            scale += abs(e(xi, *lo)) + abs(e(xi, *hi));
        }
        EXPECT_LE(abs(sum), Real::pow2(32 - B, B) * scale) << name;
    }
}

TEST(QdSolve, SignViolationBetweenGridPointsRaisesBracketError)
{
    // x − u, but with the sign flipped for u in (11.3, 11.4): no point of
    // the 16-point construction grid on (10, 20) lands there.
    auto flip = [](const Real& u) { return u > Real::parse("11.3", B) && u < Real::parse("11.4", B); };
    DeviationFunction e(
        "flipped", [flip](const Real& x, const Real& u) { return flip(u) ? u - x : x - u; },
        [flip](const Real&, const Real& u) { return Real(flip(u) ? -1L : 1L, B); },
        [](const Real&, const Real&) { return Real(0L, B); }, Interval{10, 20});
    std::vector<Real> x{Real::parse("11.32", B), Real::parse("11.38", B)};
    EXPECT_THROW(qd_solve(e, x), bracket_error);
}

TEST(Axioms, GiniTwoOneOnRandomVectorsHasNoViolations)
{
    std::mt19937_64 gen(4);
    std::vector<std::vector<Real>> samples;
    std::uniform_int_distribution<int> len(1, 6);
    for (int i = 0; i < 100; ++i)
        samples.push_back(random_vector(gen, static_cast<std::size_t>(len(gen)), 0.05, 20.0));
    auto rep = probe_mean_axioms(MeanSpec::gini(Param(2L), Param(1L)), samples);
    EXPECT_TRUE(rep.ok()) << (rep.messages.empty() ? "" : rep.messages.front());
}

TEST(Axioms, MaxPlusOneIsFlagged)
{
    auto broken = MeanSpec::custom("max+1", [](std::span<const Real> x) {
        Real m = x[0];
        for (const auto& v : x)
            m = max(m, v);
        return m + 1L;
    });
    auto rep = probe_mean_axioms(broken, std::vector<std::vector<Real>>{{R(1), R(2)}});
    EXPECT_FALSE(rep.ok());
    EXPECT_GT(rep.mean_property_violations, 0u);
}

TEST(Axioms, FirstEntryIsNotSymmetric)
{
    auto first = MeanSpec::custom("first", [](std::span<const Real> x) { return x[0]; });
    auto rep = probe_mean_axioms(first, std::vector<std::vector<Real>>{{R(1), R(2), R(3)}});
    EXPECT_GT(rep.symmetry_violations, 0u);
    EXPECT_EQ(rep.mean_property_violations, 0u);
}

TEST(Axioms, GiniOneMinusOneRepetition)
{
    auto m = MeanSpec::gini(Param(1L), Param(-1L));
    std::mt19937_64 gen(5);
    for (int i = 0; i < 20; ++i) {
        auto xy = random_vector(gen, 2, 0.1, 9.0);
        std::vector<Real> xxyy{xy[0], xy[0], xy[1], xy[1]};
        EXPECT_LT(oracle::rel(eval_mean(m, xy), eval_mean(m, xxyy)), tight);
    }
}

TEST(MeanProperty, AllSixPermutationsAgree)
{
    std::mt19937_64 gen(6);
    for (const auto& m : all_builtins()) {
        auto x = random_vector(gen, 3, 0.5, 4.0);
        std::sort(x.begin(), x.end(), [](const Real& a, const Real& b) { return a < b; });
        Real ref = eval_mean(m, x);
        do {
            EXPECT_LT(oracle::rel(eval_mean(m, x), ref), tight) << m.label();
        } while (std::next_permutation(x.begin(), x.end(),
                                       [](const Real& a, const Real& b) { return a < b; }));
    }
}

TEST(MeanProperty, GiniIsSymmetricInItsParameters)
{
    std::mt19937_64 gen(7);
    for (long a = -2; a <= 2; ++a)
        for (long b = a + 1; b <= 3; ++b) {
            auto x = random_vector(gen, 5, 0.1, 10.0);
            EXPECT_LT(oracle::rel(eval_mean(MeanSpec::gini(Param(a), Param(b)), x),
                                  eval_mean(MeanSpec::gini(Param(b), Param(a)), x)),
                      tight);
        }
}

TEST(MeanProperty, GiniAlphaZeroIsPowerMean)
{
    std::mt19937_64 gen(8);
    for (const char* a : {"2", "3", "-1", "0.5", "-2.5"}) {
        auto x = random_vector(gen, 4, 0.2, 6.0);
        auto qa = MeanSpec::quasi_arithmetic(catalog::generator(std::string("x^(") + a + ")"));
        EXPECT_LT(oracle::rel(eval_mean(MeanSpec::gini(Param::parse(a), Param(0L)), x),
                              eval_mean(qa, x)),
                  tight)
            << a;
    }
}

TEST(MeanProperty, StrictFamiliesAreStrictlyInside)
{
    std::mt19937_64 gen(9);
    for (const auto& m : all_builtins()) {
        for (int i = 0; i < 10; ++i) {
            auto x = random_vector(gen, 3, 0.5, 4.0);
            Real v = eval_mean(m, x);
            auto [lo, hi] = std::minmax_element(x.begin(), x.end(),
                                                [](const Real& a, const Real& b) { return a < b; });
            EXPECT_GT(v, *lo) << m.label();
            EXPECT_LT(v, *hi) << m.label();
        }
    }
}

TEST(MeanProperty, QuasideviationMatchesBajraktarevic)
{
    std::mt19937_64 gen(10);
    const std::vector<std::pair<const char*, const char*>> pairs = {
        {"x^2", "x"}, {"x", "1"}, {"x^2*log(x)", "x^2"}, {"x^0.5", "x^-1"}, {"exp(2*x)", "exp(x)"}};
    for (auto [f, g] : pairs) {
        auto qd = MeanSpec::quasideviation(
            catalog::deviation(std::string("bajraktarevic:") + f + "," + g));
        auto bj = MeanSpec::bajraktarevic(catalog::function(f, Interval::positive()),
                                          catalog::function(g, Interval::positive()));
        for (int i = 0; i < 10; ++i) {
            auto x = random_vector(gen, 4, 0.2, 3.0);
            EXPECT_LT(oracle::rel(eval_mean(qd, x), eval_mean(bj, x)), tight) << f << "," << g;
        }
    }
}
