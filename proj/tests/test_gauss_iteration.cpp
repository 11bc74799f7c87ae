#include <gtest/gtest.h>

#include <algorithm>

#include "meaniter/catalog.hpp"
#include "meaniter/gauss_iteration.hpp"
#include "oracles.hpp"

using namespace meaniter;

namespace {

MeanSpec gini(long a, long b) { return MeanSpec::gini(Param(a), Param(b)); }

MeanTypeMapping worked_example() { return MeanTypeMapping({gini(2, 1), gini(0, 0), gini(1, -1)}); }
MeanTypeMapping agm() { return MeanTypeMapping({MeanSpec::arithmetic(), MeanSpec::geometric()}); }

std::vector<Real> vec(std::initializer_list<const char*> xs, bits_t bits)
{
    std::vector<Real> v;
    for (const char* x : xs)
        v.push_back(Real::parse(x, bits));
    return v;
}

PrecisionConfig cfg(bits_t bits) { return {bits, 32}; }

MeanSpec extreme(bool upper)
{
    return MeanSpec::custom(upper ? "max" : "min", [upper](std::span<const Real> x) {
        Real m = x[0];
        for (const auto& v : x)
            m = upper ? max(m, v) : min(m, v);
        return m;
    });
}

} // namespace

TEST(Iterate, ConstantStartIsASingleState)
{
    auto tr = iterate(worked_example(), vec({"2.5", "2.5", "2.5"}, 512), cfg(512));
    EXPECT_EQ(tr.states.size(), 1u);
    EXPECT_EQ(tr.terminated_reason, TerminationReason::became_constant);
    EXPECT_EQ(tr.invariant_estimate, Real::parse("2.5", 512));
    EXPECT_TRUE(tr.ratios.empty());
}

TEST(Iterate, ArithmeticGeometricGivesTheAgm)
{
    auto tr = iterate(agm(), vec({"1", "2"}, 1024), cfg(1024));
    EXPECT_EQ(tr.terminated_reason, TerminationReason::variance_underflow);
    Real ref = oracle::agm(1, 2, 1024);
    EXPECT_LT(oracle::rel(tr.invariant_estimate, ref), 1e-140);
    EXPECT_EQ(tr.invariant_estimate.to_string(20), "1.4567910310469068692");
}

TEST(Iterate, TwoArithmeticMeansCollapseAfterOneStep)
{
    MeanTypeMapping aa({MeanSpec::arithmetic(), MeanSpec::arithmetic()});
    auto tr = iterate(aa, vec({"1", "7"}, 256), cfg(256));
    EXPECT_EQ(tr.states.size(), 2u);
    EXPECT_EQ(tr.terminated_reason, TerminationReason::became_constant);
    EXPECT_EQ(tr.invariant_estimate, Real(4L, 256));
}

TEST(Iterate, InputValidation)
{
    EXPECT_THROW(iterate(agm(), vec({"1", "2", "3"}, 256), cfg(256)), std::invalid_argument);
    EXPECT_THROW(iterate(agm(), vec({"1", "2"}, 256), cfg(256), 0), std::invalid_argument);
    EXPECT_THROW(iterate(agm(), vec({"-1", "2"}, 256), cfg(256)), domain_error);
    EXPECT_THROW(MeanTypeMapping({MeanSpec::arithmetic()}), std::invalid_argument);
    EXPECT_EQ(agm().domain(), Interval::positive());
}

TEST(Iterate, BrokenMeanIsCaughtBySandwichCheck)
{
    auto plus_one = MeanSpec::custom("max+1", [](std::span<const Real> x) {
        Real m = x[0];
        for (const auto& v : x)
            m = max(m, v);
        return m + 1L;
    });
    MeanTypeMapping bad({MeanSpec::arithmetic(), plus_one});
    EXPECT_THROW(iterate(bad, vec({"1", "2"}, 256), cfg(256)), domain_error);
}

TEST(InvariantMean, Examples)
{
    auto im = invariant_mean(agm(), vec({"1", "2"}, 1024), cfg(1024));
    EXPECT_LT(oracle::rel(im.value, oracle::agm(1, 2, 1024)), 1e-140);
    EXPECT_LE(abs(im.value - oracle::agm(1, 2, 1024)), im.uncertainty + Real::pow2(-1000, 1024));

    auto c = invariant_mean(agm(), vec({"3", "3"}, 256), cfg(256));
    EXPECT_EQ(c.value, Real(3L, 256));
    EXPECT_TRUE(c.uncertainty.is_zero());

    auto k = invariant_mean(worked_example(), vec({"1", "2", "3"}, 4096), cfg(4096));
    EXPECT_GT(k.value, 1L);
    EXPECT_LT(k.value, 3L);
    auto k2 = invariant_mean(worked_example(), vec({"1", "2", "3"}, 8192), cfg(8192));
    EXPECT_LT(oracle::rel(k.value, k2.value), 1e-300);
}

TEST(InvariantMean, NonConvergenceNamesTheLastDiameter)
{
    MeanTypeMapping mm({extreme(false), extreme(true)});
    try {
        invariant_mean(mm, vec({"1", "2"}, 128), cfg(128), 5);
        FAIL() << "expected convergence_error";
    } catch (const convergence_error& e) {
        EXPECT_NE(std::string(e.what()).find("last diameter 1"), std::string::npos) << e.what();
    }
}

TEST(PredictedLimit, Examples)
{
    Real k = Real::parse("1.987", 512);
    EXPECT_LT(oracle::rel(predicted_limit(worked_example(), k), 1L / (2L * k * k)), 1e-140);
    EXPECT_LT(oracle::rel(predicted_limit(agm(), k), 1L / (16L * k * k)), 1e-140);
    MeanTypeMapping same({gini(2, 1), gini(2, 1), gini(2, 1)});
    EXPECT_TRUE(predicted_limit(same, k).is_zero());
}

TEST(VerifyLimit, WorkedExample)
{
    auto out = verify_limit(worked_example(), vec({"1", "2", "3"}, 8192), cfg(8192));
    ASSERT_TRUE(out.verdict);
    const auto& v = *out.verdict;
    EXPECT_LT(v.relative_gap.to_double(), 1e-6);
    EXPECT_GE(v.n_ratios_used, 5u);
    EXPECT_LT(oracle::rel(v.predicted_limit, 1L / (2L * v.invariant_mean * v.invariant_mean)), 1e-300);
}

TEST(VerifyLimit, AgmAgainstIndependentOracle)
{
    auto out = verify_limit(agm(), vec({"1", "2"}, 8192), cfg(8192));
    ASSERT_TRUE(out.verdict);
    Real k = oracle::agm(1, 2, 8192);
    EXPECT_LT(oracle::rel(out.verdict->empirical_limit, 1L / (16L * k * k)), 1e-6);
}

TEST(VerifyLimit, IdentityAndExponentialOnUnitInterval)
{
    Interval unit{0, 1};
    MeanTypeMapping m({MeanSpec::quasi_arithmetic(catalog::generator("x")).restricted_to(unit),
                       MeanSpec::quasi_arithmetic(catalog::generator("exp")).restricted_to(unit)});
    EXPECT_EQ(m.domain(), unit);
    auto out = verify_limit(m, vec({"0.1", "0.8"}, 4096), cfg(4096));
    ASSERT_TRUE(out.verdict);
    EXPECT_LT(oracle::rel(out.verdict->predicted_limit, Real(1L, 4096) / 16L), 1e-300);
    EXPECT_LT(out.verdict->relative_gap.to_double(), 1e-6);
}

TEST(VerifyLimit, ConstantStartHasNoVerdict)
{
    auto out = verify_limit(agm(), vec({"2", "2"}, 512), cfg(512));
    EXPECT_FALSE(out.verdict);
    EXPECT_EQ(out.trace.terminated_reason, TerminationReason::became_constant);
}

TEST(VerifyLimit, TooFewRatiosAsksForMoreBits)
{
    // guard 31 at 64 bits puts the usable floor at Var > 1/4·scale²
    try {
        verify_limit(agm(), vec({"1", "2"}, 64), PrecisionConfig{64, 31});
        FAIL() << "expected insufficient_ratios_error";
    } catch (const insufficient_ratios_error& e) {
        EXPECT_NE(std::string(e.what()).find("raise working_bits"), std::string::npos);
    }
}

TEST(Superlinearity, WorkedExampleIsQuadratic)
{
    auto tr = iterate(worked_example(), vec({"1", "2", "3"}, 8192), cfg(8192));
    auto rep = superlinearity_check(tr);
    ASSERT_TRUE(rep.final_quotient);
    EXPECT_LT(rep.final_quotient->to_double(), 1e-3);
    EXPECT_TRUE(rep.contracting);
    EXPECT_TRUE(rep.doubling);
}

TEST(Superlinearity, ArithmeticPairCollapsesExactly)
{
    MeanTypeMapping aa({MeanSpec::arithmetic(), MeanSpec::arithmetic()});
    auto rep = superlinearity_check(iterate(aa, vec({"1", "2"}, 256), cfg(256)));
    EXPECT_TRUE(rep.exact_collapse);
    EXPECT_NE(rep.message.find("exact collapse"), std::string::npos);
}

TEST(Superlinearity, MinMaxIsNonContracting)
{
    MeanTypeMapping mm({extreme(false), extreme(true)});
    auto tr = iterate(mm, vec({"1", "2"}, 128), cfg(128), 8);
    EXPECT_EQ(tr.terminated_reason, TerminationReason::max_iterations);
    auto rep = superlinearity_check(tr);
    ASSERT_TRUE(rep.final_quotient);
    EXPECT_EQ(*rep.final_quotient, 1L);
    EXPECT_FALSE(rep.contracting);
    EXPECT_NE(rep.message.find("non-contracting"), std::string::npos);
}

TEST(IterationProperty, EveryStepStaysInsideThePreviousRange)
{
    for (const auto& m : {worked_example(), agm()}) {
        std::vector<Real> x0 = m.size() == 3 ? vec({"0.3", "5", "2"}, 2048) : vec({"0.3", "5"}, 2048);
        auto tr = iterate(m, x0, cfg(2048));
        for (std::size_t n = 0; n + 1 < tr.states.size(); ++n) {
            auto [lo, hi] = std::minmax_element(tr.states[n].begin(), tr.states[n].end(),
                                                [](const Real& a, const Real& b) { return a < b; });
            for (const auto& y : tr.states[n + 1]) {
                EXPECT_GE(y, *lo);
                EXPECT_LE(y, *hi);
            }
        }
    }
}

TEST(IterationProperty, PermutingTheStartLeavesVarianceAndDiameterUnchanged)
{
    std::vector<Real> x0 = vec({"1", "2", "3"}, 1024);
    auto ref = iterate(worked_example(), x0, cfg(1024));
    const Real floor = ref.usable_floor();
    auto less = [](const Real& a, const Real& b) { return a < b; };
    std::sort(x0.begin(), x0.end(), less);
    while (std::next_permutation(x0.begin(), x0.end(), less)) {
        auto tr = iterate(worked_example(), x0, cfg(1024));
        ASSERT_EQ(tr.states.size(), ref.states.size());
        for (std::size_t n = 0; n < tr.states.size(); ++n) {
            if (!(ref.variances[n] > floor))
                break;
            EXPECT_LT(oracle::rel(tr.variances[n], ref.variances[n]), 1e-20) << n;
            EXPECT_LT(oracle::rel(tr.diameters[n], ref.diameters[n]), 1e-20) << n;
        }
    }
}

TEST(IterationProperty, RestartingFromAnyStateReproducesK)
{
    auto tr = iterate(worked_example(), vec({"1", "2", "3"}, 2048), cfg(2048));
    for (std::size_t n = 1; n + 1 < tr.states.size(); ++n) {
        auto again = iterate(worked_example(), tr.states[n], cfg(2048));
        EXPECT_LE(abs(again.invariant_estimate - tr.invariant_estimate),
                  tr.diameters.back() + again.diameters.back() + Real::pow2(-2000, 2048))
            << n;
    }
}

TEST(IterationProperty, RatiosAreStableUnderPrecisionDoubling)
{
    for (const auto& m : {worked_example(), agm()}) {
        auto x0 = m.size() == 3 ? vec({"1", "2", "3"}, 2048) : vec({"1", "2"}, 2048);
        auto lo = iterate(m, x0, cfg(2048));
        auto hi = iterate(m, x0, cfg(4096));
        std::size_t checked = 0;
        for (std::size_t n = 0; n < lo.ratios.size(); ++n) {
            if (!lo.ratios[n])
                continue;
            ASSERT_TRUE(hi.ratios[n]);
            EXPECT_LT(oracle::rel(*lo.ratios[n], *hi.ratios[n]), 1e-10) << n;
            ++checked;
        }
        EXPECT_GE(checked, 5u);
    }
}

TEST(IterationProperty, IdenticalResiduaGiveVanishingRatios)
{
    // ξ = 2/x for both Gini(2,1) and the power mean of order 3
    MeanTypeMapping m({gini(2, 1), MeanSpec::power(Param(3L))});
    Real k = Real::parse("1.5", 256);
    EXPECT_LT(abs(predicted_limit(m, k)).to_double(), 1e-70);
    auto tr = iterate(m, vec({"1", "2"}, 4096), cfg(4096));
    auto idx = tr.usable_ratio_indices();
    ASSERT_GE(idx.size(), 3u);
    // the positive-case limits above are of order 1e-2; here the tail is
    // far below that
    for (std::size_t k2 = idx.size() - 3; k2 < idx.size(); ++k2)
        EXPECT_LT(tr.ratios[idx[k2]]->to_double(), 1e-6);
}
