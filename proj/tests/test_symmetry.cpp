#include "fixtures.hpp"

#include <rumid/model.hpp>
#include <rumid/symmetry.hpp>

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>

using namespace rumid;
using rumid::testing::m_lin;
using rumid::testing::m_log;

namespace {

const ProbabilityField& lin41() {
    static const auto f = tabulate(m_lin(-10, 10), GridSpec::uniform(3, -1.0, 1.0, 41), ClosedForm{});
    return f;
}

// Wider than [1,4] so the spec's sample points (a_1 = 4, a_0 = 1) stay interior.
const ProbabilityField& log_wide() {
    static const auto f = tabulate(m_log(), GridSpec::uniform(3, 0.5, 5.0, 61), ClosedForm{});
    return f;
}

const ProbabilityField& log14() {
    static const auto f = tabulate(m_log(), GridSpec::uniform(3, 1.0, 4.0, 41), ClosedForm{});
    return f;
}

PointSet random_interior(const GridSpec& g, std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    PointSet out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> a(g.dims());
        for (std::size_t k = 0; k < g.dims(); ++k) {
            const auto& ax = g.axis(k);
            std::uniform_real_distribution<double> u(ax.lo + ax.step(), ax.hi - ax.step());
            a[k] = u(rng);
        }
        out.push_back(a);
    }
    return out;
}

} // namespace

TEST(SlutskyRatio, LinearModelIsOne) {
    for (const auto& a : random_interior(lin41().grid(), 20, 3)) EXPECT_NEAR(slutsky_ratio(lin41(), 0, 1, a), 1.0, 2e-3);
}

TEST(SlutskyRatio, LogModelPairOne) {
    const std::array<double, 3> a{2, 4, 2.5};
    EXPECT_NEAR(slutsky_ratio(log_wide(), 1, 0, a), 4.0 / (2 * 2.0), 2e-3);
}

TEST(SlutskyRatio, LogModelPairTwo) {
    const std::array<double, 3> a{1, 2.5, 1};
    EXPECT_NEAR(slutsky_ratio(log_wide(), 2, 0, a), 2.0, 4e-3);
}

TEST(SlutskyRatio, ReciprocalIdentity) {
    for (const auto& a : random_interior(log14().grid(), 20, 9))
        EXPECT_NEAR(slutsky_ratio(log14(), 1, 2, a) * slutsky_ratio(log14(), 2, 1, a), 1.0, 1e-4);
}

TEST(SlutskyRatio, AgreesWithAnalyticRatio) {
    const auto t = analytic_ratio(m_log(), 1, 0);
    const double h = log14().grid().axis(0).step();
    for (const auto& a : random_interior(log14().grid(), 30, 5))
        EXPECT_NEAR(slutsky_ratio(log14(), 1, 0, a), t(a[1], a[0]), 5 * h * h);
}

TEST(SlutskyRatio, DegenerateDenominator) {
    const auto f = ProbabilityField::from_function(GridSpec::uniform(3, 0.0, 1.0, 7),
                                                   [](std::span<const double>) { return std::vector<double>{0.2, 0.3, 0.5}; });
    const std::array<double, 3> a{0.5, 0.5, 0.5};
    EXPECT_THROW(slutsky_ratio(f, 0, 1, a, 1e-12), DegenerateError);
    EXPECT_THROW(slutsky_ratio(f, 1, 1, a, 1e-12), InputError);
}

TEST(DalyZachary, LinearModelPasses) {
    const auto rep = test_daly_zachary(lin41(), random_interior(lin41().grid(), 100, 1), 0.01);
    EXPECT_TRUE(rep.pass);
    EXPECT_FALSE(rep.inconclusive);
    EXPECT_EQ(rep.pairs.size(), 6u);
    EXPECT_LE(rep.max_statistic(), 0.01);
}

TEST(DalyZachary, LogModelFailsAtCorner) {
    const auto pts = random_interior(log14().grid(), 100, 2);
    const auto rep = test_daly_zachary(log14(), pts, 0.01);
    EXPECT_FALSE(rep.pass);
    // Worst point for (1,0) is where a_1/(2a_0) is farthest from one.
    const auto& p = rep.pair(1, 0);
    double expect = 0.0;
    for (const auto& a : pts) expect = std::max(expect, std::abs(a[1] / (2 * a[0]) - 1.0));
    EXPECT_NEAR(p.statistic, expect, 5e-3);
    EXPECT_NEAR(std::abs(p.worst_point[1] / (2 * p.worst_point[0]) - 1.0), p.statistic, 5e-3);
}

TEST(DalyZachary, SinglePairSinglePoint) {
    const auto f = tabulate(rumid::testing::m_log_binary(0.1, 10), GridSpec::uniform(2, 0.5, 2.0, 41), ClosedForm{});
    // t_10 = a_1/(2a_0) = 1 on the line a_1 = 2 a_0.
    const auto rep = test_daly_zachary(f, {{0.8, 1.6}}, 0.01);
    EXPECT_TRUE(rep.pass);
    EXPECT_EQ(rep.pairs.size(), 2u);
}

TEST(DalyZachary, AllDegenerateIsInconclusive) {
    const auto f = ProbabilityField::from_function(GridSpec::uniform(3, 0.0, 1.0, 7),
                                                   [](std::span<const double>) { return std::vector<double>{0.2, 0.3, 0.5}; });
    const auto rep = test_daly_zachary(f, {{0.5, 0.5, 0.5}}, 0.01, 1e-12);
    EXPECT_TRUE(rep.inconclusive);
    EXPECT_FALSE(rep.pass);
}

TEST(ConditionA, LogModelPasses) {
    const auto rep = test_condition_A(log14(), 0, interior_nodes(log14().grid(), 40), 5e-3);
    EXPECT_TRUE(rep.pass) << rep.max_statistic();
    EXPECT_FALSE(rep.vacuous);
    EXPECT_EQ(rep.pairs.size(), 2u);
}

TEST(ConditionA, PlantedInteractionFails) {
    const GridSpec g = GridSpec::uniform(3, -1.0, 1.0, 41);
    const auto f = ProbabilityField::from_function(g, rumid::testing::planted_interaction);
    const auto rep = test_condition_A(f, 0, interior_nodes(g, 40), 5e-3);
    EXPECT_FALSE(rep.pass);
    EXPECT_GE(rep.pair(1, 0).statistic, 0.05);
    // The spread grows with the a_2 range swept.
    const GridSpec narrow = GridSpec::uniform(3, -0.5, 0.5, 21);
    const auto fn = ProbabilityField::from_function(narrow, rumid::testing::planted_interaction);
    const auto rn = test_condition_A(fn, 0, interior_nodes(narrow, 40), 5e-3);
    EXPECT_LT(rn.pair(1, 0).statistic, rep.pair(1, 0).statistic);
}

TEST(ConditionA, BinaryFieldIsVacuous) {
    const auto f = tabulate(rumid::testing::m_log_binary(0.1, 10), GridSpec::uniform(2, 0.5, 2.0, 11), ClosedForm{});
    const auto rep = test_condition_A(f, 0, {{1.0, 1.0}}, 5e-3);
    EXPECT_TRUE(rep.vacuous);
    EXPECT_TRUE(rep.pass);
}

TEST(Pivot, RecommendsNonDegeneratePivot) {
    const auto d = recommend_pivot(log14());
    EXPECT_LT(d.recommended, 3u);
}

TEST(Sieve, LogModelLogPolynomial) {
    // Log-spaced axes: the ratio is exactly linear in ln a, and central differences in ln a are more accurate.
    const GridSpec g = GridSpec::uniform(3, 1.0, 4.0, 41, AxisScale::log);
    const auto f = tabulate(m_log(), g, ClosedForm{});
    const auto t = fit_ratio_sieve(f, 1, 0, SieveBasis::log_polynomial, 1);
    ASSERT_TRUE(t.is_sieve());
    const auto& c = t.sieve().coefficients;
    ASSERT_EQ(c.size(), 3u);
    EXPECT_NEAR(c[0], -std::log(2.0), 1e-3);
    EXPECT_NEAR(c[1], 1.0, 1e-3);
    EXPECT_NEAR(c[2], -1.0, 1e-3);
    EXPECT_LE(t.sieve().residual_rms, 1e-3);
    EXPECT_NEAR(t(2.0, 1.0), 1.0, 2e-3);
}

TEST(Sieve, LinearModelConstant) {
    const auto t = fit_ratio_sieve(lin41(), 1, 0, SieveBasis::polynomial, 0);
    EXPECT_NEAR(t.sieve().coefficients[0], 1.0, 2e-3);
    EXPECT_NEAR(t(0.3, -0.2), 1.0, 2e-3);
}

TEST(Sieve, UnderdeterminedIsRankError) {
    const auto f = tabulate(m_log(), GridSpec::uniform(3, 1.0, 4.0, 5), ClosedForm{});
    // 27 interior nodes, 28 terms at degree 6.
    EXPECT_THROW(fit_ratio_sieve(f, 1, 0, SieveBasis::log_polynomial, 6), NumericalError);
}

TEST(Sieve, NegativeRatioUnderLogBasis) {
    // q_1 increasing in a_0 makes dq_1/da_0 positive, so t_10 < 0.
    const GridSpec g = GridSpec::uniform(3, 1.0, 2.0, 9);
    const auto f = ProbabilityField::from_function(g, [](std::span<const double> a) {
        const double q1 = 0.2 + 0.05 * a[0] + 0.05 * a[1];
        const double q2 = 0.2 + 0.02 * a[2] - 0.03 * a[0];
        return std::vector<double>{1.0 - q1 - q2, q1, q2};
    });
    EXPECT_THROW(fit_ratio_sieve(f, 1, 0, SieveBasis::log_polynomial, 1), NumericalError);
}

TEST(Sieve, JsonRoundTrip) {
    const auto t = fit_ratio_sieve(log14(), 2, 0, SieveBasis::log_polynomial, 2);
    const auto back = ratio_from_json(to_json(t));
    EXPECT_DOUBLE_EQ(back(2.2, 1.7), t(2.2, 1.7));
    EXPECT_NEAR(t(2.0, 1.0), 4.0, 1e-2);
}
