#include "fixtures.hpp"

#include <rumid/characteristics.hpp>
#include <rumid/model.hpp>
#include <rumid/symmetry.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace rumid;
using rumid::testing::m_lin;
using rumid::testing::m_log;

namespace {

const Rect box14{1.0, 4.0, 1.0, 4.0};

RatioFunction t10() { return analytic_ratio(m_log(), 1, 0); }
RatioFunction t20() { return analytic_ratio(m_log(), 2, 0); }

double path_end(const CharacteristicPath& p) { return p.points.back().second; }

} // namespace

TEST(Characteristic, SeparableSolution) {
    // da_1/da_0 = a_1 / (2 a_0) gives a_1 = C sqrt(a_0); from (1, 1), a_1(4) = 2.
    const auto p = integrate_characteristic(t10(), {1.0, 1.0}, 4.0, 0.01);
    EXPECT_FALSE(p.clipped);
    EXPECT_DOUBLE_EQ(p.points.back().first, 4.0);
    EXPECT_NEAR(path_end(p), 2.0, 1e-8);
}

TEST(Characteristic, FourthOrderConvergence) {
    // Coarse steps so the error clears rounding.
    const Rk4Options fixed{0.5, std::numeric_limits<double>::infinity(), 0};
    Rk4Options half = fixed;
    half.step = 0.25;
    const double e1 = std::abs(path_end(integrate_characteristic(t10(), {1.0, 1.0}, 4.0, fixed)) - 2.0);
    const double e2 = std::abs(path_end(integrate_characteristic(t10(), {1.0, 1.0}, 4.0, half)) - 2.0);
    EXPECT_NEAR(e1 / e2, 16.0, 3.0);
}

TEST(Characteristic, BackwardIntegration) {
    const auto p = integrate_characteristic(t10(), {4.0, 2.0}, 1.0, 0.01);
    EXPECT_NEAR(path_end(p), 1.0, 1e-8);
}

TEST(Characteristic, FlatAndUnitSlope) {
    const auto zero = constant_ratio(0.0, 1, 0, box14);
    const auto p0 = integrate_characteristic(zero, {1.5, 2.5}, 3.5, 0.1);
    for (const auto& [a0, aj] : p0.points) EXPECT_EQ(aj, 2.5);
    const auto one = constant_ratio(1.0, 1, 0, Rect{-5, 5, -5, 5});
    const auto p1 = integrate_characteristic(one, {-1.0, 0.5}, 2.0, 0.1);
    for (const auto& [a0, aj] : p1.points) EXPECT_NEAR(aj - a0, 1.5, 1e-12);
}

TEST(Characteristic, ClippedAtDomainEdge) {
    // a_1 = sqrt(a_0) * 2 leaves a_1 <= 4 at a_0 = 4 exactly; start higher so it exits.
    const auto p = integrate_characteristic(t10(), {1.0, 3.0}, 4.0, 0.01, box14);
    EXPECT_TRUE(p.clipped);
    EXPECT_LT(p.points.back().first, 4.0);
    EXPECT_LE(path_end(p), 4.0);
}

TEST(Characteristic, StartOutsideDomain) {
    EXPECT_THROW(integrate_characteristic(t10(), {0.5, 1.0}, 4.0, 0.01, box14), DomainError);
}

TEST(Omega, LogModelAlternativeOne) {
    const auto w = build_omega(t10(), box14, 1.0);
    EXPECT_NEAR((*w)(1.0, 4.0), 4.0, 1e-6);
    EXPECT_NEAR((*w)(2.0, 4.0), 1.0, 1e-6);
    for (double a1 : {1.3, 2.7, 3.9})
        for (double a0 : {1.1, 2.2, 3.3}) EXPECT_NEAR((*w)(a1, a0), a0 / (a1 * a1), 1e-6);
}

TEST(Omega, LogModelAlternativeTwo) {
    const auto w = build_omega(t20(), box14, 1.0);
    EXPECT_NEAR((*w)(4.0, 2.0), 1.0, 1e-6);
}

TEST(Omega, AnchoringConvention) {
    const auto w = build_omega(t10(), box14, 2.5);
    for (double a0 : {1.0, 1.7, 2.9, 4.0}) EXPECT_NEAR((*w)(2.5, a0), a0, 1e-9);
}

TEST(Omega, LinearDomainUnitCharacteristics) {
    const auto one = constant_ratio(1.0, 1, 0, Rect{-1, 1, -1, 1});
    const auto w = build_omega(one, Rect{-1, 1, -1, 1}, 0.0, [] { OmegaOptions o; o.margin = 1.2; return o; }());
    EXPECT_EQ(w->scale_j(), AxisScale::linear);
    for (double aj : {-0.8, 0.1, 0.9})
        for (double a0 : {-0.9, 0.0, 0.7}) EXPECT_NEAR((*w)(aj, a0), a0 - aj, 1e-9);
}

TEST(Omega, InvariantAlongTrace) {
    const auto w = build_omega(t10(), box14, 1.0);
    const auto p = integrate_characteristic(t10(), {1.0, 1.5}, 4.0, 0.01);
    const double ref = (*w)(p.points.front().second, p.points.front().first);
    for (std::size_t i = 0; i < p.points.size(); i += 25)
        EXPECT_NEAR((*w)(p.points[i].second, p.points[i].first), ref, 1e-6);
}

TEST(Omega, ValidationLattice) {
    const auto w = build_omega(t20(), box14, 1.0);
    const auto v = validate_omega(*w);
    EXPECT_TRUE(v.monotone_ok);
    EXPECT_EQ(v.uncovered, 0u);
    EXPECT_LE(v.max_pde_residual, 5 * 0.01 * 0.01);
    EXPECT_LE(v.max_anchor_error, 1e-9);
}

TEST(Omega, LevelSetsMatchGenerator) {
    // h_0(a_0) - h_1(a_1) constant along level sets of omega_1 = a_0/a_1^2.
    const auto w = build_omega(t10(), box14, 1.0);
    for (double c : {0.3, 0.6, 1.0}) {
        double lo = 1e9, hi = -1e9;
        for (double a1 = 1.0; a1 <= 2.0; a1 += 0.1) {
            const double a0 = c * a1 * a1 * 3.0;
            if (a0 < 1.0 || a0 > 4.0) continue;
            const double v = (*w)(a1, a0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        EXPECT_LE(hi - lo, 1e-6);
    }
}

TEST(Omega, WideDomainCovered) {
    const Rect wide{0.05, 30, 0.05, 30};
    const auto w = build_omega(t10(), wide, 1.0);
    EXPECT_EQ(w->coverage().uncovered_points, 0u);
    EXPECT_NEAR((*w)(30.0, 0.05), 0.05 / 900.0, 1e-9);
    EXPECT_NEAR((*w)(0.05, 30.0), 30.0 / 0.0025, 1e-6 * 12000.0);
}

TEST(Omega, VerticalCharacteristicsAreUncovered) {
    // t = 0 for a_j > 3: characteristics there never cross a_j = 1.
    const RatioFunction t(1, 0, box14, AnalyticRatio{[](double aj, double) { return aj < 3.0 ? 1.0 : 0.0; }, "step"});
    OmegaOptions o;
    o.scale_j = o.scale_0 = AxisScale::linear;
    EXPECT_THROW(build_omega(t, box14, 1.0, o), CoverageError);
    o.allow_partial = true;
    const auto w = build_omega(t, box14, 1.0, o);
    EXPECT_LT(w->coverage().covered_fraction, 0.8);
    EXPECT_GE(w->coverage().uncovered.j_lo, 3.0);
    EXPECT_NEAR((*w)(2.0, 3.0), 2.0, 1e-9);
    EXPECT_THROW((*w)(3.5, 2.0), CoverageError);
}

TEST(Omega, SieveRatioFromField) {
    const GridSpec g = GridSpec::uniform(3, 1.0, 4.0, 41, AxisScale::log);
    const auto f = tabulate(m_log(), g, ClosedForm{});
    const auto t = fit_ratio_sieve(f, 1, 0, SieveBasis::log_polynomial, 1);
    const auto w = build_omega(t, box14, 1.0);
    EXPECT_NEAR((*w)(2.0, 4.0), 1.0, 2e-3);
}

TEST(Utility, InvertsOmega) {
    const UtilityFunction u(build_omega(t10(), box14, 1.0));
    EXPECT_NEAR(utility_eval(u, 2.0, 1.0), 4.0, 1e-6);
    EXPECT_NEAR(utility_eval(u, 1.0, 2.5), 2.5, 1e-9);
    for (double a1 : {1.2, 3.1})
        for (double a0 : {1.3, 3.7}) EXPECT_NEAR(utility_eval(u, a1, (u.omega())(a1, a0)), a0, 1e-6);
}

TEST(Utility, PivotIsIdentity) {
    const UtilityFunction u0(0);
    EXPECT_EQ(utility_eval(u0, 2.75, 123.0), 2.75);
}

TEST(Utility, RangeErrorBelowAttained) {
    const UtilityFunction u(build_omega(t10(), box14, 1.0));
    try {
        utility_eval(u, 2.0, 1e-4);
        FAIL() << "expected RangeError";
    } catch (const RangeError& e) {
        EXPECT_GT(e.attained_lo(), 1e-4);
        EXPECT_GT(e.attained_hi(), e.attained_lo());
    }
}

TEST(Utility, IncreasingInAj) {
    const UtilityFunction u(build_omega(t20(), box14, 1.0));
    double prev = -1.0;
    for (double a2 = 1.0; a2 <= 4.0; a2 += 0.25) {
        const double w = utility_eval(u, a2, 1.0);
        EXPECT_GT(w, prev);
        prev = w;
    }
}

TEST(Lipschitz, Examples) {
    EXPECT_EQ(lipschitz_diagnostic(constant_ratio(1.0, 1, 0, box14), box14).value, 0.0);
    EXPECT_NEAR(lipschitz_diagnostic(t10(), box14).value, 0.5, 1e-6);
    EXPECT_NEAR(lipschitz_diagnostic(t20(), box14).value, 2.0, 1e-6);
    EXPECT_FALSE(lipschitz_diagnostic(t20(), box14).warning);
    EXPECT_TRUE(lipschitz_diagnostic(t20(), box14, 1.0).warning);
}
