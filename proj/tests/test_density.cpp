#include "fixtures.hpp"

#include <rumid/characteristics.hpp>
#include <rumid/density.hpp>
#include <rumid/model.hpp>

#include <gtest/gtest.h>

#include <array>
#include <cmath>

using namespace rumid;
using rumid::testing::m_log;
using rumid::testing::m_log_cdf;
using rumid::testing::m_log_density;

namespace {

struct LogSetup {
    ProbabilityField field;
    OmegaSet omegas;
};

OmegaSet analytic_omegas(const ChoiceModelSpec& model, const GridSpec& g) {
    std::vector<std::shared_ptr<const OmegaFunction>> w(model.alternatives());
    for (std::size_t j = 1; j < model.alternatives(); ++j) {
        const Rect box{g.axis(j).lo, g.axis(j).hi, g.axis(0).lo, g.axis(0).hi};
        w[j] = build_omega(analytic_ratio(model, j, 0), box, 1.0);
    }
    return OmegaSet(0, w);
}

const LogSetup& three() {
    static const LogSetup s = [] {
        const auto model = m_log(1e-3, 1e3);
        const GridSpec g = GridSpec::uniform(3, 0.02, 50.0, 81, AxisScale::log);
        auto f = tabulate(model, g, ClosedForm{});
        auto w = analytic_omegas(model, g);
        return LogSetup{std::move(f), std::move(w)};
    }();
    return s;
}

const LogSetup& two() {
    static const LogSetup s = [] {
        const auto model = rumid::testing::m_log_binary(1e-4, 1e4);
        const GridSpec g = GridSpec::uniform(2, 1e-3, 1e3, 201, AxisScale::log);
        auto f = tabulate(model, g, ClosedForm{});
        auto w = analytic_omegas(model, g);
        return LogSetup{std::move(f), std::move(w)};
    }();
    return s;
}

} // namespace

TEST(OmegaSetTest, RejectsMismatchedPairs) {
    const auto& s = three();
    std::vector<std::shared_ptr<const OmegaFunction>> w{nullptr, s.omegas.ptr(2), s.omegas.ptr(1)};
    EXPECT_THROW(OmegaSet(0, w), InputError);
    EXPECT_THROW(OmegaSet(1, {nullptr, s.omegas.ptr(1)}), InputError);
}

TEST(Cdf, LogModelAtOne) {
    const auto& s = three();
    const std::array<double, 2> v{1.0, 1.0};
    const auto F = reconstruct_cdf(s.field, s.omegas, v, {1.5, 2.0, 3.0});
    EXPECT_EQ(F.values.size(), 3u);
    EXPECT_NEAR(F.F, 1.0 / 3.0, 2e-3);
    EXPECT_LE(F.spread, 5e-3);
}

TEST(Cdf, DefaultPivotsAndOracle) {
    const auto& s = three();
    for (const auto& v : {std::array<double, 2>{0.5, 2.0}, std::array<double, 2>{3.0, 0.7}}) {
        const auto F = reconstruct_cdf(s.field, s.omegas, v);
        EXPECT_EQ(F.values.size(), 3u);
        EXPECT_NEAR(F.F, m_log_cdf(v[0], v[1]), 2e-3);
    }
}

TEST(Cdf, ApproachesOneAtTop) {
    const auto& s = three();
    const std::array<double, 2> v{200.0, 200.0};
    EXPECT_NEAR(reconstruct_cdf(s.field, s.omegas, v).F, m_log_cdf(200, 200), 2e-3);
    EXPECT_GT(reconstruct_cdf(s.field, s.omegas, v).F, 0.98);
}

TEST(Cdf, OutsideSupportIsError) {
    const auto& s = three();
    const std::array<double, 2> v{1e7, 1e-7};
    EXPECT_THROW(reconstruct_cdf(s.field, s.omegas, v), CoverageError);
}

TEST(Density, LogModelAtOne) {
    const auto& s = three();
    const std::array<double, 2> v{1.0, 1.0};
    const auto p = density_at(s.field, s.omegas, v);
    ASSERT_TRUE(p);
    EXPECT_NEAR(p->f, 2.0 / 27.0, 5e-3);
    EXPECT_NEAR(p->f_alt, 2.0 / 27.0, 5e-3);
}

TEST(Density, BinaryReduction) {
    const auto& s = two();
    const std::array<double, 1> v{1.0};
    const auto p = density_at(s.field, s.omegas, v);
    ASSERT_TRUE(p);
    EXPECT_NEAR(p->f, 0.25, 2e-3);
    EXPECT_NEAR(p->f_alt, 0.25, 2e-3);
}

TEST(Density, GridMatchesClosedForm) {
    const auto& s = three();
    const GridSpec vg({default_v_axis(0.1, 10.0, 41), default_v_axis(0.1, 10.0, 41)});
    const auto d = reconstruct_density(s.field, s.omegas, vg);
    EXPECT_EQ(d.masked, 0u);
    EXPECT_TRUE(d.ok());
    EXPECT_GE(d.min_f_raw, -1e-4);
    double worst = 0.0;
    for (std::size_t n = 0; n < vg.node_count(); ++n) {
        const auto v = vg.node_point(n);
        worst = std::max(worst, std::abs(d.f[n] - m_log_density(v[0], v[1])) / d.max_f);
        EXPECT_NEAR(d.F[n], m_log_cdf(v[0], v[1]), 2e-3);
    }
    EXPECT_LE(worst, 0.03);
    EXPECT_LE(d.route_disagreement, d.route_tolerance);
}

TEST(Density, MonotoneCdfAndConsistentMass) {
    const auto& s = three();
    const GridSpec vg({default_v_axis(0.2, 5.0, 61), default_v_axis(0.2, 5.0, 61)});
    const auto d = reconstruct_density(s.field, s.omegas, vg);
    for (std::size_t i = 0; i < 61; ++i)
        for (std::size_t k = 0; k + 1 < 61; ++k) {
            EXPECT_LE(d.F[i * 61 + k], d.F[i * 61 + k + 1] + 1e-9);
            EXPECT_LE(d.F[k * 61 + i], d.F[(k + 1) * 61 + i] + 1e-9);
        }
    // Cumulative trapezoid mass up to interior nodes equals the F inclusion-exclusion.
    for (std::size_t i : {20ul, 40ul, 60ul}) {
        const std::array<std::size_t, 2> lo{0, 0}, hi{i, i};
        const double m = box_mass(d, lo, hi);
        const double fF = d.F[i * 61 + i] - d.F[i * 61] - d.F[i] + d.F[0];
        EXPECT_NEAR(m, fF, 1e-2);
    }
}

TEST(Normalization, BinaryTails) {
    const auto& s = two();
    const GridSpec vg({default_v_axis(0.01, 100.0, 401)});
    const auto d = reconstruct_density(s.field, s.omegas, vg);
    EXPECT_EQ(d.masked, 0u);
    const auto rep = check_normalization(d);
    EXPECT_NEAR(rep.mass, 1.0 - 1.0 / 101.0 - 0.01 / 1.01, 2e-3);
    EXPECT_NEAR(rep.F_box_mass, rep.mass, 2e-3);
}

TEST(Normalization, HalfBoxMatchesCornerF) {
    const auto& s = two();
    const GridSpec vg({default_v_axis(0.01, 1.0, 201)});
    const auto d = reconstruct_density(s.field, s.omegas, vg);
    const auto rep = check_normalization(d);
    EXPECT_NEAR(rep.mass, rep.F_top_corner - d.F[0], 2e-3);
    EXPECT_NEAR(rep.F_top_corner, 0.5, 2e-3);
}

TEST(Normalization, DefaultAxisScale) {
    EXPECT_EQ(default_v_axis(0.05, 40, 11).scale, AxisScale::log);
    EXPECT_EQ(default_v_axis(0.5, 4, 11).scale, AxisScale::linear);
    EXPECT_EQ(default_v_axis(-1, 4, 11).scale, AxisScale::linear);
}
