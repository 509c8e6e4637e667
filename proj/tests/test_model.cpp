#include "fixtures.hpp"

#include <rumid/model.hpp>

#include <gtest/gtest.h>

#include <array>
#include <cmath>

using namespace rumid;
using rumid::testing::m_lin;
using rumid::testing::m_log;

TEST(UtilityValue, LinearIdentity) { EXPECT_DOUBLE_EQ(utility_value(m_lin(), 0, 3.0), 3.0); }

TEST(UtilityValue, LogClosedForm) {
    ChoiceModelSpec m({UtilityPrimitive::log(2.0), UtilityPrimitive::log(1.0)}, {}, {{0.1, 10}, {0.1, 10}});
    EXPECT_NEAR(utility_value(m, 0, 4.0), 2.0 * std::log(4.0), 1e-15);
    EXPECT_NEAR(utility_value(m, 0, 4.0), 2.7726, 1e-4);
}

TEST(UtilityValue, PowerAtZeroIsDomainError) {
    const auto p = UtilityPrimitive::power(1.0, 0.5);
    EXPECT_THROW(p.value(0.0), DomainError);
    ChoiceModelSpec m({p, p}, {}, {{0.5, 2}, {0.5, 2}});
    EXPECT_THROW(utility_value(m, 0, 0.0), DomainError);
    EXPECT_NEAR(utility_value(m, 1, 1.0), 1.0, 1e-15);
}

TEST(UtilityValue, DomainRequiresPositiveForLog) {
    EXPECT_THROW(ChoiceModelSpec({UtilityPrimitive::log(1), UtilityPrimitive::log(1)}, {}, {{0.0, 1}, {0.1, 1}}),
                 InputError);
}

TEST(ModelSpec, RejectsNonMonotoneUtility) {
    EXPECT_THROW(ChoiceModelSpec({UtilityPrimitive::linear(0, -1), UtilityPrimitive::linear(0, 1)}, {}, {{0, 1}, {0, 1}}),
                 InputError);
    // h(a) = a^2 - a decreases on [0, 0.5].
    EXPECT_THROW(ChoiceModelSpec({UtilityPrimitive::polynomial({0, -1, 1}), UtilityPrimitive::linear(0, 1)}, {},
                                 {{0, 2}, {0, 2}}),
                 InputError);
}

TEST(ModelSpec, RejectsBadCorrelation) {
    NoiseSpec n{NoiseKind::gaussian_correlated, 1.0, {{1, 2}, {2, 1}}};
    EXPECT_THROW(ChoiceModelSpec({UtilityPrimitive::linear(0, 1), UtilityPrimitive::linear(0, 1)}, n, {{0, 1}, {0, 1}}),
                 InputError);
}

TEST(ClosedForm, SymmetricPoint) {
    const std::array<double, 3> a{0, 0, 0};
    const auto q = choice_prob_closed_form(m_lin(-100, 100), a);
    for (double x : q) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

TEST(ClosedForm, LogModelOracle) {
    // q_j = a_j^alpha_j / sum_k a_k^alpha_k with denominators 2 + 1 + 2 = 5.
    const std::array<double, 3> a{2, 1, 4};
    const auto q = choice_prob_closed_form(m_log(), a);
    EXPECT_NEAR(q[0], 0.4, 1e-14);
    EXPECT_NEAR(q[1], 0.2, 1e-14);
    EXPECT_NEAR(q[2], 0.4, 1e-14);
    EXPECT_NEAR(q.sum(), 1.0, 1e-12);
}

TEST(ClosedForm, TwoAlternativeLimit) {
    const std::array<double, 3> a{1, 0, -50};
    const auto q = choice_prob_closed_form(m_lin(-100, 100), a);
    EXPECT_LT(q[2], 1e-20);
    EXPECT_NEAR(q[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(q[0], 0.7311, 1e-4);
}

TEST(ClosedForm, RequiresGumbel) {
    ChoiceModelSpec m({UtilityPrimitive::linear(0, 1), UtilityPrimitive::linear(0, 1)},
                      NoiseSpec{NoiseKind::gaussian_iid, 1.0, {}}, {{0, 1}, {0, 1}});
    const std::array<double, 2> a{0.5, 0.5};
    EXPECT_THROW(choice_prob_closed_form(m, a), InputError);
}

TEST(ClosedForm, RelabelingInvariance) {
    // Permuting alternatives together with their offers permutes the probabilities.
    ChoiceModelSpec m({UtilityPrimitive::log(1.0), UtilityPrimitive::log(2.0), UtilityPrimitive::log(0.5)}, {},
                      {{0.1, 10}, {0.1, 10}, {0.1, 10}});
    ChoiceModelSpec p({UtilityPrimitive::log(0.5), UtilityPrimitive::log(1.0), UtilityPrimitive::log(2.0)}, {},
                      {{0.1, 10}, {0.1, 10}, {0.1, 10}});
    const std::array<double, 3> a{1.3, 2.2, 3.7};
    const std::array<double, 3> b{3.7, 1.3, 2.2};
    const auto qa = choice_prob_closed_form(m, a);
    const auto qb = choice_prob_closed_form(p, b);
    EXPECT_NEAR(qa[0], qb[1], 1e-14);
    EXPECT_NEAR(qa[1], qb[2], 1e-14);
    EXPECT_NEAR(qa[2], qb[0], 1e-14);
}

TEST(ClosedForm, LinearModelHasNoIncomeEffects) {
    const auto m = m_lin(-100, 100);
    for (double c : {-3.0, 0.25, 7.5}) {
        const std::array<double, 3> a{0.3, -0.7, 1.1};
        const std::array<double, 3> b{0.3 + c, -0.7 + c, 1.1 + c};
        EXPECT_LT(choice_prob_closed_form(m, a).max_abs_diff(choice_prob_closed_form(m, b)), 1e-14);
    }
}

TEST(ClosedForm, LogModelDependsOnPowersOnly) {
    // (2,1,4) and (8,2,1): a_j^alpha_j become (2,1,2) and (8,4,1) -- different; pick a paired point instead:
    // (2,1,4) vs (4, sqrt(2), 16) scales every a_j^alpha_j by 2.
    const auto m = m_log();
    const std::array<double, 3> a{2, 1, 4};
    const std::array<double, 3> b{4, std::sqrt(2.0), 16};
    EXPECT_LT(choice_prob_closed_form(m, a).max_abs_diff(choice_prob_closed_form(m, b)), 1e-14);
}

TEST(MonteCarlo, MatchesSymmetricOracle) {
    const std::array<double, 3> a{0, 0, 0};
    const auto q = choice_prob_monte_carlo(m_lin(-100, 100), a, 1'000'000, 42);
    for (double x : q) EXPECT_NEAR(x, 1.0 / 3.0, 0.0015);
    EXPECT_DOUBLE_EQ(q.sum(), 1.0);
}

TEST(MonteCarlo, MatchesLogOracle) {
    const std::array<double, 3> a{2, 1, 4};
    const auto q = choice_prob_monte_carlo(m_log(), a, 1'000'000, 7);
    EXPECT_NEAR(q[0], 0.4, 0.0015);
    EXPECT_NEAR(q[1], 0.2, 0.0015);
    EXPECT_NEAR(q[2], 0.4, 0.0015);
}

TEST(MonteCarlo, SingleDrawIsOneHot) {
    const std::array<double, 3> a{2, 1, 4};
    const auto q = choice_prob_monte_carlo(m_log(), a, 1, 3);
    int ones = 0;
    for (double x : q) {
        EXPECT_TRUE(x == 0.0 || x == 1.0);
        ones += x == 1.0;
    }
    EXPECT_EQ(ones, 1);
}

TEST(MonteCarlo, CorrelatedGaussianRuns) {
    NoiseSpec n{NoiseKind::gaussian_correlated, 1.0, {{1, 0.5, 0.2}, {0.5, 1, 0.3}, {0.2, 0.3, 1}}};
    ChoiceModelSpec m({UtilityPrimitive::linear(0, 1), UtilityPrimitive::linear(0, 1), UtilityPrimitive::linear(0, 1)},
                      n, {{-5, 5}, {-5, 5}, {-5, 5}});
    const std::array<double, 3> a{0, 0, 0};
    const auto q = choice_prob_monte_carlo(m, a, 200000, 11);
    // Exchangeable utilities but unequal correlations: probabilities differ from 1/3,
    // yet still sum to one exactly by construction.
    EXPECT_DOUBLE_EQ(q.sum(), 1.0);
    EXPECT_GT(q[2], 1.0 / 3.0);  // least correlated with the others
}

TEST(MonteCarlo, ConvergesToClosedFormOnGrid) {
    const auto m = m_log();
    const std::size_t n = 20000;
    const GridSpec g = GridSpec::uniform(3, 1.0, 4.0, 5);
    const auto cf = tabulate(m, g, ClosedForm{});
    const auto mc = tabulate(m, g, MonteCarlo{n, 5});
    double worst = 0.0;
    for (std::size_t i = 0; i < cf.raw().size(); ++i) worst = std::max(worst, std::abs(cf.raw()[i] - mc.raw()[i]));
    EXPECT_LE(worst, 4.0 * std::sqrt(0.25 / static_cast<double>(n)));
}

TEST(Tabulate, StructureAndDeterminism) {
    const GridSpec g = GridSpec::uniform(3, -1.0, 1.0, 5);
    const auto f = tabulate(m_lin(), g, ClosedForm{});
    EXPECT_EQ(g.node_count(), 125u);
    for (std::size_t n = 0; n < g.node_count(); ++n) EXPECT_NEAR(f.node_probs(n).sum(), 1.0, 1e-12);
    const auto a = tabulate(m_lin(), g, MonteCarlo{500, 99});
    const auto b = tabulate(m_lin(), g, MonteCarlo{500, 99});
    EXPECT_EQ(a.raw(), b.raw());
}

TEST(Tabulate, NearestNodeMatchesOracle) {
    const GridSpec g = GridSpec::uniform(3, 0.5, 4.0, 21);
    const auto f = tabulate(m_log(), g, ClosedForm{});
    // (2, 1, 4) is not a node of this grid (spacing 0.175); compare the nearest node to the oracle there.
    std::array<std::size_t, 3> idx{};
    const std::array<double, 3> target{2, 1, 4};
    for (int k = 0; k < 3; ++k) idx[k] = static_cast<std::size_t>(std::lround((target[k] - 0.5) / 0.175));
    const auto node = g.node_point(g.flat(idx));
    const auto exact = rumid::testing::m_log_exact(node[0], node[1], node[2]);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(f.at(g.flat(idx), j), exact[j], 1e-14);
}

TEST(Tabulate, RejectsGridOutsideDomain) {
    EXPECT_THROW(tabulate(m_log(0.5, 4.0), GridSpec::uniform(3, 0.1, 4.0, 5), ClosedForm{}), InputError);
}

TEST(ModelJson, ParsesAndValidates) {
    const auto doc = nlohmann::json::parse(R"({"alternatives": 3,
        "utilities": [{"kind":"log","params":[1.0]}, {"kind":"log","params":[2.0]}, {"kind":"log","params":[0.5]}],
        "noise": {"kind":"gumbel_iid"}, "domain": [[0.5,4.0],[0.5,4.0],[0.5,4.0]]})");
    const auto m = model_from_json(doc);
    EXPECT_EQ(m.alternatives(), 3u);
    const std::array<double, 3> a{2, 1, 4};
    EXPECT_NEAR(choice_prob_closed_form(m, a)[1], 0.2, 1e-14);
    auto bad = doc;
    bad["alternatives"] = 4;
    EXPECT_THROW(model_from_json(bad), InputError);
    auto bad_kind = doc;
    bad_kind["utilities"][0]["kind"] = "cubic";
    EXPECT_THROW(model_from_json(bad_kind), InputError);
    EXPECT_EQ(to_json(model_from_json(to_json(m))), to_json(m));
}
