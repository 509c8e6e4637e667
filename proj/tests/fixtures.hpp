#pragma once

#include <rumid/model.hpp>

#include <cmath>
#include <vector>

namespace rumid::testing {

/// Three alternatives, h_j(a) = a, iid Gumbel.
inline ChoiceModelSpec m_lin(double lo = -10.0, double hi = 10.0) {
    return ChoiceModelSpec({UtilityPrimitive::linear(0, 1), UtilityPrimitive::linear(0, 1), UtilityPrimitive::linear(0, 1)},
                           NoiseSpec{}, {{lo, hi}, {lo, hi}, {lo, hi}});
}

/// Three alternatives, h_0 = ln a, h_1 = 2 ln a, h_2 = 0.5 ln a, iid Gumbel.
inline ChoiceModelSpec m_log(double lo = 0.01, double hi = 100.0) {
    return ChoiceModelSpec({UtilityPrimitive::log(1.0), UtilityPrimitive::log(2.0), UtilityPrimitive::log(0.5)},
                           NoiseSpec{}, {{lo, hi}, {lo, hi}, {lo, hi}});
}

/// M_LOG restricted to alternatives {0, 1}.
inline ChoiceModelSpec m_log_binary(double lo = 0.001, double hi = 1000.0) {
    return ChoiceModelSpec({UtilityPrimitive::log(1.0), UtilityPrimitive::log(2.0)}, NoiseSpec{}, {{lo, hi}, {lo, hi}});
}

/// Exact M_LOG probabilities q_j = a_j^alpha_j / sum_k a_k^alpha_k.
inline std::vector<double> m_log_exact(double a0, double a1, double a2) {
    const double w0 = a0, w1 = a1 * a1, w2 = std::sqrt(a2);
    const double z = w0 + w1 + w2;
    return {w0 / z, w1 / z, w2 / z};
}

/// Softmax with u_0 = a_0, u_1 = a_1 + 0.3 a_1 a_2, u_2 = a_2: breaks condition (A).
inline std::vector<double> planted_interaction(std::span<const double> a) {
    const double u0 = a[0], u1 = a[1] + 0.3 * a[1] * a[2], u2 = a[2];
    const double m = std::max({u0, u1, u2});
    const double e0 = std::exp(u0 - m), e1 = std::exp(u1 - m), e2 = std::exp(u2 - m);
    const double z = e0 + e1 + e2;
    return {e0 / z, e1 / z, e2 / z};
}

/// M_LOG density of the anchored heterogeneity variables (a_ref = 1).
inline double m_log_density(double v1, double v2) {
    const double s = 1.0 + 1.0 / v1 + 1.0 / v2;
    return 2.0 / (v1 * v1 * v2 * v2 * s * s * s);
}

inline double m_log_cdf(double v1, double v2) { return 1.0 / (1.0 + 1.0 / v1 + 1.0 / v2); }

} // namespace rumid::testing
