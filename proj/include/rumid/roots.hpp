#pragma once

#include <rumid/errors.hpp>

#include <cmath>
#include <string>
#include <utility>

namespace rumid {

struct RootOptions {
    /// Absolute tolerance in x, scaled by max(1, |x|).
    double x_tol = 1e-9;
    int bisection_steps = 40;
    int max_secant_steps = 60;
};

/// Solves f(x) = target for f monotone (either direction) on [lo, hi].
///
/// Bisection narrows the bracket, then safeguarded secant steps polish the
/// root; a secant step leaving the bracket falls back to bisection. Throws
/// RangeError carrying the attained interval when target is not bracketed.
template <class F>
double solve_monotone(F&& f, double target, double lo, double hi, const RootOptions& opt = {}) {
    if (lo > hi) std::swap(lo, hi);
    double flo = f(lo) - target;
    double fhi = f(hi) - target;
    if (!std::isfinite(flo) || !std::isfinite(fhi)) throw NumericalError("non-finite value at root bracket ends");
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) {
        const double a = flo + target;
        const double b = fhi + target;
        throw RangeError("level " + std::to_string(target) + " outside attained range [" +
                             std::to_string(std::min(a, b)) + ", " + std::to_string(std::max(a, b)) + "]",
                         std::min(a, b), std::max(a, b));
    }
    auto tol = [&](double x) { return opt.x_tol * std::max(1.0, std::abs(x)); };
    for (int i = 0; i < opt.bisection_steps && hi - lo > tol(lo); ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid) - target;
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    double x0 = lo, f0 = flo, x1 = hi, f1 = fhi;
    for (int i = 0; i < opt.max_secant_steps; ++i) {
        if (hi - lo <= tol(lo)) break;
        double x = (f1 != f0) ? x1 - f1 * (x1 - x0) / (f1 - f0) : 0.5 * (lo + hi);
        if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
        const double fx = f(x) - target;
        if (fx == 0.0) return x;
        if ((fx > 0.0) == (flo > 0.0)) {
            lo = x;
            flo = fx;
        } else {
            hi = x;
            fhi = fx;
        }
        const double step = std::abs(x - x1);
        x0 = x1;
        f0 = f1;
        x1 = x;
        f1 = fx;
        if (step <= tol(x)) return x;
    }
    return std::abs(flo) < std::abs(fhi) ? lo : hi;
}

} // namespace rumid
