#pragma once

#include <rumid/errors.hpp>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

namespace rumid {

struct Rk4Options {
    /// Largest step in the independent variable.
    double step = 0.01;
    /// Step-doubling discrepancy allowed per step, scaled by max(1, |y|).
    double local_tol = 1e-9;
    /// How many times a rejected step may be halved before giving up.
    int max_halvings = 4;
};

struct Rk4Result {
    double x = 0.0;
    double y = 0.0;
    std::size_t steps = 0;
    std::size_t halvings = 0;
    /// The visitor asked to stop before x1 was reached.
    bool stopped = false;
};

template <class F>
double rk4_step(F& f, double x, double y, double h) {
    const double k1 = f(x, y);
    const double k2 = f(x + 0.5 * h, y + 0.5 * h * k1);
    const double k3 = f(x + 0.5 * h, y + 0.5 * h * k2);
    const double k4 = f(x + h, y + h * k3);
    return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {

template <class F>
double rk4_checked(F& f, double x, double y, double h, int depth, const Rk4Options& opt, Rk4Result& res) {
    const double full = rk4_step(f, x, y, h);
    const double mid = rk4_step(f, x, y, 0.5 * h);
    const double two = rk4_step(f, x + 0.5 * h, mid, 0.5 * h);
    if (!std::isfinite(full) || !std::isfinite(two))
        throw NumericalError("non-finite slope while integrating near x = " + std::to_string(x));
    if (std::abs(full - two) <= opt.local_tol * std::max(1.0, std::abs(y))) return full;
    if (depth >= opt.max_halvings)
        throw NumericalError("step underflow after " + std::to_string(depth) + " halvings near x = " +
                             std::to_string(x));
    ++res.halvings;
    const double y_mid = rk4_checked(f, x, y, 0.5 * h, depth + 1, opt, res);
    return rk4_checked(f, x + 0.5 * h, y_mid, 0.5 * h, depth + 1, opt, res);
}

} // namespace detail

/// Classical RK4 for y' = f(x, y) from (x0, y0) to x1 in equal steps no
/// larger than opt.step. Each step is checked against two half steps and
/// subdivided when they disagree. `visit(x, y)` sees every accepted point
/// (including the start) and returns false to stop early.
template <class F, class Visit>
Rk4Result rk4_integrate(F&& f, double x0, double y0, double x1, const Rk4Options& opt, Visit&& visit) {
    if (!(opt.step > 0.0)) throw InputError("integration step must be > 0");
    Rk4Result res{x0, y0, 0, 0, false};
    if (!visit(x0, y0)) {
        res.stopped = true;
        return res;
    }
    const double span = x1 - x0;
    if (span == 0.0) return res;
    const auto n = static_cast<std::size_t>(std::ceil(std::abs(span) / opt.step - 1e-9));
    const double h = span / static_cast<double>(n);
    double y = y0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = x0 + static_cast<double>(i) * h;
        y = detail::rk4_checked(f, x, y, h, 0, opt, res);
        const double xn = (i + 1 == n) ? x1 : x0 + static_cast<double>(i + 1) * h;
        ++res.steps;
        res.x = xn;
        res.y = y;
        if (!visit(xn, y)) {
            res.stopped = true;
            return res;
        }
    }
    return res;
}

template <class F>
Rk4Result rk4_integrate(F&& f, double x0, double y0, double x1, const Rk4Options& opt) {
    return rk4_integrate(std::forward<F>(f), x0, y0, x1, opt, [](double, double) { return true; });
}

} // namespace rumid
