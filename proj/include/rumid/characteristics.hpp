#pragma once

#include <rumid/errors.hpp>
#include <rumid/grid.hpp>
#include <rumid/ratio.hpp>
#include <rumid/rk4.hpp>
#include <rumid/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rumid {

// ---------------------------------------------------------------------------
// Single characteristics

struct CharacteristicPath {
    /// (a_0, a_j) pairs, starting point first.
    std::vector<std::pair<double, double>> points;
    /// The trace left the domain rectangle before reaching the target.
    bool clipped = false;
    std::size_t halvings = 0;
};

/// RK4 trace of da_j/da_0 = t(a_j, a_0) from `start` = (a_0, a_j) to a_0 = target_a0.
///
/// The path stops at the last accepted point inside `domain` (t.domain() when
/// omitted) and sets `clipped`.
inline CharacteristicPath integrate_characteristic(const RatioFunction& t, std::pair<double, double> start,
                                                   double target_a0, const Rk4Options& opt,
                                                   std::optional<Rect> domain = std::nullopt) {
    const Rect box = domain ? *domain : t.domain();
    if (!box.contains(start.second, start.first)) throw DomainError("characteristic start outside the domain");
    CharacteristicPath path;
    auto slope = [&](double a0, double aj) {
        const double v = t(aj, a0);
        if (!std::isfinite(v)) throw NumericalError("ratio not finite at (a_j, a_0) = (" + std::to_string(aj) + ", " +
                                                    std::to_string(a0) + ")");
        return v;
    };
    const auto res = rk4_integrate(slope, start.first, start.second, target_a0, opt, [&](double a0, double aj) {
        if (!box.contains(aj, a0)) {
            path.clipped = true;
            return false;
        }
        path.points.emplace_back(a0, aj);
        return true;
    });
    path.halvings = res.halvings;
    return path;
}

inline CharacteristicPath integrate_characteristic(const RatioFunction& t, std::pair<double, double> start,
                                                   double target_a0, double step,
                                                   std::optional<Rect> domain = std::nullopt) {
    return integrate_characteristic(t, start, target_a0, Rk4Options{step, 1e-12, 4}, domain);
}

// ---------------------------------------------------------------------------
// Lipschitz diagnostic

struct LipschitzReport {
    /// max |dt/da_j| over the lattice; the constant in the existence argument.
    double value = 0.0;
    double max_dt_da0 = 0.0;
    std::pair<double, double> argmax{};  // (a_j, a_0)
    bool warning = false;
};

inline LipschitzReport lipschitz_diagnostic(const RatioFunction& t, const Rect& domain, double threshold = 1e3,
                                            std::size_t n = 101) {
    LipschitzReport rep;
    const double hj = 1e-6 * std::max(1.0, domain.j_hi - domain.j_lo);
    const double h0 = 1e-6 * std::max(1.0, domain.m_hi - domain.m_lo);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            const double aj = domain.j_lo + (domain.j_hi - domain.j_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
            const double a0 = domain.m_lo + (domain.m_hi - domain.m_lo) * static_cast<double>(k) / static_cast<double>(n - 1);
            // One-sided at the rectangle edges so the ratio is never evaluated outside it.
            const double jl = std::max(domain.j_lo, aj - hj), jh = std::min(domain.j_hi, aj + hj);
            const double ml = std::max(domain.m_lo, a0 - h0), mh = std::min(domain.m_hi, a0 + h0);
            const double dj = std::abs((t(jh, a0) - t(jl, a0)) / (jh - jl));
            const double d0 = std::abs((t(aj, mh) - t(aj, ml)) / (mh - ml));
            if (dj > rep.value) {
                rep.value = dj;
                rep.argmax = {aj, a0};
            }
            rep.max_dt_da0 = std::max(rep.max_dt_da0, d0);
        }
    rep.warning = rep.value > threshold;
    return rep;
}

// ---------------------------------------------------------------------------
// Level functions

struct OmegaOptions {
    /// RK4 step in axis coordinates (ln a on log axes).
    double step = 0.01;
    /// Integration box enlargement, as a fraction of each range in axis coordinates.
    double margin = 0.2;
    std::size_t columns = 121;
    /// Characteristics started on the anchor column.
    std::size_t traces = 601;
    int max_halvings = 4;
    /// Accept partial coverage of the domain; uncovered points raise CoverageError on evaluation.
    bool allow_partial = false;
    /// Axis scales; log by default when the range is positive.
    std::optional<AxisScale> scale_j;
    std::optional<AxisScale> scale_0;
};

struct CoverageReport {
    double covered_fraction = 1.0;
    /// Bounding box of uncovered lattice points (meaningless when fully covered).
    Rect uncovered{};
    std::size_t uncovered_points = 0;
    std::size_t points = 0;
};

/// The level function omega_j(a_j, a_0): the a_0-coordinate at which the
/// characteristic through (a_j, a_0) crosses a_j = a_ref.
///
/// Backed by characteristics started at evenly spaced levels on the anchor
/// column and traced column by column across the enlarged box. A query flows
/// from its a_j to the nearest column and interpolates the level there with a
/// four-point Lagrange stencil.
class OmegaFunction {
public:
    OmegaFunction(RatioFunction t, Rect domain, double a_ref, const OmegaOptions& opt)
        : t_(std::move(t)), domain_(domain), a_ref_(a_ref), opt_(opt) {
        if (!(domain.j_lo < domain.j_hi) || !(domain.m_lo < domain.m_hi)) throw InputError("empty omega domain");
        if (!(a_ref >= domain.j_lo && a_ref <= domain.j_hi))
            throw InputError("a_ref = " + std::to_string(a_ref) + " outside the a_j range");
        if (!(opt.step > 0.0) || opt.columns < 5 || opt.traces < 5 || opt.margin < 0.0)
            throw InputError("invalid omega options");
        xs_ = opt.scale_j.value_or(domain.j_lo > 0.0 ? AxisScale::log : AxisScale::linear);
        ys_ = opt.scale_0.value_or(domain.m_lo > 0.0 ? AxisScale::log : AxisScale::linear);
        if (xs_ == AxisScale::log && !(domain.j_lo > 0.0)) throw InputError("log a_j scale needs a positive range");
        if (ys_ == AxisScale::log && !(domain.m_lo > 0.0)) throw InputError("log a_0 scale needs a positive range");
        if (t_.requires_positive() && (xs_ != AxisScale::log || ys_ != AxisScale::log))
            throw InputError("log-polynomial ratio needs log-scaled omega axes");

        const double slo = xc(domain.j_lo), shi = xc(domain.j_hi);
        const double ulo = yc(domain.m_lo), uhi = yc(domain.m_hi);
        S_lo_ = slo - opt.margin * (shi - slo);
        S_hi_ = shi + opt.margin * (shi - slo);
        U_lo_ = ulo - opt.margin * (uhi - ulo);
        U_hi_ = uhi + opt.margin * (uhi - ulo);

        s_ref_ = xc(a_ref);
        ds_ = (S_hi_ - S_lo_) / static_cast<double>(opt.columns - 1);
        const auto k_lo = static_cast<long>(std::floor((S_lo_ - s_ref_) / ds_ + 1e-9));
        const auto k_hi = static_cast<long>(std::ceil((S_hi_ - s_ref_) / ds_ - 1e-9));
        for (long k = k_lo; k <= k_hi; ++k) cols_.push_back(s_ref_ + static_cast<double>(k) * ds_);
        c_ref_ = static_cast<std::size_t>(-k_lo);

        // omega is smallest at (a_j max, a_0 min) and largest at (a_j min, a_0 max);
        // the anchor levels must span what those corners reach.
        // Columns whose corner characteristic fails (t vanishing) are skipped.
        double L_lo = ulo, L_hi = uhi;
        for (std::size_t c = cols_.size() - 1; c > c_ref_; --c) {
            try {
                L_lo = std::min(L_lo, flow(cols_[c], U_lo_, s_ref_));
                break;
            } catch (const Error&) {
            }
        }
        for (std::size_t c = 0; c < c_ref_; ++c) {
            try {
                L_hi = std::max(L_hi, flow(cols_[c], U_hi_, s_ref_));
                break;
            } catch (const Error&) {
            }
        }
        const double pad = opt.margin * (L_hi - L_lo) / 4.0;
        L_lo -= pad;
        L_hi += pad;
        if (ys_ == AxisScale::linear && t_.requires_positive()) L_lo = std::max(L_lo, 0.0);
        levels_.resize(opt.traces);
        for (std::size_t i = 0; i < opt.traces; ++i)
            levels_[i] = L_lo + (L_hi - L_lo) * static_cast<double>(i) / static_cast<double>(opt.traces - 1);

        // With t > 0 the level coordinate increases along a_j, so a trace that has
        // left the box in its direction of travel never returns.
        const double nan = std::numeric_limits<double>::quiet_NaN();
        table_.assign(cols_.size(), std::vector<double>(opt.traces, nan));
        table_[c_ref_] = levels_;
        for (std::size_t i = 0; i < opt.traces; ++i) {
            for (int dir : {+1, -1}) {
                double u = levels_[i];
                for (long c = static_cast<long>(c_ref_) + dir; c >= 0 && c < static_cast<long>(cols_.size()); c += dir) {
                    if ((dir > 0 && u > U_hi_) || (dir < 0 && u < U_lo_)) break;
                    try {
                        u = flow(cols_[static_cast<std::size_t>(c - dir)], u, cols_[static_cast<std::size_t>(c)]);
                    } catch (const Error&) {
                        break;
                    }
                    table_[static_cast<std::size_t>(c)][i] = u;
                }
            }
        }
        coverage_ = measure_coverage();
        if (coverage_.uncovered_points > 0 && !opt.allow_partial)
            throw CoverageError("characteristics do not reach a_j = " + std::to_string(a_ref) + " from " +
                                std::to_string(coverage_.uncovered_points) + " of " + std::to_string(coverage_.points) +
                                " lattice points; uncovered a_j in [" + std::to_string(coverage_.uncovered.j_lo) + ", " +
                                std::to_string(coverage_.uncovered.j_hi) + "], a_0 in [" +
                                std::to_string(coverage_.uncovered.m_lo) + ", " + std::to_string(coverage_.uncovered.m_hi) +
                                "]");
    }

    std::size_t j() const { return t_.j(); }
    std::size_t pivot() const { return t_.pivot(); }
    const RatioFunction& ratio() const { return t_; }
    const Rect& domain() const { return domain_; }
    double a_ref() const { return a_ref_; }
    const OmegaOptions& options() const { return opt_; }
    const CoverageReport& coverage() const { return coverage_; }
    AxisScale scale_j() const { return xs_; }
    AxisScale scale_0() const { return ys_; }

    /// omega_j(a_j, a_0), or nullopt where no characteristic through the point reaches a_ref.
    std::optional<double> try_eval(double aj, double a0) const {
        if (!finite_coords(aj, a0)) return std::nullopt;
        const double s = xc(aj), u = yc(a0);
        if (s < cols_.front() - 1e-12 || s > cols_.back() + 1e-12) return std::nullopt;
        const auto c0 = nearest_column(s);
        for (std::size_t c : {c0, second_column(s, c0)}) {
            double uc = u;
            try {
                uc = flow(s, u, cols_[c]);
            } catch (const Error&) {
                continue;
            }
            if (auto lvl = level_at(c, uc)) return yv(*lvl);
        }
        return std::nullopt;
    }

    double operator()(double aj, double a0) const {
        if (auto v = try_eval(aj, a0)) return *v;
        throw CoverageError("omega_" + std::to_string(j()) + " not covered at (a_j, a_0) = (" + std::to_string(aj) +
                            ", " + std::to_string(a0) + ")");
    }

    /// (d omega/d a_j, d omega/d a_0) by central differences in axis coordinates.
    std::pair<double, double> gradient(double aj, double a0, double h = 1e-4) const {
        const double s = xc(aj), u = yc(a0);
        const double dx = (at_coords(s + h, u) - at_coords(s - h, u)) / (2.0 * h) / xjac(aj);
        const double dy = (at_coords(s, u + h) - at_coords(s, u - h)) / (2.0 * h) / yjac(a0);
        return {dx, dy};
    }

    /// Covered a_0 interval at this a_j (ends of the outermost traces, flowed to a_j).
    std::pair<double, double> a0_range(double aj) const {
        const double s = xc(aj);
        if (!(s >= cols_.front() - 1e-12 && s <= cols_.back() + 1e-12)) throw CoverageError("a_j outside omega box");
        const auto c = nearest_column(s);
        const auto [f, l] = valid_span(c);
        if (l <= f) throw CoverageError("no characteristics cover a_j = " + std::to_string(aj));
        const double lo = flow(cols_[c], table_[c][f], s);
        const double hi = flow(cols_[c], table_[c][l], s);
        return {yv(lo), yv(hi)};
    }

    /// Covered a_j interval at this a_0, to column resolution.
    std::pair<double, double> aj_range(double a0) const {
        const double u = yc(a0);
        std::optional<std::size_t> first, last;
        for (std::size_t c = 0; c < cols_.size(); ++c) {
            const auto [f, l] = valid_span(c);
            if (l > f && u >= table_[c][f] && u <= table_[c][l]) {
                if (!first) first = c;
                last = c;
            }
        }
        if (!first || *first == *last) throw CoverageError("no characteristics cover a_0 = " + std::to_string(a0));
        return {xv(cols_[*first]), xv(cols_[*last])};
    }

    /// Solves omega_j(a_j, a_0) = v for a_0 (the utility w_j(a_j, v)).
    double solve_a0(double aj, double v, const RootOptions& ro = {}) const {
        const auto [lo, hi] = a0_range(aj);
        auto f = [&](double u) { return at_coords(xc(aj), u); };
        double ulo = yc(lo), uhi = yc(hi);
        // Pull the bracket inside the covered band so both ends evaluate.
        const double shrink = 1e-9 * (uhi - ulo);
        ulo += shrink;
        uhi -= shrink;
        const double u = solve_monotone(f, v, ulo, uhi, ro);
        return yv(u);
    }

    /// Solves omega_j(a_j, a_0) = v for a_j (b_j(v, a_0)), searching [lo, hi] intersected with coverage.
    double solve_aj(double v, double a0, double lo, double hi, const RootOptions& ro = {}) const {
        const auto [clo, chi] = aj_range(a0);
        lo = std::max(lo, clo);
        hi = std::min(hi, chi);
        if (!(lo < hi)) throw RangeError("no covered a_j at a_0 = " + std::to_string(a0), 0.0, 0.0);
        auto f = [&](double s) { return at_coords(s, yc(a0)); };
        return xv(solve_monotone(f, v, xc(lo), xc(hi), ro));
    }

    // Axis-coordinate helpers (public for export and tests).
    double xc(double a) const { return xs_ == AxisScale::log ? std::log(a) : a; }
    double yc(double a) const { return ys_ == AxisScale::log ? std::log(a) : a; }
    double xv(double s) const { return xs_ == AxisScale::log ? std::exp(s) : s; }
    double yv(double u) const { return ys_ == AxisScale::log ? std::exp(u) : u; }
    double xjac(double a) const { return xs_ == AxisScale::log ? a : 1.0; }
    double yjac(double a) const { return ys_ == AxisScale::log ? a : 1.0; }

    const std::vector<double>& columns() const { return cols_; }
    std::size_t anchor_column() const { return c_ref_; }

private:
    bool finite_coords(double aj, double a0) const {
        if (!std::isfinite(aj) || !std::isfinite(a0)) return false;
        if (xs_ == AxisScale::log && !(aj > 0.0)) return false;
        if (ys_ == AxisScale::log && !(a0 > 0.0)) return false;
        return true;
    }

    /// du/ds along a characteristic.
    double slope(double s, double u) const {
        const double x = xv(s), y = yv(u);
        const double t = t_(x, y);
        if (!(t > 0.0) || !std::isfinite(t)) throw NumericalError("ratio not positive and finite along characteristic");
        return xjac(x) / (yjac(y) * t);
    }

    double flow(double s0, double u0, double s1) const {
        if (s0 == s1) return u0;
        Rk4Options ro{opt_.step, 1e-10, opt_.max_halvings};
        auto f = [this](double s, double u) { return slope(s, u); };
        return rk4_integrate(f, s0, u0, s1, ro).y;
    }

    std::size_t nearest_column(double s) const {
        const double k = std::round((s - cols_.front()) / ds_);
        return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(cols_.size() - 1)));
    }

    std::size_t second_column(double s, std::size_t c) const {
        if (s >= cols_[c]) return c + 1 < cols_.size() ? c + 1 : c;
        return c > 0 ? c - 1 : c;
    }

    std::pair<std::size_t, std::size_t> valid_span(std::size_t c) const {
        const auto& col = table_[c];
        std::size_t f = 0;
        while (f < col.size() && std::isnan(col[f])) ++f;
        if (f == col.size()) return {0, 0};
        std::size_t l = col.size() - 1;
        while (std::isnan(col[l])) --l;
        return {f, l};
    }

    /// Anchor level (axis coordinate) of the characteristic through column c at u.
    std::optional<double> level_at(std::size_t c, double u) const {
        const auto& col = table_[c];
        const auto [f, l] = valid_span(c);
        if (l <= f || u < col[f] || u > col[l]) return std::nullopt;
        // Bracketing pair i, i+1 within [f, l].
        std::size_t lo = f, hi = l;
        while (hi - lo > 1) {
            const std::size_t mid = (lo + hi) / 2;
            if (std::isnan(col[mid])) return std::nullopt;
            (col[mid] <= u ? lo : hi) = mid;
        }
        if (std::isnan(col[lo]) || std::isnan(col[hi])) return std::nullopt;
        // Four-point stencil, shifted inward at the ends of the valid span.
        std::size_t a = lo > f ? lo - 1 : lo;
        std::size_t b = std::min(a + 3, l);
        if (b - a < 3 && a > f) a = b >= 3 ? std::max(f, b - 3) : f;
        for (std::size_t i = a; i <= b; ++i)
            if (std::isnan(col[i])) {
                a = lo;
                b = hi;
                break;
            }
        double acc = 0.0;
        for (std::size_t i = a; i <= b; ++i) {
            double w = 1.0;
            for (std::size_t k = a; k <= b; ++k)
                if (k != i) w *= (u - col[k]) / (col[i] - col[k]);
            acc += w * levels_[i];
        }
        return acc;
    }

    double at_coords(double s, double u) const {
        const auto c0 = nearest_column(s);
        for (std::size_t c : {c0, second_column(s, c0)}) {
            double uc = u;
            try {
                uc = flow(s, u, cols_[c]);
            } catch (const Error&) {
                continue;
            }
            if (auto lvl = level_at(c, uc)) return yv(*lvl);
        }
        throw CoverageError("omega_" + std::to_string(j()) + " not covered at (a_j, a_0) = (" + std::to_string(xv(s)) +
                            ", " + std::to_string(yv(u)) + ")");
    }

    CoverageReport measure_coverage() const {
        CoverageReport rep;
        const std::size_t n = 41;
        rep.uncovered = Rect{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                             std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        const double slo = xc(domain_.j_lo), shi = xc(domain_.j_hi);
        const double ulo = yc(domain_.m_lo), uhi = yc(domain_.m_hi);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                const double x = xv(slo + (shi - slo) * static_cast<double>(i) / static_cast<double>(n - 1));
                const double y = yv(ulo + (uhi - ulo) * static_cast<double>(k) / static_cast<double>(n - 1));
                ++rep.points;
                if (try_eval(x, y)) continue;
                ++rep.uncovered_points;
                rep.uncovered.j_lo = std::min(rep.uncovered.j_lo, x);
                rep.uncovered.j_hi = std::max(rep.uncovered.j_hi, x);
                rep.uncovered.m_lo = std::min(rep.uncovered.m_lo, y);
                rep.uncovered.m_hi = std::max(rep.uncovered.m_hi, y);
            }
        rep.covered_fraction = 1.0 - static_cast<double>(rep.uncovered_points) / static_cast<double>(rep.points);
        return rep;
    }

    RatioFunction t_;
    Rect domain_;
    double a_ref_;
    OmegaOptions opt_;
    AxisScale xs_ = AxisScale::linear, ys_ = AxisScale::linear;
    double S_lo_ = 0, S_hi_ = 0, U_lo_ = 0, U_hi_ = 0, s_ref_ = 0, ds_ = 0;
    std::vector<double> cols_;
    std::size_t c_ref_ = 0;
    std::vector<double> levels_;
    std::vector<std::vector<double>> table_;
    CoverageReport coverage_;
};

inline std::shared_ptr<const OmegaFunction> build_omega(const RatioFunction& t, const Rect& domain, double a_ref,
                                                        const OmegaOptions& opt = {}) {
    return std::make_shared<const OmegaFunction>(t, domain, a_ref, opt);
}

/// Default anchor: midpoint of the a_j range in the axis coordinate (geometric on log axes).
inline double default_a_ref(const Rect& domain, AxisScale scale) {
    return scale == AxisScale::log ? std::sqrt(domain.j_lo * domain.j_hi) : 0.5 * (domain.j_lo + domain.j_hi);
}

// ---------------------------------------------------------------------------
// Utilities

/// w_j(a_j, v): inverts omega_j in a_0. The pivot's utility is the identity.
class UtilityFunction {
public:
    /// The pivot alternative: w(a, v) = a.
    explicit UtilityFunction(std::size_t j) : j_(j) {}
    explicit UtilityFunction(std::shared_ptr<const OmegaFunction> omega) : j_(omega->j()), omega_(std::move(omega)) {}

    std::size_t j() const { return j_; }
    bool is_pivot() const { return omega_ == nullptr; }
    const OmegaFunction& omega() const { return *omega_; }
    std::shared_ptr<const OmegaFunction> omega_ptr() const { return omega_; }

    double operator()(double aj, double v) const { return is_pivot() ? aj : omega_->solve_a0(aj, v); }

    /// Attained omega values at this a_j: the admissible v for evaluation.
    std::pair<double, double> v_range(double aj) const {
        if (is_pivot()) return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
        const auto [lo, hi] = omega_->a0_range(aj);
        return {(*omega_)(aj, lo), (*omega_)(aj, hi)};
    }

private:
    std::size_t j_;
    std::shared_ptr<const OmegaFunction> omega_;
};

/// w_j(a_j, v) by monotone root finding; RangeError with the attained interval when v is not attained.
inline double utility_eval(const UtilityFunction& w, double aj, double v) {
    if (w.is_pivot()) return aj;
    const auto [lo, hi] = w.v_range(aj);
    if (!(v >= lo && v <= hi))
        throw RangeError("v = " + std::to_string(v) + " outside attained omega range [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "] at a_j = " + std::to_string(aj),
                         lo, hi);
    return w(aj, v);
}

// ---------------------------------------------------------------------------
// Validation

struct OmegaValidation {
    std::size_t points = 0;
    std::size_t uncovered = 0;
    std::size_t monotone_violations = 0;
    bool monotone_ok = true;
    /// max |d omega/d a_0 + t d omega/d a_j| / |d omega/d a_0|.
    double max_pde_residual = 0.0;
    std::pair<double, double> worst_pde_point{};
    /// max |omega(a_ref, a_0) - a_0| / max(1, |a_0|).
    double max_anchor_error = 0.0;
};

/// Checks monotonicity, the anchoring convention and the PDE residual on an n x n lattice of the domain.
inline OmegaValidation validate_omega(const OmegaFunction& w, std::size_t n = 41) {
    OmegaValidation rep;
    const Rect& d = w.domain();
    const double slo = w.xc(d.j_lo), shi = w.xc(d.j_hi);
    const double ulo = w.yc(d.m_lo), uhi = w.yc(d.m_hi);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> vals(n * n, nan);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = w.xv(slo + (shi - slo) * static_cast<double>(i) / static_cast<double>(n - 1));
        ys[i] = w.yv(ulo + (uhi - ulo) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    // Keep the finite-difference stencil inside the domain.
    xs.front() = w.xv(w.xc(xs.front()) + 2e-4);
    xs.back() = w.xv(w.xc(xs.back()) - 2e-4);
    ys.front() = w.yv(w.yc(ys.front()) + 2e-4);
    ys.back() = w.yv(w.yc(ys.back()) - 2e-4);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            ++rep.points;
            const auto v = w.try_eval(xs[i], ys[k]);
            if (!v) {
                ++rep.uncovered;
                continue;
            }
            vals[i * n + k] = *v;
            try {
                const auto [gx, gy] = w.gradient(xs[i], ys[k]);
                const double t = w.ratio()(xs[i], ys[k]);
                const double r = std::abs(gy + t * gx) / std::abs(gy);
                if (r > rep.max_pde_residual) {
                    rep.max_pde_residual = r;
                    rep.worst_pde_point = {xs[i], ys[k]};
                }
            } catch (const CoverageError&) {
            }
        }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            const double v = vals[i * n + k];
            if (std::isnan(v)) continue;
            if (k + 1 < n && !std::isnan(vals[i * n + k + 1]) && !(vals[i * n + k + 1] > v)) ++rep.monotone_violations;
            if (i + 1 < n && !std::isnan(vals[(i + 1) * n + k]) && !(vals[(i + 1) * n + k] < v)) ++rep.monotone_violations;
        }
    rep.monotone_ok = rep.monotone_violations == 0;
    for (std::size_t k = 0; k < n; ++k)
        if (auto v = w.try_eval(w.a_ref(), ys[k]))
            rep.max_anchor_error = std::max(rep.max_anchor_error, std::abs(*v - ys[k]) / std::max(1.0, std::abs(ys[k])));
    return rep;
}

} // namespace rumid
