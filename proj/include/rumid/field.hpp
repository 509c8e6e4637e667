#pragma once

#include <rumid/errors.hpp>
#include <rumid/grid.hpp>
#include <rumid/probability.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace rumid {

/// Choice probabilities q_j(a) tabulated on a rectangular lattice.
///
/// Immutable after construction. Values are stored node-major: the J+1
/// probabilities of node f occupy [f*(J+1), (f+1)*(J+1)).
class ProbabilityField {
public:
    ProbabilityField(GridSpec grid, std::vector<double> values, std::string provenance = {},
                     double sum_tol = 1e-9)
        : grid_(std::move(grid)), values_(std::move(values)), provenance_(std::move(provenance)) {
        const std::size_t d = grid_.dims();
        if (d < 2) throw InputError("a probability field needs at least two alternatives");
        if (values_.size() != grid_.node_count() * d)
            throw InputError("field values do not match grid dimensions");
        for (std::size_t f = 0; f < grid_.node_count(); ++f) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double q = values_[f * d + j];
                if (!std::isfinite(q) || q < -sum_tol || q > 1.0 + sum_tol)
                    throw InputError("invalid probability at node " + std::to_string(f));
                s += q;
            }
            if (std::abs(s - 1.0) > sum_tol)
                throw InputError("probabilities at node " + std::to_string(f) + " sum to " + std::to_string(s));
        }
    }

    /// Tabulates `fn(a)` at every node.
    static ProbabilityField from_function(const GridSpec& grid,
                                          const std::function<std::vector<double>(std::span<const double>)>& fn,
                                          std::string provenance = {}) {
        const std::size_t d = grid.dims();
        std::vector<double> values(grid.node_count() * d);
        for (std::size_t f = 0; f < grid.node_count(); ++f) {
            const auto a = grid.node_point(f);
            const auto q = fn(a);
            if (q.size() != d) throw InputError("field function returned wrong number of alternatives");
            std::copy(q.begin(), q.end(), values.begin() + static_cast<std::ptrdiff_t>(f * d));
        }
        return ProbabilityField(grid, std::move(values), std::move(provenance));
    }

    const GridSpec& grid() const { return grid_; }
    std::size_t alternatives() const { return grid_.dims(); }
    std::size_t J() const { return grid_.dims() - 1; }
    const std::string& provenance() const { return provenance_; }
    const std::vector<double>& raw() const { return values_; }

    double at(std::size_t node, std::size_t j) const { return values_[node * grid_.dims() + j]; }

    ProbVector node_probs(std::size_t node) const {
        const std::size_t d = grid_.dims();
        return ProbVector(std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(node * d),
                                              values_.begin() + static_cast<std::ptrdiff_t>((node + 1) * d)));
    }

    /// Point in axis coordinates.
    std::vector<double> to_coords(std::span<const double> a) const {
        std::vector<double> s(a.size());
        for (std::size_t k = 0; k < a.size(); ++k) s[k] = grid_.axis(k).to_coord(a[k]);
        return s;
    }

    /// Multilinear interpolation of q_j at axis coordinates s. No hull check.
    double value_at_coords(std::size_t j, std::span<const double> s) const {
        const std::size_t d = grid_.dims();
        std::array<CellLocation, 8> loc{};
        std::vector<CellLocation> heap;
        CellLocation* L = loc.data();
        if (d > loc.size()) {
            heap.resize(d);
            L = heap.data();
        }
        std::size_t base = 0;
        for (std::size_t k = 0; k < d; ++k) {
            L[k] = locate(grid_.axis(k), s[k]);
            base += L[k].index * grid_.stride(k);
        }
        double acc = 0.0;
        const std::size_t corners = std::size_t{1} << d;
        for (std::size_t c = 0; c < corners; ++c) {
            double w = 1.0;
            std::size_t off = base;
            for (std::size_t k = 0; k < d; ++k) {
                if (c >> k & 1U) {
                    w *= L[k].frac;
                    off += grid_.stride(k);
                } else {
                    w *= 1.0 - L[k].frac;
                }
            }
            if (w != 0.0) acc += w * values_[off * d + j];
        }
        return acc;
    }

private:
    GridSpec grid_;
    std::vector<double> values_;
    std::string provenance_;
};

/// Interpolated probabilities plus the sum before renormalization.
struct Interpolated {
    ProbVector q;
    double raw_sum = 1.0;

    /// Renormalization factor; only meaningful when it differs from 1 by more than 1e-9.
    double renormalization() const { return 1.0 / raw_sum; }
    bool renormalized() const { return std::abs(raw_sum - 1.0) > 1e-9; }
};

inline void require_in_hull(const ProbabilityField& field, std::span<const double> a) {
    if (a.size() != field.grid().dims())
        throw InputError("point has " + std::to_string(a.size()) + " coordinates, field has " +
                         std::to_string(field.grid().dims()));
    if (!field.grid().contains(a)) throw DomainError("point outside the field hull: extrapolation refused");
}

/// Multilinear interpolation of every q_j, renormalized to sum to one.
inline Interpolated interpolate(const ProbabilityField& field, std::span<const double> a) {
    require_in_hull(field, a);
    const auto s = field.to_coords(a);
    std::vector<double> q(field.alternatives());
    double sum = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        q[j] = std::clamp(field.value_at_coords(j, s), 0.0, 1.0);
        sum += q[j];
    }
    for (double& x : q) x /= sum;
    return {ProbVector(std::move(q)), sum};
}

/// A finite-difference derivative and whether a one-sided stencil was needed.
struct Derivative {
    double value = 0.0;
    bool one_sided = false;
};

namespace detail {

enum class Stencil { central, forward, backward };

inline Stencil choose_stencil(const Axis& ax, double s, std::size_t reach = 1) {
    const double h = ax.step();
    const double eps = 1e-9 * h;
    const double r = static_cast<double>(reach) * h;
    if (s - h >= ax.coord_lo() - eps && s + h <= ax.coord_hi() + eps) return Stencil::central;
    if (s + r <= ax.coord_hi() + eps) return Stencil::forward;
    return Stencil::backward;
}

} // namespace detail

/// dq_j/da_k at a by central differences with the grid spacing of axis k.
///
/// Within one step of the hull boundary a second-order one-sided stencil is
/// used and the result is flagged.
inline Derivative partial(const ProbabilityField& field, std::size_t j, std::size_t k, std::span<const double> a) {
    require_in_hull(field, a);
    if (j >= field.alternatives() || k >= field.grid().dims()) throw InputError("alternative or axis out of range");
    const Axis& ax = field.grid().axis(k);
    auto s = field.to_coords(a);
    const double h = ax.step();
    const double s0 = s[k];
    auto q = [&](double offset) {
        s[k] = s0 + offset;
        return field.value_at_coords(j, s);
    };
    Derivative d;
    switch (detail::choose_stencil(ax, s0, 2)) {
    case detail::Stencil::central:
        d.value = (q(h) - q(-h)) / (2.0 * h);
        break;
    case detail::Stencil::forward:
        d.value = (-3.0 * q(0.0) + 4.0 * q(h) - q(2.0 * h)) / (2.0 * h);
        d.one_sided = true;
        break;
    case detail::Stencil::backward:
        d.value = (3.0 * q(0.0) - 4.0 * q(-h) + q(-2.0 * h)) / (2.0 * h);
        d.one_sided = true;
        break;
    }
    d.value /= ax.jacobian(a[k]);
    return d;
}

/// Mixed partial d^n q_r / da_{k1} ... da_{kn} over distinct axes by a tensor
/// stencil of nested central differences (2^n evaluations).
inline Derivative mixed_partial(const ProbabilityField& field, std::size_t r, std::span<const std::size_t> axes,
                                std::span<const double> a) {
    require_in_hull(field, a);
    const std::size_t d = field.grid().dims();
    if (r >= field.alternatives()) throw InputError("alternative out of range");
    for (std::size_t i = 0; i < axes.size(); ++i) {
        if (axes[i] >= d) throw InputError("axis out of range");
        for (std::size_t m = 0; m < i; ++m)
            if (axes[m] == axes[i]) throw InputError("mixed partial axes must be distinct");
    }
    const auto s0 = field.to_coords(a);
    const std::size_t n = axes.size();
    std::vector<std::array<double, 2>> offset(n), weight(n);
    Derivative out;
    double jac = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Axis& ax = field.grid().axis(axes[i]);
        const double h = ax.step();
        switch (detail::choose_stencil(ax, s0[axes[i]])) {
        case detail::Stencil::central:
            offset[i] = {h, -h};
            weight[i] = {0.5 / h, -0.5 / h};
            break;
        case detail::Stencil::forward:
            offset[i] = {h, 0.0};
            weight[i] = {1.0 / h, -1.0 / h};
            out.one_sided = true;
            break;
        case detail::Stencil::backward:
            offset[i] = {0.0, -h};
            weight[i] = {1.0 / h, -1.0 / h};
            out.one_sided = true;
            break;
        }
        jac *= ax.jacobian(a[axes[i]]);
    }
    std::vector<double> s = s0;
    double acc = 0.0;
    for (std::size_t c = 0; c < (std::size_t{1} << n); ++c) {
        double w = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t bit = c >> i & 1U;
            s[axes[i]] = s0[axes[i]] + offset[i][bit];
            w *= weight[i][bit];
        }
        acc += w * field.value_at_coords(r, s);
    }
    out.value = acc / jac;
    return out;
}

/// All axes except `r`: the axis set of the J-th order cross partial of q_r.
inline std::vector<std::size_t> axes_except(std::size_t dims, std::size_t r) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < dims; ++k)
        if (k != r) out.push_back(k);
    return out;
}

// ---------------------------------------------------------------------------
// Shape checks

struct ShapeTolerances {
    /// A difference of the wrong sign larger than this is a violation.
    double monotone_tol = 0.0;
    /// Differences with magnitude at most this count as flat (reported, not failed).
    double flat_tol = 1e-15;
    /// (-1)^J * cross partial must be >= -cross_tol.
    double cross_tol = 1e-6;
};

struct Violation {
    double magnitude = 0.0;
    std::vector<double> location;
};

struct MonotoneCheck {
    std::size_t alternative = 0;
    std::size_t axis = 0;
    bool ok = true;
    std::size_t violations = 0;
    std::size_t flat_edges = 0;
    Violation worst;
};

struct BoundaryAttainment {
    std::size_t alternative = 0;
    double min_value = 1.0;
    double max_value = 0.0;
    std::vector<double> argmin;
    std::vector<double> argmax;
};

struct CrossPartialCheck {
    std::size_t alternative = 0;
    bool ok = true;
    std::size_t nodes_checked = 0;
    std::size_t violations = 0;
    /// Smallest value of (-1)^J times the cross partial and where it occurs.
    double min_signed = std::numeric_limits<double>::infinity();
    std::vector<double> argmin;
};

struct ShapeReport {
    ShapeTolerances tolerances;
    std::vector<MonotoneCheck> monotone;  // (j, axis) pairs, j-major
    std::vector<BoundaryAttainment> boundary;
    std::vector<CrossPartialCheck> cross_partial;

    bool monotone_ok() const {
        return std::all_of(monotone.begin(), monotone.end(), [](const auto& m) { return m.ok; });
    }
    bool cross_partial_ok() const {
        return std::all_of(cross_partial.begin(), cross_partial.end(), [](const auto& c) { return c.ok; });
    }
    bool pass() const { return monotone_ok() && cross_partial_ok(); }

    const MonotoneCheck& monotone_for(std::size_t j, std::size_t axis) const {
        return monotone.at(j * boundary.size() + axis);
    }
};

namespace detail {

/// Cross partial of q_r over all axes except r at an interior node, using node values only.
inline double node_cross_partial(const ProbabilityField& field, std::size_t r, std::size_t node,
                                 std::span<const double> a) {
    const GridSpec& g = field.grid();
    const std::size_t d = g.dims();
    const auto axes = axes_except(d, r);
    double acc = 0.0;
    for (std::size_t c = 0; c < (std::size_t{1} << axes.size()); ++c) {
        std::ptrdiff_t off = static_cast<std::ptrdiff_t>(node);
        double sign = 1.0;
        for (std::size_t i = 0; i < axes.size(); ++i) {
            const auto st = static_cast<std::ptrdiff_t>(g.stride(axes[i]));
            if (c >> i & 1U) {
                off -= st;
                sign = -sign;
            } else {
                off += st;
            }
        }
        acc += sign * field.at(static_cast<std::size_t>(off), r);
    }
    double denom = 1.0;
    for (auto k : axes) denom *= 2.0 * g.axis(k).step() * g.axis(k).jacobian(a[k]);
    return acc / denom;
}

} // namespace detail

/// Monotonicity on every lattice edge, boundary attainment, and the sign of
/// the J-th order cross partials at every interior node.
inline ShapeReport check_shape(const ProbabilityField& field, const ShapeTolerances& tol = {}) {
    const GridSpec& g = field.grid();
    const std::size_t d = g.dims();
    const std::size_t J = d - 1;
    ShapeReport rep;
    rep.tolerances = tol;
    rep.monotone.resize(d * d);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) {
            rep.monotone[j * d + k].alternative = j;
            rep.monotone[j * d + k].axis = k;
        }
    rep.boundary.resize(d);
    rep.cross_partial.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        rep.boundary[j].alternative = j;
        rep.cross_partial[j].alternative = j;
    }
    const double parity = (J % 2 == 0) ? 1.0 : -1.0;

    for (std::size_t f = 0; f < g.node_count(); ++f) {
        const auto idx = g.unflat(f);
        const auto a = g.node_point(f);
        bool on_boundary = false;
        for (std::size_t k = 0; k < d; ++k) {
            if (idx[k] == 0 || idx[k] + 1 == g.axis(k).n) on_boundary = true;
            if (idx[k] + 1 >= g.axis(k).n) continue;
            const std::size_t next = f + g.stride(k);
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = field.at(next, j) - field.at(f, j);
                const double oriented = (j == k) ? diff : -diff;
                auto& m = rep.monotone[j * d + k];
                if (std::abs(diff) <= tol.flat_tol) ++m.flat_edges;
                if (oriented < -tol.monotone_tol) {
                    m.ok = false;
                    ++m.violations;
                    if (-oriented > m.worst.magnitude) {
                        m.worst.magnitude = -oriented;
                        m.worst.location = a;
                        m.worst.location[k] = 0.5 * (a[k] + g.axis(k).node(idx[k] + 1));
                    }
                }
            }
        }
        if (on_boundary) {
            for (std::size_t j = 0; j < d; ++j) {
                auto& b = rep.boundary[j];
                const double q = field.at(f, j);
                if (b.argmin.empty() || q < b.min_value) {
                    b.min_value = q;
                    b.argmin = a;
                }
                if (b.argmax.empty() || q > b.max_value) {
                    b.max_value = q;
                    b.argmax = a;
                }
            }
        }
        if (g.interior(idx)) {
            for (std::size_t r = 0; r < d; ++r) {
                auto& c = rep.cross_partial[r];
                const double v = parity * detail::node_cross_partial(field, r, f, a);
                ++c.nodes_checked;
                if (v < c.min_signed) {
                    c.min_signed = v;
                    c.argmin = a;
                }
                if (v < -tol.cross_tol) {
                    c.ok = false;
                    ++c.violations;
                }
            }
        }
    }
    return rep;
}

} // namespace rumid
