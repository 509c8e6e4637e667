#pragma once

#include <rumid/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rumid {

/// Spacing of an axis: uniform in a (linear) or uniform in ln a (log).
enum class AxisScale { linear, log };

inline std::string to_string(AxisScale s) { return s == AxisScale::linear ? "linear" : "log"; }

/// One coordinate of a rectangular lattice.
///
/// All arithmetic is done in the axis coordinate s, which is a itself for a
/// linear axis and ln a for a log axis. Nodes are uniformly spaced in s.
struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t n = 5;
    AxisScale scale = AxisScale::linear;

    double to_coord(double a) const { return scale == AxisScale::linear ? a : std::log(a); }
    double from_coord(double s) const { return scale == AxisScale::linear ? s : std::exp(s); }

    double coord_lo() const { return to_coord(lo); }
    double coord_hi() const { return to_coord(hi); }

    /// Node spacing in axis coordinates.
    double step() const { return (coord_hi() - coord_lo()) / static_cast<double>(n - 1); }

    /// da/ds at a.
    double jacobian(double a) const { return scale == AxisScale::linear ? 1.0 : a; }

    double node(std::size_t i) const {
        if (i == 0) return lo;
        if (i + 1 == n) return hi;
        return from_coord(coord_lo() + static_cast<double>(i) * step());
    }

    std::vector<double> nodes() const {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = node(i);
        return out;
    }

    bool contains(double a, double rel_tol = 1e-12) const {
        const double slack = rel_tol * (hi - lo);
        return a >= lo - slack && a <= hi + slack;
    }

    void validate(std::string_view name = "axis") const {
        if (!(std::isfinite(lo) && std::isfinite(hi)) || !(lo < hi))
            throw InputError(std::string(name) + ": bounds must be finite with lo < hi");
        if (n < 5) throw InputError(std::string(name) + ": node count must be >= 5");
        if (scale == AxisScale::log && !(lo > 0.0))
            throw InputError(std::string(name) + ": log-spaced axis requires lo > 0");
    }
};

/// Cell lookup along one axis: lower node index and fractional offset in [0,1].
struct CellLocation {
    std::size_t index;
    double frac;
};

inline CellLocation locate(const Axis& ax, double s) {
    const double u = (s - ax.coord_lo()) / ax.step();
    const double last = static_cast<double>(ax.n - 2);
    double fl = std::floor(u);
    if (fl < 0.0) fl = 0.0;
    if (fl > last) fl = last;
    return {static_cast<std::size_t>(fl), u - fl};
}

/// Rectangular lattice over (a_0, ..., a_J). Coordinate 0 is a_0.
class GridSpec {
public:
    GridSpec() = default;
    explicit GridSpec(std::vector<Axis> axes) : axes_(std::move(axes)) {
        if (axes_.empty()) throw InputError("grid needs at least one axis");
        for (std::size_t k = 0; k < axes_.size(); ++k) axes_[k].validate("axis " + std::to_string(k));
        strides_.assign(axes_.size(), 1);
        for (std::size_t k = axes_.size() - 1; k-- > 0;) strides_[k] = strides_[k + 1] * axes_[k + 1].n;
    }

    /// Same bounds and node count on every axis.
    static GridSpec uniform(std::size_t dims, double lo, double hi, std::size_t n,
                            AxisScale scale = AxisScale::linear) {
        return GridSpec(std::vector<Axis>(dims, Axis{lo, hi, n, scale}));
    }

    std::size_t dims() const { return axes_.size(); }
    const Axis& axis(std::size_t k) const { return axes_[k]; }
    const std::vector<Axis>& axes() const { return axes_; }

    std::size_t node_count() const { return strides_.empty() ? 0 : strides_[0] * axes_[0].n; }
    std::size_t stride(std::size_t k) const { return strides_[k]; }

    /// Row-major flattening: the last axis varies fastest.
    std::size_t flat(std::span<const std::size_t> idx) const {
        std::size_t f = 0;
        for (std::size_t k = 0; k < idx.size(); ++k) f += idx[k] * strides_[k];
        return f;
    }

    std::vector<std::size_t> unflat(std::size_t f) const {
        std::vector<std::size_t> idx(dims());
        for (std::size_t k = 0; k < dims(); ++k) {
            idx[k] = f / strides_[k];
            f %= strides_[k];
        }
        return idx;
    }

    std::vector<double> node_point(std::size_t f) const {
        auto idx = unflat(f);
        std::vector<double> p(dims());
        for (std::size_t k = 0; k < dims(); ++k) p[k] = axes_[k].node(idx[k]);
        return p;
    }

    bool contains(std::span<const double> a) const {
        if (a.size() != dims()) return false;
        for (std::size_t k = 0; k < dims(); ++k)
            if (!axes_[k].contains(a[k])) return false;
        return true;
    }

    /// Node index `i` on axis k is at least `steps` nodes away from both ends.
    bool interior(std::span<const std::size_t> idx, std::size_t steps = 1) const {
        for (std::size_t k = 0; k < dims(); ++k)
            if (idx[k] < steps || idx[k] + steps >= axes_[k].n) return false;
        return true;
    }

    bool operator==(const GridSpec& o) const {
        if (dims() != o.dims()) return false;
        for (std::size_t k = 0; k < dims(); ++k) {
            const auto& x = axes_[k];
            const auto& y = o.axes_[k];
            if (x.lo != y.lo || x.hi != y.hi || x.n != y.n || x.scale != y.scale) return false;
        }
        return true;
    }

private:
    std::vector<Axis> axes_;
    std::vector<std::size_t> strides_;
};

/// Parses "lo:hi:n" or "lo:hi:n:log".
inline Axis parse_axis(std::string_view text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    if (parts.size() != 3 && parts.size() != 4)
        throw InputError("grid axis '" + std::string(text) + "' must be lo:hi:n[:log|:linear]");
    Axis ax;
    try {
        std::size_t used = 0;
        ax.lo = std::stod(parts[0], &used);
        if (used != parts[0].size()) throw std::invalid_argument("lo");
        ax.hi = std::stod(parts[1], &used);
        if (used != parts[1].size()) throw std::invalid_argument("hi");
        const long n = std::stol(parts[2], &used);
        if (used != parts[2].size() || n < 0) throw std::invalid_argument("n");
        ax.n = static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw InputError("grid axis '" + std::string(text) + "': could not parse numbers");
    }
    if (parts.size() == 4) {
        if (parts[3] == "log")
            ax.scale = AxisScale::log;
        else if (parts[3] != "linear")
            throw InputError("grid axis '" + std::string(text) + "': unknown scale '" + parts[3] + "'");
    }
    ax.validate("grid axis '" + std::string(text) + "'");
    return ax;
}

} // namespace rumid
