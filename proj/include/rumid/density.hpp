#pragma once

#include <rumid/characteristics.hpp>
#include <rumid/errors.hpp>
#include <rumid/field.hpp>
#include <rumid/grid.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rumid {

/// The identified level functions, one per alternative; the pivot's slot is empty.
class OmegaSet {
public:
    OmegaSet(std::size_t pivot, std::vector<std::shared_ptr<const OmegaFunction>> by_alternative)
        : pivot_(pivot), omegas_(std::move(by_alternative)) {
        if (pivot_ >= omegas_.size()) throw InputError("pivot out of range");
        for (std::size_t j = 0; j < omegas_.size(); ++j) {
            if (j == pivot_) {
                if (omegas_[j]) throw InputError("pivot alternative must not carry an omega function");
                continue;
            }
            if (!omegas_[j]) throw InputError("missing omega function for alternative " + std::to_string(j));
            if (omegas_[j]->j() != j || omegas_[j]->pivot() != pivot_)
                throw InputError("omega function " + std::to_string(j) + " built for a different pair");
        }
    }

    std::size_t pivot() const { return pivot_; }
    std::size_t alternatives() const { return omegas_.size(); }
    std::size_t J() const { return omegas_.size() - 1; }
    const OmegaFunction& operator[](std::size_t j) const { return *omegas_.at(j); }
    std::shared_ptr<const OmegaFunction> ptr(std::size_t j) const { return omegas_.at(j); }

    /// Alternatives other than the pivot, in increasing order: v-coordinate k belongs to others()[k].
    std::vector<std::size_t> others() const { return axes_except(omegas_.size(), pivot_); }

private:
    std::size_t pivot_;
    std::vector<std::shared_ptr<const OmegaFunction>> omegas_;
};

struct DensityOptions {
    /// Reference pivot values tried per v-node; the most interior mapping wins.
    std::size_t pivot_candidates = 33;
    /// Negative densities above -tol_neg_rel * max f are clipped to zero, below it flagged.
    double tol_neg_rel = 1e-4;
    RootOptions roots{};
};

/// Density and CDF of the heterogeneity variables on a v-lattice.
struct DensityGrid {
    GridSpec v_grid;
    std::size_t pivot = 0;
    /// Density after clipping, zero outside the support.
    std::vector<double> f;
    /// Eq. (5) route before clipping and the mixed-partial-of-dq_k/da_0 route (NaN outside support).
    std::vector<double> f_raw;
    std::vector<double> f_alt;
    std::vector<double> F;
    std::vector<std::uint8_t> support;
    /// Pivot coordinate used to map each node to a-space.
    std::vector<double> a_pivot;
    std::size_t clipped = 0;
    std::size_t flagged = 0;
    std::size_t masked = 0;
    std::size_t one_sided = 0;
    double max_f = 0.0;
    double min_f_raw = 0.0;
    /// max |f_raw - f_alt| over the support and the tolerance it is judged against.
    double route_disagreement = 0.0;
    double route_tolerance = 0.0;

    bool ok() const { return flagged == 0; }
    std::size_t size() const { return v_grid.node_count(); }
};

namespace detail {

/// Distance of a from the nearer end of the axis, in grid steps.
inline double interiority(const Axis& ax, double a) {
    const double s = ax.to_coord(a);
    return std::min(s - ax.coord_lo(), ax.coord_hi() - s) / ax.step();
}

/// Field nodes of the pivot axis used as reference values (interior, evenly thinned).
inline std::vector<double> pivot_candidates(const Axis& ax, std::size_t count) {
    std::vector<double> out;
    if (ax.n <= 2) return out;
    const std::size_t inner = ax.n - 2;
    const std::size_t take = std::min(count, inner);
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t idx = 1 + (take == 1 ? inner / 2 : i * (inner - 1) / (take - 1));
        out.push_back(ax.node(idx));
    }
    return out;
}

inline std::optional<double> solve_b(const ProbabilityField& field, const OmegaFunction& w, double v, double a_pivot,
                                     const RootOptions& ro) {
    const Axis& ax = field.grid().axis(w.j());
    try {
        return w.solve_aj(v, a_pivot, ax.lo, ax.hi, ro);
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

} // namespace detail

/// Maps v to a-space at the given pivot value: a_m = a_pivot, a_j = b_j(v_j, a_pivot).
inline std::optional<std::vector<double>> map_to_a(const ProbabilityField& field, const OmegaSet& omegas,
                                                   std::span<const double> v, double a_pivot,
                                                   const RootOptions& ro = {}) {
    const auto others = omegas.others();
    if (v.size() != others.size()) throw InputError("v has wrong dimension");
    std::vector<double> a(field.alternatives());
    a[omegas.pivot()] = a_pivot;
    for (std::size_t k = 0; k < others.size(); ++k) {
        const auto b = detail::solve_b(field, omegas[others[k]], v[k], a_pivot, ro);
        if (!b) return std::nullopt;
        a[others[k]] = *b;
    }
    return a;
}

struct PointDensity {
    double f = 0.0;      // Eq. (5)
    double f_alt = 0.0;  // Eq. (6), k = first non-pivot alternative
    double F = 0.0;
    bool one_sided = false;
};

/// Density at the a-space image of a v-node, by both routes.
inline PointDensity density_at_a(const ProbabilityField& field, const OmegaSet& omegas, std::span<const double> a) {
    const std::size_t m = omegas.pivot();
    const std::size_t d = field.alternatives();
    const auto others = omegas.others();
    PointDensity out;

    const auto axes = axes_except(d, m);
    const auto num = mixed_partial(field, m, axes, a);
    double den = 1.0;
    for (auto j : others) den *= omegas[j].gradient(a[j], a[m]).first;
    out.f = num.value / den;

    const std::size_t k = others.front();
    std::vector<std::size_t> alt_axes{m};
    for (auto j : others)
        if (j != k) alt_axes.push_back(j);
    const auto num6 = mixed_partial(field, k, alt_axes, a);
    double den6 = omegas[k].gradient(a[k], a[m]).second;
    for (auto j : others)
        if (j != k) den6 *= omegas[j].gradient(a[j], a[m]).first;
    out.f_alt = -num6.value / den6;

    out.F = interpolate(field, a).q[m];
    out.one_sided = num.one_sided || num6.one_sided;
    return out;
}

/// F(v) = q_m at the a-space image of v. Averages over the given pivot values
/// (the three most interior candidates when none are given) and reports the spread.
struct CdfValue {
    double F = 0.0;
    double spread = 0.0;
    std::vector<double> pivots_used;
    std::vector<double> values;
};

inline CdfValue reconstruct_cdf(const ProbabilityField& field, const OmegaSet& omegas, std::span<const double> v,
                                std::vector<double> a_pivots = {}, const DensityOptions& opt = {}) {
    const std::size_t m = omegas.pivot();
    const GridSpec& g = field.grid();
    if (a_pivots.empty()) {
        std::vector<std::pair<double, double>> scored;
        for (double c : detail::pivot_candidates(g.axis(m), opt.pivot_candidates)) {
            const auto a = map_to_a(field, omegas, v, c, opt.roots);
            if (!a) continue;
            double score = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < a->size(); ++k) score = std::min(score, detail::interiority(g.axis(k), (*a)[k]));
            scored.emplace_back(score, c);
        }
        std::sort(scored.begin(), scored.end(), [](auto x, auto y) { return x.first > y.first; });
        for (std::size_t i = 0; i < std::min<std::size_t>(3, scored.size()); ++i) a_pivots.push_back(scored[i].second);
    }
    CdfValue out;
    for (double c : a_pivots) {
        const auto a = map_to_a(field, omegas, v, c, opt.roots);
        if (!a || !g.contains(*a)) continue;
        out.values.push_back(interpolate(field, *a).q[m]);
        out.pivots_used.push_back(c);
    }
    if (out.values.empty()) throw CoverageError("v outside the reconstructed support at every reference pivot value");
    double sum = 0.0, lo = out.values.front(), hi = lo;
    for (double x : out.values) {
        sum += x;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    out.F = sum / static_cast<double>(out.values.size());
    out.spread = hi - lo;
    return out;
}

/// Pointwise density at v (Eq. 5), mapping through the most interior pivot candidate.
inline std::optional<PointDensity> density_at(const ProbabilityField& field, const OmegaSet& omegas,
                                              std::span<const double> v, const DensityOptions& opt = {}) {
    const GridSpec& g = field.grid();
    const std::size_t m = omegas.pivot();
    std::optional<std::vector<double>> best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (double c : detail::pivot_candidates(g.axis(m), opt.pivot_candidates)) {
        auto a = map_to_a(field, omegas, v, c, opt.roots);
        if (!a) continue;
        double score = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < a->size(); ++k) score = std::min(score, detail::interiority(g.axis(k), (*a)[k]));
        if (score > best_score) {
            best_score = score;
            best = std::move(a);
        }
    }
    if (!best || best_score < 0.0) return std::nullopt;
    try {
        return density_at_a(field, omegas, *best);
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

/// Reconstructs f and F on every node of `v_grid`.
inline DensityGrid reconstruct_density(const ProbabilityField& field, const OmegaSet& omegas, const GridSpec& v_grid,
                                       const DensityOptions& opt = {}) {
    const std::size_t J = omegas.J();
    const std::size_t m = omegas.pivot();
    const GridSpec& g = field.grid();
    if (v_grid.dims() != J) throw InputError("v-grid needs one axis per non-pivot alternative");
    if (field.alternatives() != omegas.alternatives()) throw InputError("omega set does not match field");
    const auto others = omegas.others();
    const auto cands = detail::pivot_candidates(g.axis(m), opt.pivot_candidates);
    const std::size_t nc = cands.size();

    // b_j(v_j, candidate) and its interiority, per v-axis node.
    std::vector<std::vector<double>> b(J), score(J);
    for (std::size_t k = 0; k < J; ++k) {
        const auto& vax = v_grid.axis(k);
        b[k].assign(vax.n * nc, std::numeric_limits<double>::quiet_NaN());
        score[k].assign(vax.n * nc, -std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < vax.n; ++i)
            for (std::size_t c = 0; c < nc; ++c) {
                const auto x = detail::solve_b(field, omegas[others[k]], vax.node(i), cands[c], opt.roots);
                if (!x) continue;
                b[k][i * nc + c] = *x;
                score[k][i * nc + c] = detail::interiority(g.axis(others[k]), *x);
            }
    }
    std::vector<double> cand_score(nc);
    for (std::size_t c = 0; c < nc; ++c) cand_score[c] = detail::interiority(g.axis(m), cands[c]);

    DensityGrid out;
    out.v_grid = v_grid;
    out.pivot = m;
    const std::size_t n = v_grid.node_count();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.f.assign(n, 0.0);
    out.f_raw.assign(n, nan);
    out.f_alt.assign(n, nan);
    out.F.assign(n, nan);
    out.support.assign(n, 0);
    out.a_pivot.assign(n, nan);

    std::vector<double> a(field.alternatives());
    for (std::size_t node = 0; node < n; ++node) {
        const auto idx = v_grid.unflat(node);
        std::optional<std::size_t> best;
        double best_score = 0.0;
        for (std::size_t c = 0; c < nc; ++c) {
            double s = cand_score[c];
            for (std::size_t k = 0; k < J; ++k) s = std::min(s, score[k][idx[k] * nc + c]);
            if (s >= 0.0 && (!best || s > best_score)) {
                best = c;
                best_score = s;
            }
        }
        if (!best) {
            ++out.masked;
            continue;
        }
        a[m] = cands[*best];
        for (std::size_t k = 0; k < J; ++k) a[others[k]] = b[k][idx[k] * nc + *best];
        try {
            const auto p = density_at_a(field, omegas, a);
            out.f_raw[node] = p.f;
            out.f_alt[node] = p.f_alt;
            out.F[node] = p.F;
            out.support[node] = 1;
            out.a_pivot[node] = a[m];
            if (p.one_sided) ++out.one_sided;
        } catch (const NumericalError&) {
            ++out.masked;
        }
    }

    out.min_f_raw = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (out.support[i]) {
            out.max_f = std::max(out.max_f, out.f_raw[i]);
            out.min_f_raw = std::min(out.min_f_raw, out.f_raw[i]);
        }
    if (!std::isfinite(out.min_f_raw)) out.min_f_raw = 0.0;
    const double tol_neg = opt.tol_neg_rel * out.max_f;
    for (std::size_t i = 0; i < n; ++i) {
        if (!out.support[i]) continue;
        const double x = out.f_raw[i];
        if (x >= 0.0) {
            out.f[i] = x;
        } else if (x >= -tol_neg) {
            out.f[i] = 0.0;
            ++out.clipped;
        } else {
            out.f[i] = 0.0;
            ++out.flagged;
        }
    }

    // Finite-difference tolerance: h^2 * max f with h the coarsest field step in axis coordinates.
    double h = 0.0;
    for (const auto& ax : g.axes()) h = std::max(h, ax.step());
    out.route_tolerance = 10.0 * h * h * out.max_f;
    for (std::size_t i = 0; i < n; ++i)
        if (out.support[i]) out.route_disagreement = std::max(out.route_disagreement, std::abs(out.f_raw[i] - out.f_alt[i]));
    return out;
}

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

/// Trapezoid weights of an axis in v units.
inline std::vector<double> trapezoid_weights(const Axis& ax, std::size_t lo = 0, std::size_t hi = 0) {
    if (hi == 0) hi = ax.n - 1;
    std::vector<double> w(ax.n, 0.0);
    for (std::size_t i = lo; i < hi; ++i) {
        const double dv = ax.node(i + 1) - ax.node(i);
        w[i] += 0.5 * dv;
        w[i + 1] += 0.5 * dv;
    }
    return w;
}

} // namespace detail

/// Trapezoid mass of f over the sub-box of nodes [lo, hi] (all axes); nodes outside the support count as zero.
inline double box_mass(const DensityGrid& d, std::span<const std::size_t> lo, std::span<const std::size_t> hi) {
    const GridSpec& g = d.v_grid;
    std::vector<std::vector<double>> w(g.dims());
    for (std::size_t k = 0; k < g.dims(); ++k) w[k] = detail::trapezoid_weights(g.axis(k), lo[k], hi[k]);
    double mass = 0.0;
    for (std::size_t f = 0; f < g.node_count(); ++f) {
        if (!d.support[f] || d.f[f] == 0.0) continue;
        const auto idx = g.unflat(f);
        double wt = 1.0;
        for (std::size_t k = 0; k < g.dims(); ++k) wt *= w[k][idx[k]];
        mass += wt * d.f[f];
    }
    return mass;
}

struct MassReport {
    /// Trapezoid mass of f over the support.
    double mass = 0.0;
    /// F at the top corner of the v-grid, an independent estimate of the mass below it.
    double F_top_corner = std::numeric_limits<double>::quiet_NaN();
    /// Box mass from F at the grid corners by inclusion-exclusion (NaN if a corner is outside the support).
    double F_box_mass = std::numeric_limits<double>::quiet_NaN();
    double support_fraction = 0.0;
    std::size_t clipped = 0;
    std::size_t flagged = 0;
};

inline MassReport check_normalization(const DensityGrid& d) {
    const GridSpec& g = d.v_grid;
    const std::size_t J = g.dims();
    MassReport rep;
    std::vector<std::size_t> lo(J, 0), hi(J);
    for (std::size_t k = 0; k < J; ++k) hi[k] = g.axis(k).n - 1;
    rep.mass = box_mass(d, lo, hi);
    std::size_t inside = 0;
    for (auto s : d.support) inside += s;
    rep.support_fraction = static_cast<double>(inside) / static_cast<double>(d.support.size());
    rep.clipped = d.clipped;
    rep.flagged = d.flagged;
    const std::size_t top = g.flat(hi);
    if (d.support[top]) rep.F_top_corner = d.F[top];
    double acc = 0.0;
    bool complete = true;
    for (std::size_t c = 0; c < (std::size_t{1} << J); ++c) {
        std::vector<std::size_t> idx(J);
        int lows = 0;
        for (std::size_t k = 0; k < J; ++k) {
            const bool high = c >> k & 1U;
            idx[k] = high ? hi[k] : lo[k];
            lows += high ? 0 : 1;
        }
        const std::size_t f = g.flat(idx);
        if (!d.support[f]) {
            complete = false;
            break;
        }
        acc += (lows % 2 == 0 ? 1.0 : -1.0) * d.F[f];
    }
    if (complete) rep.F_box_mass = acc;
    return rep;
}

/// Default v-axis: log-spaced when the range is positive and spans more than a decade.
inline Axis default_v_axis(double lo, double hi, std::size_t n) {
    const bool log = lo > 0.0 && hi / lo > 10.0;
    return Axis{lo, hi, n, log ? AxisScale::log : AxisScale::linear};
}

} // namespace rumid
