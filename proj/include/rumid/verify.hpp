#pragma once

#include <rumid/characteristics.hpp>
#include <rumid/density.hpp>
#include <rumid/errors.hpp>
#include <rumid/field.hpp>
#include <rumid/model.hpp>
#include <rumid/probability.hpp>
#include <rumid/symmetry.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace rumid {

struct GridQuadrature {};
struct MonteCarloDraws {
    std::size_t draws = 100000;
    std::uint64_t seed = 1;
};
using IntegrationMethod = std::variant<GridQuadrature, MonteCarloDraws>;

inline std::string describe(const IntegrationMethod& m) {
    if (const auto* mc = std::get_if<MonteCarloDraws>(&m))
        return "monte_carlo(draws=" + std::to_string(mc->draws) + ", seed=" + std::to_string(mc->seed) + ")";
    return "grid_quadrature";
}

struct RationalizedProb {
    ProbVector q;
    /// Sum of the recovered probabilities before renormalization.
    double raw_sum = 1.0;
    /// Density mass over the grid, and the part of it where the argmax could not be decided.
    double mass = 1.0;
    double skipped_mass = 0.0;
};

namespace detail {

/// w_j at one offer: exact, or only known to lie above / below the attained range.
struct UtilityBound {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
};

/// w_j(a_j, v) on a sorted list of v values, with out-of-range values turned into bounds.
inline std::vector<UtilityBound> utility_slice(const UtilityFunction& u, double aj, const std::vector<double>& vs) {
    std::vector<UtilityBound> out(vs.size());
    if (u.is_pivot()) {
        for (auto& b : out) b.lo = b.hi = aj;
        return out;
    }
    const auto [a0lo, a0hi] = u.omega().a0_range(aj);
    const auto [vlo, vhi] = u.v_range(aj);
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const double v = vs[i];
        if (v < vlo) {
            out[i].hi = a0lo;
        } else if (v > vhi) {
            out[i].lo = a0hi;
        } else {
            try {
                out[i].lo = out[i].hi = u(aj, v);
            } catch (const NumericalError&) {
                // Leave as fully unknown.
            }
        }
    }
    return out;
}

/// Index of the alternative whose lower bound beats every other upper bound, if any.
inline std::optional<std::size_t> decided_argmax(const std::vector<UtilityBound>& b) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < b.size(); ++j)
        if (b[j].lo > b[best].lo) best = j;
    for (std::size_t j = 0; j < b.size(); ++j)
        if (j != best && !(b[best].lo >= b[j].hi)) return std::nullopt;
    return best;
}

inline void check_mass(double mass) {
    if (!(mass >= 0.95 && mass <= 1.05))
        throw NumericalError("density mass " + std::to_string(mass) + " outside [0.95, 1.05]: not normalized");
}

inline std::vector<double> node_weights(const DensityGrid& d) {
    const GridSpec& g = d.v_grid;
    std::vector<std::vector<double>> w(g.dims());
    for (std::size_t k = 0; k < g.dims(); ++k) w[k] = trapezoid_weights(g.axis(k));
    std::vector<double> out(g.node_count(), 0.0);
    for (std::size_t f = 0; f < g.node_count(); ++f) {
        if (!d.support[f]) continue;
        const auto idx = g.unflat(f);
        double wt = d.f[f];
        for (std::size_t k = 0; k < g.dims(); ++k) wt *= w[k][idx[k]];
        out[f] = wt;
    }
    return out;
}

/// raw_sum is the decided mass: one minus what fell outside the grid or was skipped.
inline RationalizedProb finish(std::vector<double> raw, double mass, double skipped) {
    double sum = 0.0;
    for (double x : raw) sum += x;
    if (!(sum > 0.0)) throw NumericalError("no density mass with a decided choice");
    for (double& x : raw) x /= sum;
    return RationalizedProb{ProbVector(std::move(raw)), sum, mass, skipped};
}

} // namespace detail

/// Choice probabilities implied by recovered utilities and density:
/// q_j(a) = integral of 1{w_j(a_j, v_j) >= max_k w_k(a_k, v_k)} f(v) dv, with w_m(a_m, .) = a_m.
///
/// `utilities[j]` belongs to alternative j; the pivot's entry is the identity.
class RationalizedModel {
public:
    RationalizedModel(std::vector<UtilityFunction> utilities, const DensityGrid& density)
        : u_(std::move(utilities)), d_(density), weights_(detail::node_weights(density)) {
        if (u_.size() != d_.v_grid.dims() + 1) throw InputError("need one utility per alternative");
        for (std::size_t j = 0; j < u_.size(); ++j) {
            if (u_[j].j() != j) throw InputError("utilities must be ordered by alternative");
            if ((j == d_.pivot) != u_[j].is_pivot()) throw InputError("utility pivot does not match density pivot");
        }
        for (std::size_t j = 0; j < u_.size(); ++j)
            if (j != d_.pivot) others_.push_back(j);
        for (double w : weights_) mass_ += w;
        // Cumulative masses for inverse-CDF sampling.
        cdf_.resize(weights_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < weights_.size(); ++i) cdf_[i] = acc += weights_[i];
    }

    double mass() const { return mass_; }
    const DensityGrid& density() const { return d_; }
    const std::vector<UtilityFunction>& utilities() const { return u_; }

    RationalizedProb operator()(std::span<const double> a, const IntegrationMethod& method) const {
        detail::check_mass(mass_);
        if (a.size() != u_.size()) throw InputError("offer vector has wrong dimension");
        if (const auto* mc = std::get_if<MonteCarloDraws>(&method)) return monte_carlo(a, *mc);
        return quadrature(a);
    }

private:
    static constexpr std::size_t refine_ = 4;

    /// w bounds for each non-pivot alternative on a v-axis refined 4x, interpolated on demand.
    struct Slices {
        std::vector<std::vector<double>> s;
        std::vector<std::vector<detail::UtilityBound>> w;

        detail::UtilityBound at(const Axis& ax, std::size_t k, double v) const {
            const auto& fs = s[k];
            const double pos = (ax.to_coord(v) - fs.front()) / (fs.back() - fs.front()) * static_cast<double>(fs.size() - 1);
            const auto i = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(fs.size() - 2)));
            const double t = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
            const auto& x = w[k][i];
            const auto& y = w[k][i + 1];
            if (x.lo == x.hi && y.lo == y.hi) {
                const double u = x.lo + t * (y.lo - x.lo);
                return {u, u};
            }
            // Mixed exact/bounded neighbours: keep the weaker information.
            return {std::min(x.lo, y.lo), std::max(x.hi, y.hi)};
        }
    };

    Slices slices(std::span<const double> a) const {
        const GridSpec& g = d_.v_grid;
        Slices out;
        out.s.resize(others_.size());
        out.w.resize(others_.size());
        for (std::size_t k = 0; k < others_.size(); ++k) {
            const auto& ax = g.axis(k);
            const std::size_t n = (ax.n - 1) * refine_ + 1;
            std::vector<double> vs(n);
            out.s[k].resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                out.s[k][i] = ax.coord_lo() + (ax.coord_hi() - ax.coord_lo()) * static_cast<double>(i) / static_cast<double>(n - 1);
                vs[i] = ax.from_coord(out.s[k][i]);
            }
            vs.front() = ax.lo;
            vs.back() = ax.hi;
            out.w[k] = detail::utility_slice(u_[others_[k]], a[others_[k]], vs);
        }
        return out;
    }

    /// The node-centred cell of node i: from the midpoint with its left neighbour to the one with its right.
    static std::pair<double, double> cell(const Axis& ax, std::size_t i) {
        const double lo = i == 0 ? ax.lo : 0.5 * (ax.node(i - 1) + ax.node(i));
        const double hi = i + 1 == ax.n ? ax.hi : 0.5 * (ax.node(i) + ax.node(i + 1));
        return {lo, hi};
    }

    // Each node's weight is split evenly over refine^J sub-cell centres, so the
    // indicator's jump inside a cell is resolved below the density grid step.
    RationalizedProb quadrature(std::span<const double> a) const {
        const GridSpec& g = d_.v_grid;
        const std::size_t m = d_.pivot;
        const std::size_t dims = others_.size();
        const Slices sl = slices(a);
        // Sub-point bounds per axis and node, computed once.
        std::vector<std::vector<detail::UtilityBound>> sub(dims);
        for (std::size_t k = 0; k < dims; ++k) {
            const auto& ax = g.axis(k);
            sub[k].resize(ax.n * refine_);
            for (std::size_t i = 0; i < ax.n; ++i) {
                const auto [lo, hi] = cell(ax, i);
                for (std::size_t r = 0; r < refine_; ++r)
                    sub[k][i * refine_ + r] = sl.at(ax, k, lo + (hi - lo) * (static_cast<double>(r) + 0.5) / refine_);
            }
        }
        std::size_t combos = 1;
        for (std::size_t k = 0; k < dims; ++k) combos *= refine_;
        const double share = 1.0 / static_cast<double>(combos);

        std::vector<double> raw(u_.size(), 0.0);
        double skipped = 0.0;
        std::vector<detail::UtilityBound> b(u_.size());
        b[m] = {a[m], a[m]};
        for (std::size_t f = 0; f < g.node_count(); ++f) {
            if (weights_[f] == 0.0) continue;
            const auto idx = g.unflat(f);
            for (std::size_t c = 0; c < combos; ++c) {
                std::size_t rest = c;
                for (std::size_t k = 0; k < dims; ++k) {
                    b[others_[k]] = sub[k][idx[k] * refine_ + rest % refine_];
                    rest /= refine_;
                }
                if (const auto j = detail::decided_argmax(b))
                    raw[*j] += weights_[f] * share;
                else
                    skipped += weights_[f] * share;
            }
        }
        return detail::finish(std::move(raw), mass_, skipped);
    }

    RationalizedProb monte_carlo(std::span<const double> a, const MonteCarloDraws& mc) const {
        if (mc.draws == 0) throw InputError("draw count must be >= 1");
        const GridSpec& g = d_.v_grid;
        const std::size_t m = d_.pivot;
        const Slices sl = slices(a);

        std::mt19937_64 rng(mc.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<double> raw(u_.size(), 0.0);
        double skipped = 0.0;
        std::vector<detail::UtilityBound> b(u_.size());
        b[m] = {a[m], a[m]};
        const double per_draw = mass_ / static_cast<double>(mc.draws);
        for (std::size_t n = 0; n < mc.draws; ++n) {
            const double target = unit(rng) * mass_;
            const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
            const auto f = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
            const auto idx = g.unflat(f);
            for (std::size_t k = 0; k < others_.size(); ++k) {
                const auto& ax = g.axis(k);
                const auto [lo, hi] = cell(ax, idx[k]);
                b[others_[k]] = sl.at(ax, k, lo + (hi - lo) * unit(rng));
            }
            if (const auto j = detail::decided_argmax(b))
                raw[*j] += per_draw;
            else
                skipped += per_draw;
        }
        return detail::finish(std::move(raw), mass_, skipped);
    }

    std::vector<UtilityFunction> u_;
    DensityGrid d_;
    std::vector<double> weights_;
    std::vector<double> cdf_;
    std::vector<std::size_t> others_;
    double mass_ = 0.0;
};

inline RationalizedProb rationalized_choice_prob(const RationalizedModel& model, std::span<const double> a,
                                                 const IntegrationMethod& method = GridQuadrature{}) {
    return model(a, method);
}

// ---------------------------------------------------------------------------
// Round trip

struct PointError {
    std::vector<double> a;
    std::vector<double> expected;
    std::vector<double> recovered;
    double max_abs_error = 0.0;
    double raw_sum = 1.0;
    double skipped_mass = 0.0;
};

struct VerifyReport {
    std::string method;
    double tolerance = 0.0;
    std::vector<PointError> points;
    std::vector<double> max_error;   // per alternative
    std::vector<double> mean_error;  // per alternative
    double worst = 0.0;
    /// max |1 - raw_sum| over points.
    double max_leakage = 0.0;
    double max_skipped_mass = 0.0;
    bool pass = false;
};

using Predictor = std::function<RationalizedProb(std::span<const double>)>;

/// Compares a predictor against the interpolated field at each test point.
inline VerifyReport round_trip_report(const ProbabilityField& field, const Predictor& predict, const PointSet& points,
                                      double tol, std::string method = {}) {
    VerifyReport rep;
    rep.method = std::move(method);
    rep.tolerance = tol;
    const std::size_t d = field.alternatives();
    rep.max_error.assign(d, 0.0);
    rep.mean_error.assign(d, 0.0);
    for (const auto& a : points) {
        const auto expected = interpolate(field, a).q;
        const auto got = predict(a);
        if (got.q.size() != d) throw InputError("predictor returned wrong number of alternatives");
        PointError pe{a, {expected.values().begin(), expected.values().end()}, {got.q.values().begin(), got.q.values().end()}, 0.0, got.raw_sum, got.skipped_mass};
        for (std::size_t j = 0; j < d; ++j) {
            const double e = std::abs(got.q[j] - expected[j]);
            pe.max_abs_error = std::max(pe.max_abs_error, e);
            rep.max_error[j] = std::max(rep.max_error[j], e);
            rep.mean_error[j] += e;
        }
        rep.worst = std::max(rep.worst, pe.max_abs_error);
        rep.max_leakage = std::max(rep.max_leakage, std::abs(1.0 - got.raw_sum));
        rep.max_skipped_mass = std::max(rep.max_skipped_mass, got.skipped_mass);
        rep.points.push_back(std::move(pe));
    }
    if (!points.empty())
        for (double& x : rep.mean_error) x /= static_cast<double>(points.size());
    rep.pass = !points.empty() && rep.worst <= tol;
    return rep;
}

/// A predictor from a generating model (the identity "recovery").
inline Predictor model_predictor(const ChoiceModelSpec& model) {
    return [model](std::span<const double> a) {
        return RationalizedProb{choice_prob_closed_form(model, a), 1.0, 1.0, 0.0};
    };
}

inline Predictor rationalized_predictor(const RationalizedModel& model, IntegrationMethod method) {
    return [&model, method](std::span<const double> a) { return model(a, method); };
}

/// Uniform random points at least one grid step inside the hull.
inline PointSet random_interior_points(const GridSpec& g, std::size_t n, std::uint64_t seed,
                                       std::optional<std::vector<std::pair<double, double>>> box = std::nullopt) {
    std::mt19937_64 rng(seed);
    PointSet out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> a(g.dims());
        for (std::size_t k = 0; k < g.dims(); ++k) {
            const auto& ax = g.axis(k);
            double lo = ax.from_coord(ax.coord_lo() + ax.step());
            double hi = ax.from_coord(ax.coord_hi() - ax.step());
            if (box) {
                lo = std::max(lo, (*box)[k].first);
                hi = std::min(hi, (*box)[k].second);
            }
            a[k] = std::uniform_real_distribution<double>(lo, hi)(rng);
        }
        out.push_back(std::move(a));
    }
    return out;
}

// ---------------------------------------------------------------------------
// No income effects

struct TranslationReport {
    double tolerance = 0.0;
    double max_difference = 0.0;
    std::vector<double> worst_point;
    double worst_shift = 0.0;
    std::size_t comparisons = 0;
    std::size_t skipped = 0;
    bool pass = true;
};

/// Compares q(a + c*1) with q(a) at sampled points for each shift c.
inline TranslationReport translation_invariance_check(const ProbabilityField& field, const std::vector<double>& shifts,
                                                      double tol, const PointSet& points) {
    TranslationReport rep;
    rep.tolerance = tol;
    for (const auto& a : points) {
        const auto q = interpolate(field, a).q;
        for (double c : shifts) {
            std::vector<double> b(a);
            for (double& x : b) x += c;
            if (!field.grid().contains(b)) {
                ++rep.skipped;
                continue;
            }
            const double diff = interpolate(field, b).q.max_abs_diff(q);
            ++rep.comparisons;
            if (diff > rep.max_difference || rep.worst_point.empty()) {
                rep.max_difference = std::max(rep.max_difference, diff);
                rep.worst_point = a;
                rep.worst_shift = c;
            }
        }
    }
    rep.pass = rep.comparisons > 0 && rep.max_difference <= tol;
    return rep;
}

/// Sample points for translation checks: random points whose shifts all stay inside the hull.
inline PointSet translation_points(const GridSpec& g, const std::vector<double>& shifts, std::size_t n,
                                   std::uint64_t seed) {
    double lo_shift = 0.0, hi_shift = 0.0;
    for (double c : shifts) {
        lo_shift = std::min(lo_shift, c);
        hi_shift = std::max(hi_shift, c);
    }
    std::vector<std::pair<double, double>> box;
    for (const auto& ax : g.axes()) box.emplace_back(ax.lo - lo_shift, ax.hi - hi_shift);
    for (const auto& [lo, hi] : box)
        if (!(lo < hi)) throw InputError("shifts larger than the grid range");
    std::mt19937_64 rng(seed);
    PointSet out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> a;
        for (const auto& [lo, hi] : box) a.push_back(std::uniform_real_distribution<double>(lo, hi)(rng));
        out.push_back(std::move(a));
    }
    return out;
}

} // namespace rumid
