#pragma once

#include <rumid/errors.hpp>
#include <rumid/field.hpp>
#include <rumid/ratio.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rumid {

using PointSet = std::vector<std::vector<double>>;

/// Median |dq_k/da_l| (k != l) over a subsample of interior nodes. Used to
/// make the degeneracy threshold for ratio denominators scale-free.
inline double derivative_scale(const ProbabilityField& field, std::size_t max_nodes = 2000) {
    const GridSpec& g = field.grid();
    const std::size_t d = g.dims();
    const std::size_t stride = std::max<std::size_t>(1, g.node_count() / max_nodes);
    std::vector<double> mags;
    for (std::size_t f = 0; f < g.node_count(); f += stride) {
        const auto idx = g.unflat(f);
        if (!g.interior(idx)) continue;
        const auto a = g.node_point(f);
        for (std::size_t k = 0; k < d; ++k)
            for (std::size_t l = 0; l < d; ++l)
                if (k != l) mags.push_back(std::abs(partial(field, k, l, a).value));
    }
    if (mags.empty()) return 1.0;
    auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
    std::nth_element(mags.begin(), mid, mags.end());
    return *mid > 0.0 ? *mid : 1.0;
}

/// Default degeneracy threshold: 1e-8 times the field's median cross derivative.
inline double default_eps_denom(const ProbabilityField& field) { return 1e-8 * derivative_scale(field); }

/// t_kl(a) = (dq_k/da_l) / (dq_l/da_k).
///
/// With l the pivot this is the ratio t_k0 of the characteristic equations;
/// Daly-Zachary symmetry says it is identically one.
inline double slutsky_ratio(const ProbabilityField& field, std::size_t k, std::size_t l, std::span<const double> a,
                            double eps_denom) {
    if (k == l) throw InputError("slutsky_ratio needs k != l");
    const double num = partial(field, k, l, a).value;
    const double den = partial(field, l, k, a).value;
    if (!(std::abs(den) >= eps_denom))
        throw DegenerateError("|dq_" + std::to_string(l) + "/da_" + std::to_string(k) + "| = " +
                              std::to_string(std::abs(den)) + " below degeneracy threshold");
    return num / den;
}

inline double slutsky_ratio(const ProbabilityField& field, std::size_t k, std::size_t l, std::span<const double> a) {
    return slutsky_ratio(field, k, l, a, default_eps_denom(field));
}

// ---------------------------------------------------------------------------
// Reports

enum class SymmetryMode { daly_zachary, condition_a };

struct PairResult {
    std::size_t k = 0;
    std::size_t l = 0;
    /// Daly-Zachary: max |ratio - 1|. Condition (A): max spread of the ratio within a family.
    double statistic = 0.0;
    std::vector<double> worst_point;
    std::size_t points_used = 0;
    std::size_t excluded = 0;
    std::size_t inconclusive_families = 0;
    bool inconclusive = false;
    bool pass = true;
    /// Daly-Zachary only: ratio at each supplied point (NaN where degenerate).
    std::vector<double> ratios;
};

struct SymmetryReport {
    SymmetryMode mode = SymmetryMode::daly_zachary;
    double tolerance = 0.0;
    double eps_denom = 0.0;
    std::size_t pivot = 0;
    bool vacuous = false;
    bool inconclusive = false;
    bool pass = true;
    std::vector<PairResult> pairs;
    PointSet points;

    double max_statistic() const {
        double m = 0.0;
        for (const auto& p : pairs) m = std::max(m, p.statistic);
        return m;
    }

    const PairResult& pair(std::size_t k, std::size_t l) const {
        for (const auto& p : pairs)
            if (p.k == k && p.l == l) return p;
        throw InputError("pair not present in report");
    }
};

/// Daly-Zachary symmetry: every ordered pair's cross-partial ratio equals one.
inline SymmetryReport test_daly_zachary(const ProbabilityField& field, const PointSet& points, double tol,
                                        std::optional<double> eps_denom = std::nullopt) {
    SymmetryReport rep;
    rep.mode = SymmetryMode::daly_zachary;
    rep.tolerance = tol;
    rep.eps_denom = eps_denom ? *eps_denom : default_eps_denom(field);
    rep.points = points;
    const std::size_t d = field.alternatives();
    for (std::size_t k = 0; k < d; ++k)
        for (std::size_t l = 0; l < d; ++l) {
            if (k == l) continue;
            PairResult pr;
            pr.k = k;
            pr.l = l;
            for (const auto& a : points) {
                double r = std::numeric_limits<double>::quiet_NaN();
                try {
                    r = slutsky_ratio(field, k, l, a, rep.eps_denom);
                } catch (const DegenerateError&) {
                    ++pr.excluded;
                }
                pr.ratios.push_back(r);
                if (std::isnan(r)) continue;
                ++pr.points_used;
                const double dev = std::abs(r - 1.0);
                if (pr.worst_point.empty() || dev > pr.statistic) {
                    pr.statistic = dev;
                    pr.worst_point = a;
                }
            }
            pr.inconclusive = pr.points_used == 0;
            pr.pass = !pr.inconclusive && pr.statistic <= tol;
            rep.inconclusive = rep.inconclusive || pr.inconclusive;
            rep.pass = rep.pass && pr.pass;
            rep.pairs.push_back(std::move(pr));
        }
    return rep;
}

struct ConditionAOptions {
    /// Off-pair coordinate combinations per family are thinned to at most this many.
    std::size_t max_family_size = 64;
    std::optional<double> eps_denom;
    /// Divide each family's spread by its mean |ratio|, for fields whose ratio spans decades.
    bool relative = false;
};

/// Condition (A) with pivot m: for each j != m the ratio t_jm evaluated at
/// points sharing (a_j, a_m) must not vary with the other coordinates.
///
/// Each supplied point anchors a family whose off-pair coordinates sweep the
/// grid nodes. A family with more than half its members degenerate is
/// inconclusive and does not count toward pass/fail.
inline SymmetryReport test_condition_A(const ProbabilityField& field, std::size_t m, const PointSet& points,
                                       double tol, const ConditionAOptions& opt = {}) {
    SymmetryReport rep;
    rep.mode = SymmetryMode::condition_a;
    rep.tolerance = tol;
    rep.pivot = m;
    rep.points = points;
    const GridSpec& g = field.grid();
    const std::size_t d = g.dims();
    if (m >= d) throw InputError("pivot out of range");
    if (d == 2) {
        rep.vacuous = true;
        return rep;
    }
    rep.eps_denom = opt.eps_denom ? *opt.eps_denom : default_eps_denom(field);

    for (std::size_t j = 0; j < d; ++j) {
        if (j == m) continue;
        std::vector<std::size_t> others;
        for (std::size_t k = 0; k < d; ++k)
            if (k != j && k != m) others.push_back(k);
        // Thin each off-pair axis evenly so the product stays under the cap.
        const double per_axis = std::pow(static_cast<double>(opt.max_family_size), 1.0 / static_cast<double>(others.size()));
        std::vector<std::vector<double>> sweep;
        for (auto k : others) {
            const auto& ax = g.axis(k);
            const std::size_t take = std::max<std::size_t>(2, std::min<std::size_t>(ax.n, static_cast<std::size_t>(per_axis)));
            std::vector<double> vals;
            for (std::size_t i = 0; i < take; ++i)
                vals.push_back(ax.node(static_cast<std::size_t>(std::llround(static_cast<double>(i) * static_cast<double>(ax.n - 1) /
                                                                             static_cast<double>(take - 1)))));
            sweep.push_back(std::move(vals));
        }
        std::size_t combos = 1;
        for (const auto& s : sweep) combos *= s.size();

        PairResult pr;
        pr.k = j;
        pr.l = m;
        std::size_t conclusive = 0;
        for (const auto& anchor : points) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            double abs_sum = 0.0;
            std::size_t excluded = 0;
            std::vector<double> a = anchor;
            for (std::size_t c = 0; c < combos; ++c) {
                std::size_t rem = c;
                for (std::size_t i = 0; i < others.size(); ++i) {
                    a[others[i]] = sweep[i][rem % sweep[i].size()];
                    rem /= sweep[i].size();
                }
                try {
                    const double r = slutsky_ratio(field, j, m, a, rep.eps_denom);
                    lo = std::min(lo, r);
                    hi = std::max(hi, r);
                    abs_sum += std::abs(r);
                    ++pr.points_used;
                } catch (const DegenerateError&) {
                    ++excluded;
                }
            }
            pr.excluded += excluded;
            if (2 * excluded > combos) {
                ++pr.inconclusive_families;
                continue;
            }
            ++conclusive;
            double spread = hi - lo;
            if (opt.relative && abs_sum > 0.0) spread /= abs_sum / static_cast<double>(combos - excluded);
            if (pr.worst_point.empty() || spread > pr.statistic) {
                pr.statistic = spread;
                pr.worst_point = anchor;
            }
        }
        pr.inconclusive = conclusive == 0 && !points.empty();
        pr.pass = !pr.inconclusive && pr.statistic <= tol;
        rep.inconclusive = rep.inconclusive || pr.inconclusive;
        rep.pass = rep.pass && pr.pass;
        rep.pairs.push_back(std::move(pr));
    }
    return rep;
}

struct PivotDiagnostic {
    std::size_t recommended = 0;
    /// min over interior nodes and j != m of |dq_m/da_j|, per candidate m.
    std::vector<double> min_denominator;
};

/// Recommends the pivot whose ratio denominators stay furthest from zero.
inline PivotDiagnostic recommend_pivot(const ProbabilityField& field, std::size_t max_nodes = 4000) {
    const GridSpec& g = field.grid();
    const std::size_t d = g.dims();
    PivotDiagnostic out;
    out.min_denominator.assign(d, std::numeric_limits<double>::infinity());
    const std::size_t stride = std::max<std::size_t>(1, g.node_count() / max_nodes);
    for (std::size_t f = 0; f < g.node_count(); f += stride) {
        if (!g.interior(g.unflat(f))) continue;
        const auto a = g.node_point(f);
        for (std::size_t m = 0; m < d; ++m)
            for (std::size_t j = 0; j < d; ++j)
                if (j != m)
                    out.min_denominator[m] = std::min(out.min_denominator[m], std::abs(partial(field, m, j, a).value));
    }
    out.recommended = static_cast<std::size_t>(
        std::max_element(out.min_denominator.begin(), out.min_denominator.end()) - out.min_denominator.begin());
    return out;
}

// ---------------------------------------------------------------------------
// Sieve regression

struct SieveOptions {
    double eps_rel = 1e-8;
    /// Interior nodes are thinned to at most this many samples.
    std::size_t max_samples = 40000;
    /// Relative pivot threshold below which a basis column counts as dependent.
    double rank_tol = 1e-10;
};

/// Least-squares projection of t_jm on bivariate monomials in (a_j, a_m)
/// up to total degree (or in (ln a_j, ln a_m) for the log of the ratio).
///
/// Samples are the interior lattice nodes; degenerate denominators are
/// dropped. The fitted function is clipped at zero from below.
inline RatioFunction fit_ratio_sieve(const ProbabilityField& field, std::size_t j, std::size_t m, SieveBasis basis,
                                     int degree, const SieveOptions& opt = {}) {
    const GridSpec& g = field.grid();
    if (j >= g.dims() || m >= g.dims() || j == m) throw InputError("fit_ratio_sieve needs distinct j, m within range");
    if (degree < 0) throw InputError("sieve degree must be >= 0");
    if (basis == SieveBasis::log_polynomial && !(g.axis(j).lo > 0.0 && g.axis(m).lo > 0.0))
        throw InputError("log_polynomial basis needs a_j > 0 and a_m > 0 on the grid");
    const double eps = opt.eps_rel * derivative_scale(field);
    std::vector<std::size_t> nodes;
    for (std::size_t f = 0; f < g.node_count(); ++f)
        if (g.interior(g.unflat(f))) nodes.push_back(f);
    const std::size_t stride = std::max<std::size_t>(1, (nodes.size() + opt.max_samples - 1) / opt.max_samples);

    std::vector<double> xs, ys, targets;
    SieveFit fit;
    fit.basis = basis;
    fit.degree = degree;
    for (std::size_t i = 0; i < nodes.size(); i += stride) {
        const auto a = g.node_point(nodes[i]);
        double r = 0.0;
        try {
            r = slutsky_ratio(field, j, m, a, eps);
        } catch (const DegenerateError&) {
            ++fit.excluded;
            continue;
        }
        if (!std::isfinite(r)) {
            ++fit.excluded;
            continue;
        }
        if (basis == SieveBasis::log_polynomial) {
            if (!(r > 0.0))
                throw NumericalError("non-positive ratio sample " + std::to_string(r) +
                                     " cannot be fitted on the log_polynomial basis");
            xs.push_back(std::log(a[j]));
            ys.push_back(std::log(a[m]));
            targets.push_back(std::log(r));
        } else {
            xs.push_back(a[j]);
            ys.push_back(a[m]);
            targets.push_back(r);
        }
    }
    const auto ex = basis_exponents(degree);
    const auto n = static_cast<Eigen::Index>(targets.size());
    const auto p = static_cast<Eigen::Index>(ex.size());
    if (n < p)
        throw NumericalError("rank-deficient sieve: " + std::to_string(ex.size()) + " basis terms but only " +
                             std::to_string(targets.size()) + " usable samples (degenerate basis term " +
                             basis_term_name(basis, ex.back()) + ")");
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto ri = static_cast<std::size_t>(r);
        for (Eigen::Index c = 0; c < p; ++c) {
            const auto [ep, eq] = ex[static_cast<std::size_t>(c)];
            X(r, c) = std::pow(xs[ri], ep) * std::pow(ys[ri], eq);
        }
        y(r) = targets[ri];
    }
    // Column scaling keeps the rank decision independent of coordinate units.
    Eigen::VectorXd norms = X.colwise().norm().transpose();
    for (Eigen::Index c = 0; c < p; ++c)
        if (norms(c) > 0.0) X.col(c) /= norms(c);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(opt.rank_tol);
    if (qr.rank() < p) {
        const auto idx = qr.colsPermutation().indices()(qr.rank());
        throw NumericalError("rank-deficient sieve normal equations: basis term " +
                             basis_term_name(basis, ex[static_cast<std::size_t>(idx)]) +
                             " is linearly dependent on the others over the sample");
    }
    Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = X * beta - y;
    for (Eigen::Index c = 0; c < p; ++c)
        if (norms(c) > 0.0) beta(c) /= norms(c);
    fit.coefficients.assign(beta.data(), beta.data() + p);
    fit.samples = targets.size();
    fit.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
    fit.max_residual = resid.cwiseAbs().maxCoeff();
    const Rect dom{g.axis(j).lo, g.axis(j).hi, g.axis(m).lo, g.axis(m).hi};
    return RatioFunction(j, m, dom, fit);
}

/// Interior lattice nodes thinned to about `count` points, deterministic.
inline PointSet interior_nodes(const GridSpec& g, std::size_t count) {
    std::vector<std::size_t> nodes;
    for (std::size_t f = 0; f < g.node_count(); ++f)
        if (g.interior(g.unflat(f))) nodes.push_back(f);
    PointSet out;
    if (nodes.empty() || count == 0) return out;
    const double stride = static_cast<double>(nodes.size()) / static_cast<double>(std::min(count, nodes.size()));
    for (double x = 0.0; static_cast<std::size_t>(x) < nodes.size() && out.size() < count; x += stride)
        out.push_back(g.node_point(nodes[static_cast<std::size_t>(x)]));
    return out;
}

} // namespace rumid
