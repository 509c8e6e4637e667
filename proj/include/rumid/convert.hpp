#pragma once

#include <rumid/errors.hpp>
#include <rumid/field.hpp>
#include <rumid/field_io.hpp>
#include <rumid/grid.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rumid {

// Price notation: alternative j costs p_j out of income y, the outside option
// costs nothing. Offer notation: a_j = y - p_j is the numeraire left after
// choosing j, so a_0 = y.

/// Rows of (p_1..p_J, y, q_0..q_J) become rows of (a_0..a_J, q_0..q_J).
/// An optional p_0 column is accepted only if it is identically zero.
inline CsvTable prices_to_offers(const CsvTable& in) {
    const auto& h = in.header;
    std::size_t col = 0;
    bool has_p0 = false;
    if (!h.empty() && h[0] == "p_0") {
        has_p0 = true;
        col = 1;
    }
    std::size_t J = 0;
    while (col + J < h.size() && h[col + J] == "p_" + std::to_string(J + 1)) ++J;
    if (J == 0) throw InputError("price table needs columns p_1..p_J");
    const std::size_t ycol = col + J;
    if (ycol >= h.size() || h[ycol] != "y") throw InputError("price table needs a y column after p_" + std::to_string(J));
    for (std::size_t j = 0; j <= J; ++j)
        if (ycol + 1 + j >= h.size() || h[ycol + 1 + j] != "q_" + std::to_string(j))
            throw InputError("price table needs columns q_0..q_" + std::to_string(J) + " after y");
    if (h.size() != ycol + J + 2) throw InputError("price table has unexpected extra columns");

    CsvTable out;
    out.header = field_header(J + 1);
    for (std::size_t r = 0; r < in.rows.size(); ++r) {
        const auto& row = in.rows[r];
        if (has_p0 && row[0] != 0.0)
            throw InputError("row " + std::to_string(r + 2) + ": p_0 must be 0 for the outside option");
        const double y = row[ycol];
        std::vector<double> o(2 * (J + 1));
        o[0] = y;
        for (std::size_t j = 1; j <= J; ++j) o[j] = y - row[col + j - 1];
        for (std::size_t j = 0; j <= J; ++j) o[J + 1 + j] = row[ycol + 1 + j];
        out.rows.push_back(std::move(o));
    }
    return out;
}

/// Inverse of prices_to_offers: y = a_0, p_j = a_0 - a_j.
inline CsvTable offers_to_prices(const CsvTable& in) {
    if (in.header.size() < 4 || in.header.size() % 2 != 0 || in.header != field_header(in.header.size() / 2))
        throw InputError("offer table needs columns a_0..a_J,q_0..q_J");
    const std::size_t d = in.header.size() / 2;
    CsvTable out;
    for (std::size_t j = 1; j < d; ++j) out.header.push_back("p_" + std::to_string(j));
    out.header.push_back("y");
    for (std::size_t j = 0; j < d; ++j) out.header.push_back("q_" + std::to_string(j));
    for (const auto& row : in.rows) {
        std::vector<double> o;
        for (std::size_t j = 1; j < d; ++j) o.push_back(row[0] - row[j]);
        o.push_back(row[0]);
        for (std::size_t j = 0; j < d; ++j) o.push_back(row[d + j]);
        out.rows.push_back(std::move(o));
    }
    return out;
}

struct ResampleResult {
    ProbabilityField field;
    /// Richardson estimate of the multilinear interpolation error (max over nodes and alternatives),
    /// from comparing the full price lattice with every other node; NaN when the lattice is too small.
    double error_estimate = std::nan("");
};

namespace detail {

/// The price table as a field over (p_1..p_J, y); requires a complete lattice in those coordinates.
inline ProbabilityField price_lattice(const CsvTable& prices) {
    prices_to_offers(prices); // header and p_0 checks
    const std::size_t col = prices.header[0] == "p_0" ? 1 : 0;
    const std::size_t J = (prices.header.size() - col - 2) / 2;
    CsvTable t;
    t.header = field_header(J + 1);
    for (const auto& row : prices.rows) {
        std::vector<double> o(row.begin() + static_cast<std::ptrdiff_t>(col), row.end());
        t.rows.push_back(std::move(o));
    }
    // Relabel so the lattice reader can be reused: columns p_1..p_J, y sit where a_0..a_J would.
    std::ostringstream buf;
    write_csv(buf, t.header, t.rows);
    std::istringstream in(buf.str());
    try {
        return read_field_csv(in, "price table", 1e-6);
    } catch (const InputError& e) {
        throw InputError(std::string("price table is not a lattice in (p_1..p_J, y): ") + e.what());
    }
}

inline std::optional<ProbabilityField> every_other_node(const ProbabilityField& f) {
    const GridSpec& g = f.grid();
    std::vector<Axis> axes;
    for (const auto& ax : g.axes()) {
        if (ax.n % 2 == 0 || ax.n < 9) return std::nullopt;
        axes.push_back(Axis{ax.lo, ax.hi, (ax.n + 1) / 2, ax.scale});
    }
    const GridSpec coarse(axes);
    std::vector<double> values;
    std::vector<std::size_t> idx(g.dims());
    for (std::size_t c = 0; c < coarse.node_count(); ++c) {
        const auto ci = coarse.unflat(c);
        for (std::size_t k = 0; k < g.dims(); ++k) idx[k] = 2 * ci[k];
        const std::size_t node = g.flat(idx);
        for (std::size_t j = 0; j < g.dims(); ++j) values.push_back(f.at(node, j));
    }
    return ProbabilityField(coarse, std::move(values), "coarse", 1e-6);
}

} // namespace detail

/// Resamples a price-lattice table onto an offer lattice by multilinear
/// interpolation in (p_1..p_J, y). Every target node must map inside the price hull.
inline ResampleResult resample_to_offer_lattice(const CsvTable& prices, const GridSpec& target) {
    const ProbabilityField pf = detail::price_lattice(prices);
    const std::size_t d = pf.alternatives();
    if (target.dims() != d) throw InputError("target grid needs " + std::to_string(d) + " axes");
    const auto coarse = detail::every_other_node(pf);

    std::vector<double> values(target.node_count() * d);
    std::size_t outside = 0;
    double err = 0.0;
    std::vector<double> pt(d);
    for (std::size_t f = 0; f < target.node_count(); ++f) {
        const auto a = target.node_point(f);
        for (std::size_t j = 1; j < d; ++j) pt[j - 1] = a[0] - a[j];
        pt[d - 1] = a[0];
        if (!pf.grid().contains(pt)) {
            ++outside;
            continue;
        }
        const auto q = interpolate(pf, pt).q;
        for (std::size_t j = 0; j < d; ++j) values[f * d + j] = q[j];
        if (coarse) err = std::max(err, interpolate(*coarse, pt).q.max_abs_diff(q) / 3.0);
    }
    if (outside > 0)
        throw InputError(std::to_string(outside) + " of " + std::to_string(target.node_count()) +
                         " target nodes map outside the price lattice; shrink the offer grid");
    return ResampleResult{ProbabilityField(target, std::move(values), "resampled", 1e-6),
                          coarse ? err : std::nan("")};
}

} // namespace rumid
