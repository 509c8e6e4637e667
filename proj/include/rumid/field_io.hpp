#pragma once

#include <rumid/errors.hpp>
#include <rumid/field.hpp>
#include <rumid/grid.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace rumid {

/// Shortest decimal text that round-trips a double.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Reads a numeric CSV with one header line. Errors carry the line number and column.
inline CsvTable read_csv(std::istream& in, const std::string& source = "csv") {
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (t.header.empty()) {
            t.header = split_csv_line(line);
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != t.header.size())
            throw InputError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                             " columns, found " + std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            try {
                std::size_t used = 0;
                row[c] = std::stod(cells[c], &used);
                if (used != cells[c].size()) throw std::invalid_argument("trailing text");
            } catch (const std::exception&) {
                throw InputError(source + ":" + std::to_string(lineno) + ": column '" + t.header[c] +
                                 "' is not a number: '" + cells[c] + "'");
            }
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw InputError(source + ": empty file");
    return t;
}

inline CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_csv(in, path);
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_double(r[c]);
        out << '\n';
    }
}

inline void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                           const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    write_csv(out, header, rows);
    if (!out) throw InputError("write failed for " + path);
}

inline std::vector<std::string> field_header(std::size_t alternatives) {
    std::vector<std::string> h;
    for (std::size_t j = 0; j < alternatives; ++j) h.push_back("a_" + std::to_string(j));
    for (std::size_t j = 0; j < alternatives; ++j) h.push_back("q_" + std::to_string(j));
    return h;
}

inline void write_field_csv(std::ostream& out, const ProbabilityField& field) {
    const GridSpec& g = field.grid();
    const std::size_t d = g.dims();
    const auto header = field_header(d);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (std::size_t f = 0; f < g.node_count(); ++f) {
        const auto a = g.node_point(f);
        for (std::size_t k = 0; k < d; ++k) out << (k ? "," : "") << format_double(a[k]);
        for (std::size_t j = 0; j < d; ++j) out << ',' << format_double(field.at(f, j));
        out << '\n';
    }
}

inline void write_field_csv_file(const std::string& path, const ProbabilityField& field) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    write_field_csv(out, field);
    if (!out) throw InputError("write failed for " + path);
}

namespace detail {

/// Recovers a linear or log-uniform axis from its distinct node values.
inline Axis infer_axis(std::vector<double> vals, const std::string& name) {
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    if (vals.size() < 5) throw InputError("column " + name + " has " + std::to_string(vals.size()) + " distinct values; need >= 5");
    const std::size_t n = vals.size();
    auto uniform = [&](AxisScale scale) {
        if (scale == AxisScale::log && !(vals.front() > 0.0)) return false;
        const Axis ax{vals.front(), vals.back(), n, scale};
        const double tol = 1e-7 * ax.step();
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(ax.to_coord(vals[i]) - ax.to_coord(ax.node(i))) > tol) return false;
        return true;
    };
    if (uniform(AxisScale::linear)) return Axis{vals.front(), vals.back(), n, AxisScale::linear};
    if (uniform(AxisScale::log)) return Axis{vals.front(), vals.back(), n, AxisScale::log};
    throw InputError("column " + name + " is neither uniformly nor log-uniformly spaced");
}

inline std::size_t node_index(const Axis& ax, double a) {
    const double pos = (ax.to_coord(a) - ax.coord_lo()) / ax.step();
    return static_cast<std::size_t>(std::llround(pos));
}

} // namespace detail

/// Reads a field CSV: header a_0..a_J,q_0..q_J, one row per lattice node.
/// The lattice must be complete and each node listed once.
inline ProbabilityField read_field_csv(std::istream& in, const std::string& source = "field", double sum_tol = 1e-9) {
    const auto t = read_csv(in, source);
    if (t.header.size() < 4 || t.header.size() % 2 != 0)
        throw InputError(source + ": header must be a_0..a_J,q_0..q_J");
    const std::size_t d = t.header.size() / 2;
    if (t.header != field_header(d)) throw InputError(source + ": header must be a_0..a_J,q_0..q_J in order");
    std::vector<Axis> axes;
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> col;
        col.reserve(t.rows.size());
        for (const auto& r : t.rows) col.push_back(r[k]);
        axes.push_back(detail::infer_axis(std::move(col), t.header[k]));
    }
    const GridSpec g(axes);
    if (t.rows.size() != g.node_count())
        throw InputError(source + ": " + std::to_string(t.rows.size()) + " rows but the lattice has " +
                         std::to_string(g.node_count()) + " nodes");
    std::vector<double> values(g.node_count() * d, 0.0);
    std::vector<char> seen(g.node_count(), 0);
    std::vector<std::size_t> idx(d);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t k = 0; k < d; ++k) idx[k] = detail::node_index(g.axis(k), t.rows[r][k]);
        const std::size_t f = g.flat(idx);
        if (seen[f]) throw InputError(source + ":" + std::to_string(r + 2) + ": duplicate lattice node");
        seen[f] = 1;
        for (std::size_t j = 0; j < d; ++j) values[f * d + j] = t.rows[r][d + j];
    }
    try {
        return ProbabilityField(g, std::move(values), source, sum_tol);
    } catch (const InputError& e) {
        throw InputError(source + ": " + e.what());
    }
}

inline ProbabilityField read_field_csv_file(const std::string& path, double sum_tol = 1e-9) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_field_csv(in, path, sum_tol);
}

} // namespace rumid
