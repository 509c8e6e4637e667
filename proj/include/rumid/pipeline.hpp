#pragma once

#include <rumid/characteristics.hpp>
#include <rumid/density.hpp>
#include <rumid/errors.hpp>
#include <rumid/field.hpp>
#include <rumid/field_io.hpp>
#include <rumid/ratio.hpp>
#include <rumid/symmetry.hpp>
#include <rumid/verify.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rumid {

/// Identification was refused because the field fails condition (A).
class IdentifyRefused : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Provenance hash

/// 64-bit FNV-1a.
class Fnv1a {
public:
    Fnv1a& bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= c[i];
            h_ *= 0x100000001b3ULL;
        }
        return *this;
    }
    Fnv1a& add(double x) {
        if (x == 0.0) x = 0.0; // fold -0
        return bytes(&x, sizeof x);
    }
    Fnv1a& add(std::uint64_t x) { return bytes(&x, sizeof x); }
    Fnv1a& add(const std::string& s) { return add(static_cast<std::uint64_t>(s.size())).bytes(s.data(), s.size()); }
    Fnv1a& add(const GridSpec& g) {
        add(static_cast<std::uint64_t>(g.dims()));
        for (const auto& ax : g.axes())
            add(ax.lo).add(ax.hi).add(static_cast<std::uint64_t>(ax.n)).add(to_string(ax.scale));
        return *this;
    }
    std::uint64_t value() const { return h_; }
    std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
        return buf;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string field_hash(const ProbabilityField& field) {
    Fnv1a h;
    h.add(field.grid());
    for (std::size_t f = 0; f < field.grid().node_count(); ++f)
        for (std::size_t j = 0; j < field.alternatives(); ++j) h.add(field.at(f, j));
    return h.hex();
}

/// Ties ratio, ω, w and density artifacts to one field and one anchoring.
inline std::string artifact_hash(const std::string& field_h, std::size_t pivot, const std::vector<double>& a_ref,
                                 const GridSpec& v_grid) {
    Fnv1a h;
    h.add(field_h).add(static_cast<std::uint64_t>(pivot));
    for (double x : a_ref) h.add(std::isnan(x) ? 0.0 : x);
    h.add(v_grid);
    return h.hex();
}

// ---------------------------------------------------------------------------
// Identification

struct IdentifyOptions {
    std::size_t pivot = 0;
    bool force = false;
    /// Relative spread of t_jm within each family.
    double condition_a_tol = 0.05;
    std::size_t condition_a_points = 20;
    /// Defaults to log_polynomial when a_j and a_m are positive on the grid.
    std::optional<SieveBasis> basis;
    int degree = 2;
    SieveOptions sieve{};
    /// Same a_ref for every alternative; defaults to the middle of each a_j range.
    std::optional<double> a_ref;
    OmegaOptions omega = [] {
        OmegaOptions o;
        o.allow_partial = true;
        return o;
    }();
    /// Every v axis; defaults to the pivot's range, since v carries the pivot's units.
    std::optional<Axis> v_axis;
    std::size_t v_nodes = 121;
    DensityOptions density{};
};

struct IdentifyResult {
    std::size_t pivot = 0;
    SymmetryReport condition_a;
    bool forced = false;
    /// Indexed by alternative; the pivot entry is null / NaN / empty.
    std::vector<std::shared_ptr<const OmegaFunction>> omegas;
    std::vector<double> a_ref;
    std::vector<OmegaValidation> validation;
    DensityGrid density;
    MassReport mass;
    std::string field_hash;
    std::string hash;
    OmegaOptions omega_options;

    std::vector<UtilityFunction> utilities() const {
        std::vector<UtilityFunction> u;
        for (std::size_t j = 0; j < omegas.size(); ++j) {
            if (j == pivot)
                u.emplace_back(j);
            else
                u.emplace_back(omegas[j]);
        }
        return u;
    }
    OmegaSet omega_set() const { return OmegaSet(pivot, omegas); }
};

inline SieveBasis default_basis(const GridSpec& g, std::size_t j, std::size_t m) {
    return g.axis(j).lo > 0.0 && g.axis(m).lo > 0.0 ? SieveBasis::log_polynomial : SieveBasis::polynomial;
}

inline GridSpec default_v_grid(const ProbabilityField& field, std::size_t pivot, std::size_t nodes) {
    const auto& ax = field.grid().axis(pivot);
    return GridSpec(std::vector<Axis>(field.alternatives() - 1, default_v_axis(ax.lo, ax.hi, nodes)));
}

/// Condition (A) gate, sieve fit of each t_jm, ω and w by characteristics, density by Eq. (5).
inline IdentifyResult identify(const ProbabilityField& field, const IdentifyOptions& opt = {}) {
    const GridSpec& g = field.grid();
    const std::size_t d = g.dims();
    const std::size_t m = opt.pivot;
    if (m >= d) throw InputError("pivot " + std::to_string(m) + " out of range");
    IdentifyResult r;
    r.pivot = m;
    r.omega_options = opt.omega;
    r.field_hash = field_hash(field);

    ConditionAOptions ca;
    ca.relative = true;
    r.condition_a = test_condition_A(field, m, interior_nodes(g, opt.condition_a_points), opt.condition_a_tol, ca);
    if (!r.condition_a.pass && !r.condition_a.vacuous) {
        if (!opt.force)
            throw IdentifyRefused("field fails condition (A) with pivot " + std::to_string(m) + " (max spread " +
                                  format_double(r.condition_a.max_statistic()) +
                                  "); run `check` for the full report or pass --force");
        r.forced = true;
    }

    r.omegas.assign(d, nullptr);
    r.a_ref.assign(d, std::nan(""));
    r.validation.assign(d, OmegaValidation{});
    for (std::size_t j = 0; j < d; ++j) {
        if (j == m) continue;
        const SieveBasis basis = opt.basis.value_or(default_basis(g, j, m));
        const RatioFunction t = fit_ratio_sieve(field, j, m, basis, opt.degree, opt.sieve);
        const Rect box{g.axis(j).lo, g.axis(j).hi, g.axis(m).lo, g.axis(m).hi};
        OmegaOptions oo = opt.omega;
        const double a_ref = opt.a_ref.value_or(default_a_ref(box, g.axis(j).scale));
        r.a_ref[j] = a_ref;
        r.omegas[j] = build_omega(t, box, a_ref, oo);
        r.validation[j] = validate_omega(*r.omegas[j]);
    }

    GridSpec vg = opt.v_axis ? GridSpec(std::vector<Axis>(d - 1, *opt.v_axis)) : default_v_grid(field, m, opt.v_nodes);
    r.density = reconstruct_density(field, r.omega_set(), vg, opt.density);
    r.mass = check_normalization(r.density);
    r.hash = artifact_hash(r.field_hash, m, r.a_ref, vg);
    return r;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace detail {

inline nlohmann::json axis_json(const Axis& ax) {
    return {{"lo", ax.lo}, {"hi", ax.hi}, {"n", ax.n}, {"scale", to_string(ax.scale)}};
}

inline Axis axis_from_json(const nlohmann::json& j) {
    const auto scale = j.at("scale").get<std::string>();
    if (scale != "linear" && scale != "log") throw InputError("axis scale must be linear or log");
    return Axis{j.at("lo").get<double>(), j.at("hi").get<double>(), j.at("n").get<std::size_t>(),
                scale == "log" ? AxisScale::log : AxisScale::linear};
}

inline nlohmann::json grid_json(const GridSpec& g) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& ax : g.axes()) out.push_back(axis_json(ax));
    return out;
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
    std::vector<Axis> axes;
    for (const auto& a : j) axes.push_back(axis_from_json(a));
    return GridSpec(std::move(axes));
}

inline nlohmann::json omega_options_json(const OmegaOptions& o) {
    nlohmann::json j{{"step", o.step}, {"margin", o.margin}, {"columns", o.columns}, {"traces", o.traces},
                     {"max_halvings", o.max_halvings}, {"allow_partial", o.allow_partial}};
    if (o.scale_j) j["scale_j"] = to_string(*o.scale_j);
    if (o.scale_0) j["scale_0"] = to_string(*o.scale_0);
    return j;
}

inline OmegaOptions omega_options_from_json(const nlohmann::json& j) {
    OmegaOptions o;
    o.step = j.at("step").get<double>();
    o.margin = j.at("margin").get<double>();
    o.columns = j.at("columns").get<std::size_t>();
    o.traces = j.at("traces").get<std::size_t>();
    o.max_halvings = j.at("max_halvings").get<int>();
    o.allow_partial = j.at("allow_partial").get<bool>();
    auto scale = [](const std::string& s) { return s == "log" ? AxisScale::log : AxisScale::linear; };
    if (j.contains("scale_j")) o.scale_j = scale(j["scale_j"].get<std::string>());
    if (j.contains("scale_0")) o.scale_0 = scale(j["scale_0"].get<std::string>());
    return o;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
    std::ofstream out(p);
    if (!out) throw InputError("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw InputError("missing artifact " + p.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(p.string() + ": " + e.what());
    }
}

inline double nan_or(const std::optional<double>& x) { return x ? *x : std::nan(""); }

} // namespace detail

inline nlohmann::json mass_report_json(const MassReport& m, const DensityGrid& d) {
    return {{"mass", m.mass},
            {"F_top_corner", m.F_top_corner},
            {"F_box_mass", m.F_box_mass},
            {"support_fraction", m.support_fraction},
            {"clipped", d.clipped},
            {"flagged", d.flagged},
            {"masked", d.masked},
            {"one_sided", d.one_sided},
            {"max_f", d.max_f},
            {"min_f_raw", d.min_f_raw},
            {"route_disagreement", d.route_disagreement},
            {"route_tolerance", d.route_tolerance}};
}

/// Writes ratio_<j>.json, omega_<j>.csv, w_<j>.csv, density.csv, mass_report.json, identify_meta.json.
inline void write_identify_artifacts(const IdentifyResult& r, const ProbabilityField& field,
                                     const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const GridSpec& g = field.grid();
    const GridSpec& vg = r.density.v_grid;
    const std::size_t d = g.dims();
    const std::size_t m = r.pivot;

    nlohmann::json meta;
    meta["hash"] = r.hash;
    meta["field_hash"] = r.field_hash;
    meta["pivot"] = m;
    meta["grid"] = detail::grid_json(g);
    meta["v_grid"] = detail::grid_json(vg);
    meta["omega_options"] = detail::omega_options_json(r.omega_options);
    meta["condition_a"] = {{"pass", r.condition_a.pass},
                           {"vacuous", r.condition_a.vacuous},
                           {"forced", r.forced},
                           {"max_spread", r.condition_a.max_statistic()},
                           {"tolerance", r.condition_a.tolerance}};
    nlohmann::json alts = nlohmann::json::array();

    std::size_t axis = 0;
    for (std::size_t j = 0; j < d; ++j) {
        if (j == m) continue;
        const auto& w = *r.omegas[j];
        const auto& v = r.validation[j];
        nlohmann::json rj = to_json(w.ratio());
        rj["hash"] = r.hash;
        rj["a_ref"] = r.a_ref[j];
        detail::write_json(dir / ("ratio_" + std::to_string(j) + ".json"), rj);

        std::vector<std::vector<double>> rows;
        for (double aj : g.axis(j).nodes())
            for (double am : g.axis(m).nodes()) rows.push_back({aj, am, detail::nan_or(w.try_eval(aj, am))});
        write_csv_file((dir / ("omega_" + std::to_string(j) + ".csv")).string(),
                       {"a_" + std::to_string(j), "a_" + std::to_string(m), "omega"}, rows);

        rows.clear();
        const UtilityFunction u(r.omegas[j]);
        for (double aj : g.axis(j).nodes())
            for (double vv : vg.axis(axis).nodes()) {
                double val = std::nan("");
                try {
                    val = u(aj, vv);
                } catch (const NumericalError&) {
                }
                rows.push_back({aj, vv, val});
            }
        write_csv_file((dir / ("w_" + std::to_string(j) + ".csv")).string(),
                       {"a_" + std::to_string(j), "v_" + std::to_string(j), "w"}, rows);

        alts.push_back({{"j", j},
                        {"a_ref", r.a_ref[j]},
                        {"coverage", w.coverage().covered_fraction},
                        {"monotone_ok", v.monotone_ok},
                        {"monotone_violations", v.monotone_violations},
                        {"max_pde_residual", v.max_pde_residual},
                        {"max_anchor_error", v.max_anchor_error},
                        {"residual_rms", w.ratio().sieve().residual_rms}});
        ++axis;
    }
    meta["alternatives"] = alts;
    detail::write_json(dir / "identify_meta.json", meta);

    std::vector<std::string> header;
    for (std::size_t j = 0; j < d; ++j)
        if (j != m) header.push_back("v_" + std::to_string(j));
    header.insert(header.end(), {"f", "F", "in_support"});
    std::vector<std::vector<double>> rows;
    for (std::size_t f = 0; f < vg.node_count(); ++f) {
        auto row = vg.node_point(f);
        row.push_back(r.density.f[f]);
        row.push_back(r.density.F[f]);
        row.push_back(r.density.support[f] ? 1.0 : 0.0);
        rows.push_back(std::move(row));
    }
    write_csv_file((dir / "density.csv").string(), header, rows);

    auto mj = mass_report_json(r.mass, r.density);
    mj["hash"] = r.hash;
    detail::write_json(dir / "mass_report.json", mj);
}

/// Identification artifacts reloaded for verification.
struct LoadedIdentification {
    std::size_t pivot = 0;
    std::string hash;
    std::vector<std::shared_ptr<const OmegaFunction>> omegas;
    DensityGrid density;

    std::vector<UtilityFunction> utilities() const {
        std::vector<UtilityFunction> u;
        for (std::size_t j = 0; j < omegas.size(); ++j) {
            if (j == pivot)
                u.emplace_back(j);
            else
                u.emplace_back(omegas[j]);
        }
        return u;
    }
};

/// Reloads artifacts, rebuilding ω from the stored ratio fits. Refuses artifacts
/// whose hashes disagree with each other or with `field`.
inline LoadedIdentification load_identify_artifacts(const std::filesystem::path& dir, const ProbabilityField& field) {
    const auto meta = detail::read_json(dir / "identify_meta.json");
    LoadedIdentification out;
    try {
        out.hash = meta.at("hash").get<std::string>();
        out.pivot = meta.at("pivot").get<std::size_t>();
        const auto fh = field_hash(field);
        if (meta.at("field_hash").get<std::string>() != fh)
            throw InputError("identification artifacts in " + dir.string() + " were produced from a different field");
        if (!(detail::grid_from_json(meta.at("grid")) == field.grid()))
            throw InputError("identification grid does not match the field grid");
        const GridSpec vg = detail::grid_from_json(meta.at("v_grid"));
        const OmegaOptions oo = detail::omega_options_from_json(meta.at("omega_options"));
        const std::size_t d = field.alternatives();
        if (out.pivot >= d || vg.dims() + 1 != d) throw InputError("identification metadata has the wrong dimension");

        std::vector<double> a_ref(d, std::nan(""));
        out.omegas.assign(d, nullptr);
        for (std::size_t j = 0; j < d; ++j) {
            if (j == out.pivot) continue;
            const auto path = dir / ("ratio_" + std::to_string(j) + ".json");
            const auto rj = detail::read_json(path);
            if (rj.at("hash").get<std::string>() != out.hash)
                throw InputError(path.string() + " belongs to a different identification run (hash mismatch)");
            a_ref[j] = rj.at("a_ref").get<double>();
            const RatioFunction t = ratio_from_json(rj);
            if (t.j() != j || t.pivot() != out.pivot) throw InputError(path.string() + ": wrong alternative or pivot");
            out.omegas[j] = build_omega(t, t.domain(), a_ref[j], oo);
        }
        if (artifact_hash(fh, out.pivot, a_ref, vg) != out.hash)
            throw InputError("identification metadata is inconsistent with its ratio files (hash mismatch)");
        const auto mr = detail::read_json(dir / "mass_report.json");
        if (mr.at("hash").get<std::string>() != out.hash)
            throw InputError("mass_report.json belongs to a different identification run (hash mismatch)");

        const auto table = read_csv_file((dir / "density.csv").string());
        const std::size_t J = vg.dims();
        if (table.header.size() != J + 3 || table.rows.size() != vg.node_count())
            throw InputError("density.csv does not match the v-grid");
        DensityGrid dg;
        dg.v_grid = vg;
        dg.pivot = out.pivot;
        dg.f.resize(vg.node_count());
        dg.F.resize(vg.node_count());
        dg.support.resize(vg.node_count());
        for (std::size_t f = 0; f < vg.node_count(); ++f) {
            const auto& row = table.rows[f];
            const auto p = vg.node_point(f);
            for (std::size_t k = 0; k < J; ++k)
                if (std::abs(row[k] - p[k]) > 1e-9 * std::max(1.0, std::abs(p[k])))
                    throw InputError("density.csv row " + std::to_string(f + 2) + " is not at the expected v-node");
            dg.f[f] = row[J];
            dg.F[f] = row[J + 1];
            dg.support[f] = row[J + 2] != 0.0;
            if (dg.support[f]) dg.max_f = std::max(dg.max_f, dg.f[f]);
        }
        out.density = std::move(dg);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("identification metadata: ") + e.what());
    }
    return out;
}

} // namespace rumid
