// rumid: command-line front end for simulate / check / identify / verify / convert.
//
// Exit codes: 0 pass, 1 check failed (or identify refused), 2 input error,
// 3 numerical failure, 4 inconclusive check.

#include <rumid/convert.hpp>
#include <rumid/field.hpp>
#include <rumid/field_io.hpp>
#include <rumid/model.hpp>
#include <rumid/pipeline.hpp>
#include <rumid/symmetry.hpp>
#include <rumid/verify.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace rumid;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum Exit : int { pass = 0, fail = 1, input = 2, numerical = 3, inconclusive = 4 };

// Non-finite doubles become null so the reports stay valid JSON.
json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(num(x));
    return out;
}

GridSpec grid_from_flags(const std::vector<std::string>& flags, std::size_t dims) {
    if (flags.empty()) throw InputError("--grid is required");
    std::vector<Axis> axes;
    for (const auto& f : flags) axes.push_back(parse_axis(f));
    if (axes.size() == 1) axes.assign(dims, axes[0]);
    if (axes.size() != dims)
        throw InputError("--grid given " + std::to_string(flags.size()) + " times; need 1 or " + std::to_string(dims));
    return GridSpec(std::move(axes));
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& doc) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw InputError("not a number in list: '" + item + "'");
        }
    }
    return out;
}

json shape_json(const ShapeReport& r) {
    json doc{{"pass", r.pass()}, {"monotone_ok", r.monotone_ok()}, {"cross_partial_ok", r.cross_partial_ok()}};
    doc["tolerances"] = {{"monotone", r.tolerances.monotone_tol}, {"flat", r.tolerances.flat_tol}, {"cross", r.tolerances.cross_tol}};
    for (const auto& m : r.monotone)
        doc["monotone"].push_back({{"alternative", m.alternative},
                                   {"axis", m.axis},
                                   {"ok", m.ok},
                                   {"violations", m.violations},
                                   {"flat_edges", m.flat_edges},
                                   {"worst_magnitude", num(m.worst.magnitude)},
                                   {"worst_location", vec(m.worst.location)}});
    for (const auto& b : r.boundary)
        doc["boundary"].push_back({{"alternative", b.alternative},
                                   {"min", num(b.min_value)},
                                   {"max", num(b.max_value)},
                                   {"argmin", vec(b.argmin)},
                                   {"argmax", vec(b.argmax)}});
    for (const auto& c : r.cross_partial)
        doc["cross_partial"].push_back({{"alternative", c.alternative},
                                        {"ok", c.ok},
                                        {"nodes", c.nodes_checked},
                                        {"violations", c.violations},
                                        {"min_signed", num(c.min_signed)},
                                        {"argmin", vec(c.argmin)}});
    return doc;
}

json symmetry_json(const SymmetryReport& r) {
    json doc{{"mode", r.mode == SymmetryMode::daly_zachary ? "daly_zachary" : "condition_a"},
             {"pass", r.pass},
             {"inconclusive", r.inconclusive},
             {"vacuous", r.vacuous},
             {"tolerance", r.tolerance},
             {"eps_denom", num(r.eps_denom)},
             {"max_statistic", num(r.max_statistic())},
             {"points", r.points.size()}};
    if (r.mode == SymmetryMode::condition_a) doc["pivot"] = r.pivot;
    doc["pairs"] = json::array();
    for (const auto& p : r.pairs)
        doc["pairs"].push_back({{"k", p.k},
                                {"l", p.l},
                                {"statistic", num(p.statistic)},
                                {"worst_point", vec(p.worst_point)},
                                {"points_used", p.points_used},
                                {"excluded", p.excluded},
                                {"inconclusive_families", p.inconclusive_families},
                                {"inconclusive", p.inconclusive},
                                {"pass", p.pass}});
    return doc;
}

json translation_json(const TranslationReport& r, const std::vector<double>& shifts) {
    return {{"pass", r.pass},
            {"tolerance", r.tolerance},
            {"shifts", shifts},
            {"max_difference", num(r.max_difference)},
            {"worst_point", vec(r.worst_point)},
            {"worst_shift", r.worst_shift},
            {"comparisons", r.comparisons},
            {"skipped", r.skipped}};
}

json verify_json(const VerifyReport& r, double mass) {
    return {{"method", r.method},
            {"pass", r.pass},
            {"tolerance", r.tolerance},
            {"points", r.points.size()},
            {"max_error", vec(r.max_error)},
            {"mean_error", vec(r.mean_error)},
            {"worst", num(r.worst)},
            {"max_leakage", num(r.max_leakage)},
            {"max_skipped_mass", num(r.max_skipped_mass)},
            {"density_mass", num(mass)}};
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string model, out, mode = "closed_form";
    std::vector<std::string> grid;
    std::size_t draws = 100000;
    std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateArgs& a) {
    const auto model = model_from_json(read_json_file(a.model));
    const GridSpec g = grid_from_flags(a.grid, model.alternatives());
    std::variant<ClosedForm, MonteCarlo> method = ClosedForm{};
    if (a.mode == "monte_carlo")
        method = MonteCarlo{a.draws, a.seed};
    else if (a.mode != "closed_form")
        throw InputError("--mode must be closed_form or monte_carlo");
    const auto field = tabulate(model, g, method);
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_field_csv_file(a.out, field);
    json meta{{"model", to_json(model)},
              {"grid", detail::grid_json(g)},
              {"mode", a.mode},
              {"field_hash", field_hash(field)},
              {"nodes", g.node_count()}};
    if (a.mode == "monte_carlo") meta["draws"] = a.draws, meta["seed"] = a.seed;
    write_json_file(a.out + ".meta.json", meta);
    std::cout << "wrote " << g.node_count() << " nodes to " << a.out << '\n';
    return Exit::pass;
}

struct CheckArgs {
    std::string field, out;
    std::vector<std::string> checks{"shape", "dz", "condition_a"};
    std::size_t pivot = 0;
    std::size_t points = 100;
    double tol_dz = 0.01, tol_condition_a = 5e-3, tol_cross = 1e-6, tol_monotone = 0.0, tol_translation = 5e-3;
    bool relative = false;
    std::string shifts = "0.25,0.5";
    std::uint64_t seed = 1;
};

int cmd_check(const CheckArgs& a) {
    const auto field = read_field_csv_file(a.field);
    const GridSpec& g = field.grid();
    const auto points = interior_nodes(g, a.points);
    json doc{{"field", a.field}, {"field_hash", field_hash(field)}};
    bool all_pass = true, any_inconclusive = false;
    auto line = [](const std::string& name, bool ok, const std::string& detail) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    };
    for (const auto& c : a.checks) {
        if (c == "shape") {
            ShapeTolerances tol;
            tol.monotone_tol = a.tol_monotone;
            tol.cross_tol = a.tol_cross;
            const auto r = check_shape(field, tol);
            doc["shape"] = shape_json(r);
            all_pass = all_pass && r.pass();
            line("shape", r.pass(), std::string("monotone ") + (r.monotone_ok() ? "ok" : "violated") + ", cross-partial " +
                                        (r.cross_partial_ok() ? "ok" : "violated"));
        } else if (c == "dz") {
            const auto r = test_daly_zachary(field, points, a.tol_dz);
            doc["daly_zachary"] = symmetry_json(r);
            all_pass = all_pass && r.pass;
            any_inconclusive = any_inconclusive || r.inconclusive;
            line("daly_zachary", r.pass, "max |ratio - 1| = " + format_double(r.max_statistic()));
        } else if (c == "condition_a") {
            ConditionAOptions opt;
            opt.relative = a.relative;
            const auto r = test_condition_A(field, a.pivot, points, a.tol_condition_a, opt);
            doc["condition_a"] = symmetry_json(r);
            all_pass = all_pass && r.pass;
            any_inconclusive = any_inconclusive || r.inconclusive;
            line("condition_a", r.pass, r.vacuous ? "vacuous (J = 1)" : "max spread = " + format_double(r.max_statistic()));
        } else if (c == "translation") {
            const auto shifts = parse_list(a.shifts);
            const auto r = translation_invariance_check(field, shifts, a.tol_translation,
                                                        translation_points(g, shifts, a.points, a.seed));
            doc["translation"] = translation_json(r, shifts);
            all_pass = all_pass && r.pass;
            line("translation", r.pass, "max |q(a + c) - q(a)| = " + format_double(r.max_difference));
        } else {
            throw InputError("unknown check '" + c + "' (shape, dz, condition_a, translation)");
        }
    }
    doc["pass"] = all_pass;
    doc["inconclusive"] = any_inconclusive;
    if (!a.out.empty()) write_json_file(fs::path(a.out) / "check_report.json", doc);
    if (any_inconclusive) return Exit::inconclusive;
    return all_pass ? Exit::pass : Exit::fail;
}

struct IdentifyArgs {
    std::string field, out, basis, v_grid;
    std::size_t pivot = 0;
    double a_ref = std::nan("");
    int degree = 2;
    double tol_condition_a = 0.05;
    std::size_t v_nodes = 121;
    bool force = false;
};

int cmd_identify(const IdentifyArgs& a) {
    const auto field = read_field_csv_file(a.field);
    IdentifyOptions opt;
    opt.pivot = a.pivot;
    opt.force = a.force;
    opt.degree = a.degree;
    opt.condition_a_tol = a.tol_condition_a;
    opt.v_nodes = a.v_nodes;
    if (!a.basis.empty()) opt.basis = sieve_basis_from_string(a.basis);
    if (!std::isnan(a.a_ref)) opt.a_ref = a.a_ref;
    if (!a.v_grid.empty()) opt.v_axis = parse_axis(a.v_grid);
    const auto r = identify(field, opt);
    write_identify_artifacts(r, field, a.out);
    std::cout << "condition (A): " << (r.condition_a.pass ? "pass" : r.forced ? "FAIL (forced)" : "vacuous")
              << ", max relative spread " << format_double(r.condition_a.max_statistic()) << '\n';
    for (std::size_t j = 0; j < r.omegas.size(); ++j) {
        if (!r.omegas[j]) continue;
        const auto& s = r.omegas[j]->ratio().sieve();
        std::cout << "t_" << j << r.pivot << ": " << to_string(s.basis) << " degree " << s.degree << ", residual rms "
                  << format_double(s.residual_rms) << "; omega coverage " << r.omegas[j]->coverage().covered_fraction
                  << ", monotone " << (r.validation[j].monotone_ok ? "ok" : "VIOLATED") << '\n';
    }
    std::cout << "density mass " << format_double(r.mass.mass) << " (F at top corner " << format_double(r.mass.F_top_corner)
              << "), clipped " << r.density.clipped << ", flagged " << r.density.flagged << ", masked "
              << r.density.masked << '\n';
    std::cout << "artifacts in " << a.out << " (hash " << r.hash << ")\n";
    return Exit::pass;
}

struct VerifyArgs {
    std::string field, in, out, method = "quadrature", box;
    std::size_t points = 50, draws = 100000;
    std::uint64_t seed = 1;
    double tol = std::nan("");
};

int cmd_verify(const VerifyArgs& a) {
    const auto field = read_field_csv_file(a.field);
    const auto loaded = load_identify_artifacts(a.in, field);
    const RationalizedModel model(loaded.utilities(), loaded.density);
    IntegrationMethod method = GridQuadrature{};
    double tol = 0.02;
    if (a.method == "monte_carlo") {
        method = MonteCarloDraws{a.draws, a.seed};
        tol = 0.03;
    } else if (a.method != "quadrature") {
        throw InputError("--method must be quadrature or monte_carlo");
    }
    if (!std::isnan(a.tol)) tol = a.tol;
    std::optional<std::vector<std::pair<double, double>>> box;
    if (!a.box.empty()) {
        const auto lh = parse_list(a.box);
        if (lh.size() != 2 || !(lh[0] < lh[1])) throw InputError("--box must be lo,hi");
        box.emplace(field.alternatives(), std::pair{lh[0], lh[1]});
    }
    const auto points = random_interior_points(field.grid(), a.points, a.seed, box);
    const auto rep = round_trip_report(field, rationalized_predictor(model, method), points, tol, describe(method));
    const fs::path out = a.out.empty() ? fs::path(a.in) : fs::path(a.out);
    auto doc = verify_json(rep, model.mass());
    doc["hash"] = loaded.hash;
    write_json_file(out / "verify_report.json", doc);

    std::vector<std::string> header;
    const std::size_t d = field.alternatives();
    for (std::size_t j = 0; j < d; ++j) header.push_back("a_" + std::to_string(j));
    for (std::size_t j = 0; j < d; ++j) header.push_back("q_" + std::to_string(j));
    for (std::size_t j = 0; j < d; ++j) header.push_back("q_hat_" + std::to_string(j));
    header.insert(header.end(), {"max_abs_error", "raw_sum", "skipped_mass"});
    std::vector<std::vector<double>> rows;
    for (const auto& p : rep.points) {
        std::vector<double> row = p.a;
        row.insert(row.end(), p.expected.begin(), p.expected.end());
        row.insert(row.end(), p.recovered.begin(), p.recovered.end());
        row.insert(row.end(), {p.max_abs_error, p.raw_sum, p.skipped_mass});
        rows.push_back(std::move(row));
    }
    write_csv_file((out / "verify_points.csv").string(), header, rows);

    std::cout << (rep.pass ? "PASS" : "FAIL") << " round trip (" << rep.method << "): max abs error "
              << format_double(rep.worst) << " over " << rep.points.size() << " points, tolerance " << tol
              << ", max leakage " << format_double(rep.max_leakage) << '\n';
    return rep.pass ? Exit::pass : Exit::fail;
}

struct ConvertArgs {
    std::string in, out, to = "offers";
    std::vector<std::string> grid;
};

int cmd_convert(const ConvertArgs& a) {
    const auto table = read_csv_file(a.in);
    if (a.to == "prices") {
        if (!a.grid.empty()) throw InputError("--grid applies only to --to offers");
        const auto t = offers_to_prices(table);
        write_csv_file(a.out, t.header, t.rows);
        std::cout << "wrote " << t.rows.size() << " rows to " << a.out << '\n';
        return Exit::pass;
    }
    if (a.to != "offers") throw InputError("--to must be offers or prices");
    if (a.grid.empty()) {
        const auto t = prices_to_offers(table);
        write_csv_file(a.out, t.header, t.rows);
        std::cout << "wrote " << t.rows.size() << " scattered rows to " << a.out << '\n';
        return Exit::pass;
    }
    const std::size_t d = prices_to_offers(table).header.size() / 2;
    const auto r = resample_to_offer_lattice(table, grid_from_flags(a.grid, d));
    write_field_csv_file(a.out, r.field);
    std::cout << "resampled onto " << r.field.grid().node_count() << " lattice nodes in " << a.out
              << "; estimated interpolation error " << format_double(r.error_estimate) << '\n';
    return Exit::pass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random utility rationalizability: simulate, check, identify, verify, convert"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Tabulate a choice model on a lattice");
    s->add_option("--model", sim.model, "Model JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--grid", sim.grid, "lo:hi:n[:log], once for all axes or once per axis")->required();
    s->add_option("--mode", sim.mode, "closed_form or monte_carlo");
    s->add_option("--draws", sim.draws, "Draws per node (monte_carlo)");
    s->add_option("--seed", sim.seed);
    s->add_option("--out", sim.out, "Field CSV")->required();

    CheckArgs chk;
    auto* c = app.add_subcommand("check", "Shape and symmetry checks on a field");
    c->add_option("--field", chk.field)->required()->check(CLI::ExistingFile);
    c->add_option("--checks", chk.checks, "shape, dz, condition_a, translation")->delimiter(',');
    c->add_option("--pivot", chk.pivot);
    c->add_option("--points", chk.points, "Interior sample points");
    c->add_option("--tol-dz", chk.tol_dz);
    c->add_option("--tol-condition-a", chk.tol_condition_a);
    c->add_flag("--relative", chk.relative, "Condition (A) spread relative to the ratio's size");
    c->add_option("--tol-cross", chk.tol_cross);
    c->add_option("--tol-monotone", chk.tol_monotone);
    c->add_option("--tol-translation", chk.tol_translation);
    c->add_option("--shifts", chk.shifts, "Comma-separated translation shifts");
    c->add_option("--seed", chk.seed);
    c->add_option("--out", chk.out, "Directory for check_report.json");

    IdentifyArgs id;
    auto* i = app.add_subcommand("identify", "Recover utilities and heterogeneity density");
    i->add_option("--field", id.field)->required()->check(CLI::ExistingFile);
    i->add_option("--pivot", id.pivot);
    i->add_option("--a-ref", id.a_ref);
    i->add_option("--basis", id.basis, "polynomial or log_polynomial");
    i->add_option("--degree", id.degree);
    i->add_option("--tol-condition-a", id.tol_condition_a, "Relative spread allowed by the condition (A) gate");
    i->add_option("--v-grid", id.v_grid, "lo:hi:n[:log] for every v axis");
    i->add_option("--v-nodes", id.v_nodes);
    i->add_flag("--force", id.force, "Proceed even if condition (A) fails");
    i->add_option("--out", id.out, "Artifact directory")->required();

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "Round-trip the identified model against the field");
    v->add_option("--field", ver.field)->required()->check(CLI::ExistingFile);
    v->add_option("--in", ver.in, "Identify artifact directory")->required()->check(CLI::ExistingDirectory);
    v->add_option("--method", ver.method, "quadrature or monte_carlo");
    v->add_option("--draws", ver.draws);
    v->add_option("--seed", ver.seed);
    v->add_option("--points", ver.points);
    v->add_option("--box", ver.box, "lo,hi restricting test points on every axis");
    v->add_option("--tol", ver.tol);
    v->add_option("--out", ver.out, "Report directory (default: --in)");

    ConvertArgs cv;
    auto* k = app.add_subcommand("convert", "Convert between price/income and offer coordinates");
    k->add_option("--in", cv.in)->required()->check(CLI::ExistingFile);
    k->add_option("--out", cv.out)->required();
    k->add_option("--to", cv.to, "offers or prices");
    k->add_option("--grid", cv.grid, "Resample onto this offer lattice");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? Exit::pass : Exit::input;
    }

    try {
        if (*s) return cmd_simulate(sim);
        if (*c) return cmd_check(chk);
        if (*i) return cmd_identify(id);
        if (*v) return cmd_verify(ver);
        if (*k) return cmd_convert(cv);
    } catch (const IdentifyRefused& e) {
        std::cerr << "refused: " << e.what() << '\n';
        return Exit::fail;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return Exit::input;
    } catch (const DomainError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return Exit::input;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return Exit::numerical;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return Exit::input;
    }
    return Exit::input;
}
