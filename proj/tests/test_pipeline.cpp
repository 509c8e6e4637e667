#include "fixtures.hpp"

#include <rumid/model.hpp>
#include <rumid/pipeline.hpp>

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>

using namespace rumid;
namespace fs = std::filesystem;

namespace {

const ProbabilityField& wide_log_field() {
    static const ProbabilityField f =
        tabulate(rumid::testing::m_log(1e-4, 1e4), GridSpec::uniform(3, 1e-3, 1e3, 81, AxisScale::log), ClosedForm{});
    return f;
}

const IdentifyResult& wide_log() {
    static const IdentifyResult r = identify(wide_log_field());
    return r;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("rumid_pipeline_" + name);
    fs::remove_all(p);
    return p;
}

} // namespace

TEST(Hash, DeterministicAndSensitive) {
    const GridSpec g = GridSpec::uniform(3, 1.0, 4.0, 9);
    const auto a = tabulate(rumid::testing::m_log(), g, ClosedForm{});
    const auto b = tabulate(rumid::testing::m_log(), g, ClosedForm{});
    EXPECT_EQ(field_hash(a), field_hash(b));
    EXPECT_EQ(field_hash(a).size(), 16u);
    const auto c = tabulate(rumid::testing::m_lin(), g, ClosedForm{});
    EXPECT_NE(field_hash(a), field_hash(c));
    const GridSpec vg = GridSpec::uniform(2, 0.1, 10, 5, AxisScale::log);
    const auto h = field_hash(a);
    EXPECT_NE(artifact_hash(h, 0, {NAN, 1.0, 1.0}, vg), artifact_hash(h, 0, {NAN, 2.0, 1.0}, vg));
    EXPECT_NE(artifact_hash(h, 0, {NAN, 1.0, 1.0}, vg), artifact_hash(h, 1, {1.0, NAN, 1.0}, vg));
    // Published FNV-1a test vector.
    EXPECT_EQ(Fnv1a().bytes("a", 1).value(), 0xaf63dc4c8601ec8cULL);
}

TEST(Identify, LinearModelHasUnitSlopeCharacteristics) {
    const GridSpec g = GridSpec::uniform(3, -1.0, 1.0, 41);
    const auto field = tabulate(rumid::testing::m_lin(), g, ClosedForm{});
    const auto r = identify(field);
    EXPECT_TRUE(r.condition_a.pass);
    for (std::size_t j = 1; j < 3; ++j) {
        ASSERT_TRUE(r.omegas[j]);
        const auto& s = r.omegas[j]->ratio().sieve();
        EXPECT_EQ(s.basis, SieveBasis::polynomial);
        EXPECT_NEAR(s.coefficients[0], 1.0, 1e-3);
        const double a_ref = r.a_ref[j];
        EXPECT_NEAR(a_ref, 0.0, 1e-12);
        for (double aj : {-0.8, 0.0, 0.5})
            for (double a0 : {-0.5, 0.2, 0.9}) {
                const auto w = r.omegas[j]->try_eval(aj, a0);
                if (w) {
                    EXPECT_NEAR(*w, a0 - aj + a_ref, 5e-3) << aj << ' ' << a0;
                }
            }
    }
}

TEST(Identify, RefusesConditionAFailureUnlessForced) {
    const GridSpec g = GridSpec::uniform(3, -1.0, 1.0, 21);
    const auto field = ProbabilityField::from_function(g, [](std::span<const double> a) { return rumid::testing::planted_interaction(a); });
    try {
        identify(field);
        FAIL() << "expected IdentifyRefused";
    } catch (const IdentifyRefused& e) {
        EXPECT_NE(std::string(e.what()).find("check"), std::string::npos);
    }
    IdentifyOptions opt;
    opt.force = true;
    opt.v_nodes = 21;
    const auto r = identify(field, opt);
    EXPECT_TRUE(r.forced);
    EXPECT_FALSE(r.condition_a.pass);
}

TEST(Identify, LogModelDensityIsNormalized) {
    const auto& r = wide_log();
    EXPECT_TRUE(r.condition_a.pass);
    EXPECT_GE(r.mass.mass, 0.97);
    EXPECT_LE(r.mass.mass, 1.01);
    EXPECT_EQ(r.density.flagged, 0u);
    for (std::size_t j = 1; j < 3; ++j) {
        EXPECT_TRUE(r.validation[j].monotone_ok);
        EXPECT_EQ(r.omegas[j]->ratio().sieve().basis, SieveBasis::log_polynomial);
        EXPECT_NEAR(r.a_ref[j], 1.0, 1e-12);
    }
    const RationalizedModel rm(r.utilities(), r.density);
    const std::array<double, 3> a{2.0, 1.0, 4.0};
    const auto q = rm(a, GridQuadrature{});
    EXPECT_NEAR(q.q[0], 0.4, 0.02);
    EXPECT_NEAR(q.q[1], 0.2, 0.02);
    EXPECT_NEAR(q.q[2], 0.4, 0.02);
}

TEST(Artifacts, WriteAndReload) {
    const auto dir = scratch("reload");
    write_identify_artifacts(wide_log(), wide_log_field(), dir);
    for (const char* name : {"ratio_1.json", "ratio_2.json", "omega_1.csv", "omega_2.csv", "w_1.csv", "w_2.csv",
                             "density.csv", "mass_report.json", "identify_meta.json"})
        EXPECT_TRUE(fs::exists(dir / name)) << name;
    const auto w1 = read_csv_file((dir / "w_1.csv").string());
    EXPECT_EQ(w1.header, (std::vector<std::string>{"a_1", "v_1", "w"}));

    const auto loaded = load_identify_artifacts(dir, wide_log_field());
    EXPECT_EQ(loaded.hash, wide_log().hash);
    const RationalizedModel fresh(wide_log().utilities(), wide_log().density);
    const RationalizedModel reloaded(loaded.utilities(), loaded.density);
    EXPECT_NEAR(reloaded.mass(), fresh.mass(), 1e-12);
    const std::array<double, 3> a{1.5, 2.5, 3.0};
    EXPECT_LE(reloaded(a, GridQuadrature{}).q.max_abs_diff(fresh(a, GridQuadrature{}).q), 1e-12);
    fs::remove_all(dir);
}

TEST(Artifacts, MixedRunsAreRefused) {
    const auto a = scratch("run_a");
    const auto b = scratch("run_b");
    write_identify_artifacts(wide_log(), wide_log_field(), a);
    IdentifyOptions opt;
    opt.a_ref = 2.0;
    write_identify_artifacts(identify(wide_log_field(), opt), wide_log_field(), b);
    fs::copy_file(b / "ratio_1.json", a / "ratio_1.json", fs::copy_options::overwrite_existing);
    try {
        load_identify_artifacts(a, wide_log_field());
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("hash"), std::string::npos) << e.what();
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Artifacts, DifferentFieldIsRefused) {
    const auto dir = scratch("other_field");
    write_identify_artifacts(wide_log(), wide_log_field(), dir);
    const auto other = tabulate(rumid::testing::m_log(1e-4, 1e4), GridSpec::uniform(3, 1e-3, 1e3, 81, AxisScale::linear), ClosedForm{});
    EXPECT_THROW(load_identify_artifacts(dir, other), InputError);
    EXPECT_THROW(load_identify_artifacts(scratch("missing"), wide_log_field()), InputError);
    fs::remove_all(dir);
}
