#include "scm/io.hpp"

#include "scm/generator.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace scm;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("scm_io_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_file(const TempDir& dir, const std::string& name, const std::string& content) {
    const std::string p = dir.file(name);
    std::ofstream out(p);
    out << content;
    return p;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("load_panel reads a well-formed long file") {
    TempDir dir;
    const auto path = write_file(dir, "panel.csv",
                                 "unit,period,value\n"
                                 "A,1,0.1\nA,2,0.2\nB,1,0.0\nB,2,0.4\n");
    const Panel panel = load_panel(path);
    CHECK(panel.unit_count() == 2);
    CHECK(panel.period_count() == 2);
    CHECK(panel.outcomes(0, 1) == 0.2);
    CHECK(panel.unit_ids[0] == "A");
}

TEST_CASE("load_panel rejects an incomplete panel") {
    TempDir dir;
    const auto path = write_file(dir, "panel.csv",
                                 "unit,period,value\n"
                                 "A,1,0.1\nA,2,0.2\nB,1,0.0\n");
    CHECK_THROWS_WITH_AS(load_panel(path), doctest::Contains("incomplete panel"),
                         std::runtime_error);
}

TEST_CASE("load_panel rejects comma decimals with a line number") {
    TempDir dir;
    const auto path = write_file(dir, "panel.csv",
                                 "unit,period,value\n"
                                 "A,1,0.1\nA,2,0,5\n");
    CHECK_THROWS_WITH_AS(load_panel(path), doctest::Contains("line 3"), std::runtime_error);
}

TEST_CASE("load_panel rejects duplicate cells with both line numbers") {
    TempDir dir;
    const auto path = write_file(dir, "panel.csv",
                                 "unit,period,value\n"
                                 "A,1,0.1\nA,1,0.2\n");
    CHECK_THROWS_WITH_AS(load_panel(path), doctest::Contains("duplicate cell"),
                         std::runtime_error);
}

TEST_CASE("load_panel rejects a wrong header and non-numeric values") {
    TempDir dir;
    const auto bad_header = write_file(dir, "h.csv", "region,week,share\nA,1,0.1\n");
    CHECK_THROWS_WITH_AS(load_panel(bad_header), doctest::Contains("expected header"),
                         std::runtime_error);
    const auto bad_value = write_file(dir, "v.csv", "unit,period,value\nA,1,abc\n");
    CHECK_THROWS_WITH_AS(load_panel(bad_value), doctest::Contains("not a finite number"),
                         std::runtime_error);
    CHECK_THROWS_AS(load_panel(dir.file("missing.csv")), std::runtime_error);
}

TEST_CASE("load_panel orders numeric periods numerically") {
    TempDir dir;
    const auto path = write_file(dir, "panel.csv",
                                 "unit,period,value\n"
                                 "A,10,0.3\nA,2,0.2\nA,1,0.1\n"
                                 "B,1,0.0\nB,2,0.1\nB,10,0.2\n");
    const Panel panel = load_panel(path);
    REQUIRE(panel.period_count() == 3);
    CHECK(panel.period_ids[0] == "1");
    CHECK(panel.period_ids[1] == "2");
    CHECK(panel.period_ids[2] == "10");  // lexicographic would put "10" before "2"
    CHECK(panel.outcomes(0, 2) == 0.3);
}

TEST_CASE("load_covariates assembles the unit-by-predictor table") {
    TempDir dir;
    const auto path = write_file(dir, "covs.csv",
                                 "unit,predictor,value\n"
                                 "A,x1,1.5\nA,x2,2.5\nB,x1,0.5\nB,x2,0.25\n");
    const CovariateTable covs = load_covariates(path);
    CHECK(covs.unit_ids.size() == 2);
    CHECK(covs.predictor_names.size() == 2);
    CHECK(covs.values(1, 1) == 0.25);

    const auto missing = write_file(dir, "covs2.csv",
                                    "unit,predictor,value\n"
                                    "A,x1,1.5\nA,x2,2.5\nB,x1,0.5\n");
    CHECK_THROWS_WITH_AS(load_covariates(missing), doctest::Contains("incomplete table"),
                         std::runtime_error);
}

TEST_CASE("gaps round-trip bit-exactly through gaps.csv") {
    GeneratorSpec spec;
    spec.unit_count = 6;
    spec.period_count = 12;
    spec.t0 = 7;
    spec.noise_scale = 0.0137;  // values with long decimal expansions
    spec.seed = 17;
    auto generated = generate_panel(spec);

    StudyDesign design = testutil::make_design(generated.treated_unit, 7);
    UnitWeights w{generated.truth.donor_ids,
                  Eigen::VectorXd::Constant(5, 0.2)};
    const GapSeries gaps = synthesize(generated.panel, design, w);

    TempDir dir;
    const auto path = dir.file("gaps.csv");
    write_gaps_csv(path, gaps);
    const GapSeries loaded = load_gaps(path);

    REQUIRE(loaded.period_ids == gaps.period_ids);
    CHECK(loaded.t0 == gaps.t0);
    CHECK((loaded.actual.array() == gaps.actual.array()).all());
    CHECK((loaded.synthetic.array() == gaps.synthetic.array()).all());
    CHECK((loaded.gaps.array() == gaps.gaps.array()).all());
}

TEST_CASE("every report file starts with a header row") {
    TempDir dir;

    UnitWeights w{{"B", "C"}, testutil::vec({0.25, 0.75})};
    PredictorWeights v{testutil::vec({0.5, 0.5})};
    write_weights_csv(dir.file("weights.csv"), w, v, {"x1", "lag_mean"});
    CHECK(read_file(dir.file("weights.csv")).rfind("role,name,weight\n", 0) == 0);

    GapSeries gaps;
    gaps.period_ids = {"1", "2"};
    gaps.actual = testutil::vec({1.0, 2.0});
    gaps.synthetic = testutil::vec({0.5, 0.5});
    gaps.gaps = gaps.actual - gaps.synthetic;
    gaps.t0 = 1;
    write_gaps_csv(dir.file("gaps.csv"), gaps);
    CHECK(read_file(dir.file("gaps.csv")).rfind("period,actual,synthetic,gap,window\n", 0) == 0);

    PlaceboTable table;
    table.treated_unit = "B";
    PlaceboRow row;
    row.unit = "B";
    row.pre_mspe = 0.1;
    row.post_mspe = 0.7;
    row.gaps = gaps;
    table.rows = {row};
    write_placebo_csv(dir.file("placebo.csv"), rank_by_post_mspe(table));
    CHECK(read_file(dir.file("placebo.csv"))
              .rfind("unit,pre_mspe,post_mspe,post_pre_ratio,rank,p_value,flag\n", 0) == 0);

    write_diff_csv(dir.file("diff.csv"), DiffEffects{{0, 1}, testutil::vec({0.1, 0.2}), "1", "1"});
    CHECK(read_file(dir.file("diff.csv")).rfind("event_week,diff\n", 0) == 0);
}

TEST_CASE("format_double round-trips extreme values") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.123456789, -0.0, 5e17}) {
        const std::string s = format_double(x);
        const double back = std::strtod(s.c_str(), nullptr);
        CHECK(back == x);
    }
}

TEST_CASE("generator is deterministic and honors planted structure") {
    GeneratorSpec spec;
    spec.unit_count = 9;
    spec.period_count = 15;
    spec.t0 = 8;
    spec.noise_scale = 0.02;
    spec.planted_weights = testutil::vec({0.5, 0.5});
    spec.planted_effect = testutil::vec({0.1});
    spec.seed = 4242;

    const auto a = generate_panel(spec);
    const auto b = generate_panel(spec);
    CHECK((a.panel.outcomes.array() == b.panel.outcomes.array()).all());
    CHECK((a.covariates.values.array() == b.covariates.values.array()).all());

    // Treated pre-series equals the planted average of donors 1-2 exactly.
    for (Eigen::Index t = 0; t < 8; ++t) {
        const double combo = 0.5 * a.panel.outcomes(1, t) + 0.5 * a.panel.outcomes(2, t);
        CHECK(a.panel.outcomes(0, t) == combo);
    }
    // True gap: zero pre, 0.1 post.
    for (Eigen::Index t = 0; t < 15; ++t) {
        CHECK(a.truth.true_gap(t) == (t < 8 ? 0.0 : 0.1));
        if (t >= 8) {
            const double combo = 0.5 * a.panel.outcomes(1, t) + 0.5 * a.panel.outcomes(2, t);
            CHECK(a.panel.outcomes(0, t) == doctest::Approx(combo + 0.1).epsilon(1e-15));
        }
    }
}

TEST_CASE("generator validates the planted weights") {
    GeneratorSpec spec;
    spec.unit_count = 5;
    spec.period_count = 10;
    spec.t0 = 5;
    spec.planted_weights = testutil::vec({0.5, 0.2});  // sums to 0.7
    CHECK_THROWS_AS(generate_panel(spec), std::invalid_argument);
    spec.planted_weights = testutil::vec({0.5, 0.5, 0.0, 0.0, 0.0});  // longer than donor pool
    CHECK_THROWS_AS(generate_panel(spec), std::invalid_argument);
}

}  // TEST_SUITE
