#include "scm/panel.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace scm;
using testutil::make_covariates;
using testutil::make_design;
using testutil::make_panel;

namespace {

// Independent column-count formulas, enumerated straight from the scheme
// definitions.
Eigen::Index expected_lag_columns(LagScheme scheme, Eigen::Index t0) {
    switch (scheme) {
        case LagScheme::all_lags: return t0;
        case LagScheme::first_three_fourths: return std::max<Eigen::Index>(1, (3 * t0) / 4);
        case LagScheme::first_half: return std::max<Eigen::Index>(1, t0 / 2);
        case LagScheme::odd_lags: return (t0 + 1) / 2;
        case LagScheme::even_lags: return t0 / 2;
        case LagScheme::pretreatment_mean: return 1;
        case LagScheme::three_values: return 3;
    }
    return -1;
}

}  // namespace

TEST_SUITE("panel") {

TEST_CASE("validate accepts a well-formed share panel") {
    GeneratorSpec spec;
    spec.unit_count = 21;
    spec.period_count = 46;
    spec.t0 = 27;
    spec.noise_scale = 0.0;
    auto generated = generate_panel(spec);
    generated.panel.outcome_kind = OutcomeKind::share;  // noiseless mixtures stay in [0,1]

    auto design = make_design(generated.treated_unit, 27);
    const auto report = validate_panel(generated.panel, design, generated.covariates);
    CHECK(report.ok());
}

TEST_CASE("validate flags out-of-range share values") {
    Eigen::MatrixXd y(3, 3);
    y << 0.1, 0.2, 1.2,
         0.0, 0.5, 0.9,
         0.3, 0.3, 0.3;
    auto panel = make_panel(y, OutcomeKind::share);
    auto covs = testutil::empty_covariates(panel);
    const auto report = validate_panel(panel, make_design("A", 2), covs);
    REQUIRE_FALSE(report.ok());
    bool found = false;
    for (const auto& v : report.violations) found |= v.find("out of [0,1]") != std::string::npos;
    CHECK(found);
}

TEST_CASE("validate flags a design with no post-period") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Constant(3, 4, 0.5);
    auto panel = make_panel(y, OutcomeKind::share);
    auto covs = testutil::empty_covariates(panel);
    const auto report = validate_panel(panel, make_design("A", 4), covs);
    REQUIRE_FALSE(report.ok());
    bool found = false;
    for (const auto& v : report.violations) found |= v.find("no post-period") != std::string::npos;
    CHECK(found);
}

TEST_CASE("validate flags duplicates, missing units, and tiny donor pools") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Constant(2, 3, 0.5);
    auto panel = make_panel(y, OutcomeKind::share);
    panel.unit_ids[1] = "A";  // duplicate
    auto covs = testutil::empty_covariates(panel);
    const auto report = validate_panel(panel, make_design("Z", 1), covs);
    REQUIRE_FALSE(report.ok());
    const auto joined = [&] {
        std::string all;
        for (const auto& v : report.violations) all += v + "\n";
        return all;
    }();
    CHECK(joined.find("duplicate unit label") != std::string::npos);
    CHECK(joined.find("not in panel") != std::string::npos);

    // A two-unit panel leaves a single donor once one unit is treated.
    auto small = make_panel(Eigen::MatrixXd::Constant(2, 3, 0.5), OutcomeKind::share);
    const auto pool_report =
        validate_panel(small, make_design("A", 1), testutil::empty_covariates(small));
    REQUIRE_FALSE(pool_report.ok());
    bool found = false;
    for (const auto& v : pool_report.violations) found |= v.find("fewer than 2") != std::string::npos;
    CHECK(found);
}

TEST_CASE("predictor matrix: pretreatment mean plus 8 covariates gives 9 columns") {
    GeneratorSpec spec;
    spec.unit_count = 6;
    spec.period_count = 12;
    spec.t0 = 8;
    auto generated = generate_panel(spec);

    LagSpec lag;
    lag.scheme = LagScheme::pretreatment_mean;
    lag.include_covariates = true;
    auto pm = build_predictor_matrix(generated.panel, make_design(generated.treated_unit, 8),
                                     generated.covariates, lag);
    CHECK(pm.column_count() == 9);
    CHECK(pm.values.rows() == 6);
}

TEST_CASE("predictor matrix: all lags without covariates gives t0 columns") {
    GeneratorSpec spec;
    spec.unit_count = 5;
    spec.period_count = 40;
    spec.t0 = 27;
    auto generated = generate_panel(spec);

    LagSpec lag;
    lag.scheme = LagScheme::all_lags;
    lag.include_covariates = false;
    auto pm = build_predictor_matrix(generated.panel, make_design(generated.treated_unit, 27),
                                     generated.covariates, lag);
    CHECK(pm.column_count() == 27);
}

TEST_CASE("predictor matrix: three values picks first, middle, last") {
    // Pre-period outcomes 1..5 for one unit; expected picks enumerated by
    // hand: first=1, middle=ceil(5/2)=3rd value=3, last=5.
    Eigen::MatrixXd y(3, 6);
    y << 1, 2, 3, 4, 5, 9,
         5, 4, 3, 2, 1, 9,
         1, 1, 2, 2, 3, 9;
    auto panel = make_panel(y);
    auto covs = testutil::empty_covariates(panel);

    LagSpec lag;
    lag.scheme = LagScheme::three_values;
    lag.include_covariates = false;
    auto pm = build_predictor_matrix(panel, make_design("A", 5), covs, lag);
    REQUIRE(pm.column_count() == 3);
    CHECK(pm.values(0, 0) == 1.0);
    CHECK(pm.values(0, 1) == 3.0);
    CHECK(pm.values(0, 2) == 5.0);
    CHECK(pm.values(1, 0) == 5.0);
    CHECK(pm.values(1, 1) == 3.0);
    CHECK(pm.values(1, 2) == 1.0);
}

TEST_CASE("predictor matrix: column count is a function of t0, scheme, covariates") {
    std::mt19937_64 engine(7);
    std::uniform_int_distribution<int> t0_draw(4, 60);
    const LagScheme schemes[] = {
        LagScheme::all_lags,      LagScheme::first_three_fourths, LagScheme::first_half,
        LagScheme::odd_lags,      LagScheme::even_lags,           LagScheme::pretreatment_mean,
        LagScheme::three_values,
    };

    for (int rep = 0; rep < 25; ++rep) {
        const Eigen::Index t0 = t0_draw(engine);
        GeneratorSpec spec;
        spec.unit_count = 5;
        spec.period_count = static_cast<int>(t0) + 3;
        spec.t0 = static_cast<int>(t0);
        spec.covariate_count = 3;
        spec.seed = static_cast<std::uint64_t>(rep);
        auto generated = generate_panel(spec);
        auto design = make_design(generated.treated_unit, t0);

        for (LagScheme scheme : schemes) {
            for (bool with_covs : {false, true}) {
                LagSpec lag;
                lag.scheme = scheme;
                lag.include_covariates = with_covs;
                auto pm = build_predictor_matrix(generated.panel, design, generated.covariates, lag);
                const Eigen::Index expected =
                    expected_lag_columns(scheme, t0) + (with_covs ? 3 : 0);
                CHECK_MESSAGE(pm.column_count() == expected,
                              "scheme=" << scheme_name(scheme) << " t0=" << t0);
            }
        }
    }
}

TEST_CASE("predictor matrix: permuting units permutes rows identically") {
    GeneratorSpec spec;
    spec.unit_count = 6;
    spec.period_count = 10;
    spec.t0 = 6;
    spec.seed = 3;
    auto generated = generate_panel(spec);
    auto design = make_design(generated.treated_unit, 6);

    LagSpec lag;
    lag.scheme = LagScheme::all_lags;
    lag.include_covariates = true;
    auto pm = build_predictor_matrix(generated.panel, design, generated.covariates, lag);

    // Swap two donors everywhere and rebuild.
    Panel permuted = generated.panel;
    std::swap(permuted.unit_ids[2], permuted.unit_ids[4]);
    permuted.outcomes.row(2).swap(permuted.outcomes.row(4));
    auto pm2 = build_predictor_matrix(permuted, design, generated.covariates, lag);

    CHECK((pm.values.row(2).array() == pm2.values.row(4).array()).all());
    CHECK((pm.values.row(4).array() == pm2.values.row(2).array()).all());
    CHECK((pm.values.row(0).array() == pm2.values.row(0).array()).all());
    CHECK(pm.column_names == pm2.column_names);
}

TEST_CASE("predictor matrix: proxy panel supplies the lag columns") {
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(3, 4);  // degenerate outcome, no pre variation
    auto panel = make_panel(y);
    Eigen::MatrixXd proxy_y(3, 4);
    proxy_y << 1, 2, 3, 4,
               4, 3, 2, 1,
               2, 2, 2, 2;
    auto proxy = make_panel(proxy_y);
    auto covs = testutil::empty_covariates(panel);

    LagSpec lag;
    lag.scheme = LagScheme::all_lags;
    lag.include_covariates = false;
    lag.proxy_outcome = proxy;
    auto pm = build_predictor_matrix(panel, make_design("A", 3), covs, lag);
    REQUIRE(pm.column_count() == 3);
    CHECK(pm.values(0, 0) == 1.0);
    CHECK(pm.values(1, 2) == 2.0);

    // A proxy that lacks a unit is an error.
    proxy.unit_ids[2] = "Z";
    lag.proxy_outcome = proxy;
    CHECK_THROWS_WITH_AS(build_predictor_matrix(panel, make_design("A", 3), covs, lag),
                         doctest::Contains("proxy panel missing unit"), std::invalid_argument);
}

}  // TEST_SUITE
