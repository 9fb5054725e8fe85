#include "scm/generator.hpp"
#include "scm/io.hpp"
#include "scm/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

constexpr const char* kSchemeNames =
    "all_lags, first_three_fourths, first_half, odd_lags, even_lags, pretreatment_mean, "
    "three_values";

void add_common_options(CLI::App* cmd, scm::RunConfig& config, std::string& scheme,
                        std::string& outcome_kind) {
    cmd->add_option("--panel", config.panel_path, "Panel CSV (unit,period,value)")->required();
    cmd->add_option("--covariates", config.covariates_path, "Covariate CSV (unit,predictor,value)");
    cmd->add_option("--treated", config.treated_unit, "Treated unit label")->required();
    cmd->add_option("--t0", config.t0, "Number of pre-treatment periods")->required();
    cmd->add_option("--scheme", scheme, std::string("Lag scheme: ") + kSchemeNames);
    cmd->add_flag("--with-covariates,!--no-covariates", config.with_covariates,
                  "Include covariate columns in the match (default on)");
    cmd->add_option("--proxy-panel", config.proxy_panel_path,
                    "Alternative panel whose series form the lag predictors");
    cmd->add_option("--exclude", config.excluded_donors, "Units barred from the donor pool");
    cmd->add_option("--outcome-kind", outcome_kind, "share (values in [0,1]) or real");
    cmd->add_option("--seed", config.solver.rng_seed, "RNG seed for the outer multistart");
    cmd->add_option("--multistart", config.solver.multistart_count, "Outer search starts");
    cmd->add_option("--outer-evals", config.solver.outer_max_evaluations,
                    "Outer evaluations per start");
    cmd->add_option("--inner-tol", config.solver.inner_tolerance, "Inner stationarity tolerance");
    cmd->add_option("--out", config.out_dir, "Output directory")
        ->envname("SYNTHCTL_OUT")
        ->capture_default_str();
    cmd->add_flag("--quiet", config.quiet, "Suppress the console summary");
}

int finish_config(scm::RunConfig& config, const std::string& scheme,
                  const std::string& outcome_kind) {
    if (!scheme.empty()) {
        auto parsed = scm::parse_scheme(scheme);
        if (!parsed) {
            std::fprintf(stderr, "unknown scheme '%s' (expected one of: %s)\n", scheme.c_str(),
                         kSchemeNames);
            return 1;
        }
        config.scheme = *parsed;
    }
    if (outcome_kind == "real") {
        config.outcome_kind = scm::OutcomeKind::real;
    } else if (outcome_kind != "share") {
        std::fprintf(stderr, "unknown outcome kind '%s' (expected share or real)\n",
                     outcome_kind.c_str());
        return 1;
    }
    return 0;
}

int run_and_report(const scm::RunConfig& config) {
    try {
        const scm::RunOutcome outcome = scm::run_analysis(config);
        for (const auto& msg : outcome.messages) std::fprintf(stderr, "%s\n", msg.c_str());
        return outcome.exit_code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

int run_generate(int units, int periods, int t0, int factors, double noise, int covariates,
                 const std::vector<double>& planted, double effect, bool has_effect,
                 std::uint64_t seed, const std::string& out_dir) {
    try {
        scm::GeneratorSpec spec;
        spec.unit_count = units;
        spec.period_count = periods;
        spec.t0 = t0;
        spec.factor_count = factors;
        spec.noise_scale = noise;
        spec.covariate_count = covariates;
        spec.seed = seed;
        if (!planted.empty()) {
            Eigen::VectorXd w(static_cast<Eigen::Index>(planted.size()));
            for (size_t i = 0; i < planted.size(); ++i) w(static_cast<Eigen::Index>(i)) = planted[i];
            spec.planted_weights = w;
        }
        if (has_effect) {
            spec.planted_effect = Eigen::VectorXd::Constant(1, effect);
        }

        const scm::GeneratedPanel generated = scm::generate_panel(spec);

        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        {
            std::ofstream out(fs::path(out_dir) / "panel.csv");
            out << "unit,period,value\n";
            for (size_t j = 0; j < generated.panel.unit_ids.size(); ++j) {
                for (size_t t = 0; t < generated.panel.period_ids.size(); ++t) {
                    out << generated.panel.unit_ids[j] << "," << generated.panel.period_ids[t] << ","
                        << scm::format_double(generated.panel.outcomes(
                               static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)))
                        << "\n";
                }
            }
        }
        {
            std::ofstream out(fs::path(out_dir) / "covariates.csv");
            out << "unit,predictor,value\n";
            for (size_t j = 0; j < generated.covariates.unit_ids.size(); ++j) {
                for (size_t k = 0; k < generated.covariates.predictor_names.size(); ++k) {
                    out << generated.covariates.unit_ids[j] << ","
                        << generated.covariates.predictor_names[k] << ","
                        << scm::format_double(generated.covariates.values(
                               static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)))
                        << "\n";
                }
            }
        }
        {
            nlohmann::json truth;
            truth["treated_unit"] = generated.treated_unit;
            truth["donor_ids"] = generated.truth.donor_ids;
            if (generated.truth.planted_weights) {
                std::vector<double> w(generated.truth.planted_weights->data(),
                                      generated.truth.planted_weights->data() +
                                          generated.truth.planted_weights->size());
                truth["planted_weights"] = w;
            }
            std::vector<double> gap(generated.truth.true_gap.data(),
                                    generated.truth.true_gap.data() +
                                        generated.truth.true_gap.size());
            truth["true_gap"] = gap;
            std::ofstream out(fs::path(out_dir) / "truth.json");
            out << truth.dump(2) << "\n";
        }
        std::printf("wrote panel.csv, covariates.csv, truth.json to %s\n", out_dir.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthctl - synthetic control estimation and inference on panel data"};
    app.require_subcommand(1);
    app.set_config("--config");

    scm::RunConfig config;
    std::string scheme;
    std::string outcome_kind = "share";

    auto* estimate = app.add_subcommand("estimate", "Fit weights and the counterfactual gap series");
    add_common_options(estimate, config, scheme, outcome_kind);

    auto* placebo = app.add_subcommand("placebo", "Estimate plus in-space placebo inference");
    add_common_options(placebo, config, scheme, outcome_kind);

    auto* loo = app.add_subcommand("loo", "Estimate plus leave-one-donor-out re-estimation");
    add_common_options(loo, config, scheme, outcome_kind);

    auto* specsearch =
        app.add_subcommand("specsearch", "Estimate plus the 14-specification search");
    add_common_options(specsearch, config, scheme, outcome_kind);

    auto* diff = app.add_subcommand("diff", "Difference-in-effects across two outcome panels");
    add_common_options(diff, config, scheme, outcome_kind);
    diff->add_option("--panel-b", config.panel_b_path, "Second outcome panel CSV")->required();
    diff->add_option("--proxy-panel-b", config.proxy_panel_b_path,
                     "Proxy panel for the second group's lag predictors");
    diff->add_option("--t0-b", config.t0_b, "Pre-period count for the second panel");
    diff->add_option("--origin-a", config.origin_a,
                     "Fixed event-time origin period for the first group");
    diff->add_option("--origin-b", config.origin_b,
                     "Fixed event-time origin period for the second group");

    auto* generate = app.add_subcommand("generate", "Write a seeded synthetic panel for testing");
    int g_units = 21, g_periods = 46, g_t0 = 27, g_factors = 4, g_covariates = 8;
    double g_noise = 0.01, g_effect = 0.0;
    std::uint64_t g_seed = 0;
    std::vector<double> g_planted;
    std::string g_out = "synthctl-data";
    generate->add_option("--units", g_units, "Unit count (treated plus donors)");
    generate->add_option("--periods", g_periods, "Period count");
    generate->add_option("--t0", g_t0, "Pre-treatment period count");
    generate->add_option("--factors", g_factors, "Latent factor count");
    generate->add_option("--noise", g_noise, "Noise scale");
    generate->add_option("--covariate-count", g_covariates, "Covariate count");
    generate->add_option("--planted-weights", g_planted,
                         "Treated unit becomes this convex combination of the leading donors");
    auto* effect_opt =
        generate->add_option("--effect", g_effect, "Constant effect added to treated post periods");
    generate->add_option("--seed", g_seed, "Generator seed");
    generate->add_option("--out", g_out, "Output directory")->envname("SYNTHCTL_OUT");

    CLI11_PARSE(app, argc, argv);

    if (generate->parsed()) {
        return run_generate(g_units, g_periods, g_t0, g_factors, g_noise, g_covariates, g_planted,
                            g_effect, effect_opt->count() > 0, g_seed, g_out);
    }

    if (int rc = finish_config(config, scheme, outcome_kind); rc != 0) return rc;
    config.run_placebo = placebo->parsed();
    config.run_loo = loo->parsed();
    config.run_specsearch = specsearch->parsed();
    config.run_diff = diff->parsed();
    return run_and_report(config);
}
