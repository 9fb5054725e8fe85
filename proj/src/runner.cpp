#include "scm/runner.hpp"

#include "scm/estimator.hpp"
#include "scm/io.hpp"
#include "scm/placebo.hpp"
#include "scm/robustness.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace scm {

namespace {

using nlohmann::json;

json diagnostics_to_json(const NestedDiagnostics& d) {
    return json{
        {"predictor_objective", d.predictor_objective},
        {"outcome_pre_mspe", d.outcome_mspe},
        {"outer_evaluations", d.outer_evaluations},
        {"starts_run", d.starts_run},
        {"best_start", d.best_start},
        {"inner_all_converged", d.inner_all_converged},
        {"outer_stagnated", d.outer_stagnated},
    };
}

json config_to_json(const RunConfig& c) {
    return json{
        {"panel", c.panel_path},
        {"covariates", c.covariates_path},
        {"proxy_panel", c.proxy_panel_path},
        {"outcome_kind", c.outcome_kind == OutcomeKind::share ? "share" : "real"},
        {"treated", c.treated_unit},
        {"t0", c.t0},
        {"excluded", c.excluded_donors},
        {"scheme", scheme_name(c.scheme)},
        {"with_covariates", c.with_covariates},
        {"placebo", c.run_placebo},
        {"loo", c.run_loo},
        {"specsearch", c.run_specsearch},
        {"diff", c.run_diff},
        {"panel_b", c.panel_b_path},
        {"proxy_panel_b", c.proxy_panel_b_path},
        {"t0_b", c.t0_b},
        {"origin_a", c.origin_a},
        {"origin_b", c.origin_b},
        {"out_dir", c.out_dir},
        {"solver",
         {
             {"inner_tolerance", c.solver.inner_tolerance},
             {"inner_max_iterations", c.solver.inner_max_iterations},
             {"outer_tolerance", c.solver.outer_tolerance},
             {"outer_max_evaluations", c.solver.outer_max_evaluations},
             {"multistart_count", c.solver.multistart_count},
             {"rng_seed", c.solver.rng_seed},
         }},
    };
}

bool table_has_flags(const PlaceboTable& table) {
    for (const auto& row : table.rows) {
        if (row.flagged) return true;
    }
    return false;
}

}  // namespace

RunOutcome run_analysis(const RunConfig& config) {
    RunOutcome outcome;
    namespace fs = std::filesystem;

    if (config.with_covariates && config.covariates_path.empty()) {
        outcome.messages.push_back("covariates file required when matching on covariates");
        outcome.exit_code = kExitValidationFailure;
        return outcome;
    }

    Panel panel = load_panel(config.panel_path, config.outcome_kind);
    CovariateTable covariates;
    if (!config.covariates_path.empty()) {
        covariates = load_covariates(config.covariates_path);
    } else {
        covariates.unit_ids = panel.unit_ids;
        covariates.values.resize(panel.unit_count(), 0);
    }

    StudyDesign design;
    design.treated_unit = config.treated_unit;
    design.t0 = config.t0;
    design.excluded_donors = config.excluded_donors;

    const ValidationReport report = validate_panel(panel, design, covariates);
    if (!report.ok()) {
        for (const auto& v : report.violations) outcome.messages.push_back("validation: " + v);
        outcome.exit_code = kExitValidationFailure;
        return outcome;
    }

    LagSpec lagspec;
    lagspec.scheme = config.scheme;
    lagspec.include_covariates = config.with_covariates;
    if (!config.proxy_panel_path.empty()) {
        lagspec.proxy_outcome = load_panel(config.proxy_panel_path, config.outcome_kind);
    }

    fs::create_directories(config.out_dir);
    auto out_path = [&](const std::string& name) { return (fs::path(config.out_dir) / name).string(); };
    auto record = [&](const std::string& name) { outcome.written_files.push_back(name); };

    const PredictorMatrix pm = build_predictor_matrix(panel, design, covariates, lagspec);
    const NestedSolution main_solution = solve_nested(panel, design, pm, config.solver);
    const GapSeries gaps = synthesize(panel, design, main_solution.unit_weights);

    bool solver_trouble = !main_solution.diagnostics.inner_all_converged ||
                          main_solution.diagnostics.outer_stagnated;

    write_weights_csv(out_path("weights.csv"), main_solution.unit_weights,
                      main_solution.predictor_weights, pm.column_names);
    record("weights.csv");
    write_gaps_csv(out_path("gaps.csv"), gaps);
    record("gaps.csv");

    json metadata;
    metadata["config"] = config_to_json(config);
    metadata["main"] = diagnostics_to_json(main_solution.diagnostics);
    metadata["loo_reoptimizes_v"] = true;  // the reduced-pool solves re-run the full nested search

    if (config.run_placebo) {
        const PlaceboTable table = placebo_in_space(panel, design, covariates, lagspec, config.solver);
        write_placebo_csv(out_path("placebo.csv"), table);
        record("placebo.csv");
        metadata["placebo"] = {{"treated_rank", table.treated_rank},
                               {"p_value", table.p_value},
                               {"rows", table.rows.size()}};
        solver_trouble |= table_has_flags(table);
    }

    if (config.run_loo) {
        const auto loo = leave_one_out(panel, design, covariates, lagspec, config.solver);
        write_loo_csv(out_path("loo.csv"), loo);
        record("loo.csv");
        json entries = json::array();
        for (const auto& r : loo) {
            entries.push_back({{"omitted", r.omitted_unit},
                               {"pre_mspe", mspe(r.gaps, Window::pre)},
                               {"post_mspe", mspe(r.gaps, Window::post)}});
            solver_trouble |= !r.diagnostics.inner_all_converged || r.diagnostics.outer_stagnated;
        }
        metadata["loo"] = entries;
    }

    if (config.run_specsearch) {
        const SpecSearchResult search =
            spec_search(panel, design, covariates, lagspec, config.solver);
        write_specsearch_csv(out_path("specsearch.csv"), search);
        record("specsearch.csv");
        json entries = json::array();
        for (const auto& row : search.rows) {
            entries.push_back({{"specification", row.label}, {"p_value", row.p_value}});
            solver_trouble |= row.flagged;
        }
        metadata["specsearch"] = entries;
    }

    if (config.run_diff) {
        if (config.panel_b_path.empty()) {
            outcome.messages.push_back("diff analysis requires a second panel");
            outcome.exit_code = kExitValidationFailure;
            return outcome;
        }
        Panel panel_b = load_panel(config.panel_b_path, config.outcome_kind);
        StudyDesign design_b = design;
        design_b.t0 = config.t0_b > 0 ? config.t0_b : config.t0;
        LagSpec lag_b;
        lag_b.scheme = config.scheme;
        lag_b.include_covariates = config.with_covariates;
        if (!config.proxy_panel_b_path.empty()) {
            lag_b.proxy_outcome = load_panel(config.proxy_panel_b_path, config.outcome_kind);
        }
        DiffPlaceboOptions options;
        if (!config.origin_a.empty()) options.origin_a = config.origin_a;
        if (!config.origin_b.empty()) options.origin_b = config.origin_b;

        const PlaceboTable table = diff_in_effects_placebo(
            panel, design, covariates, lagspec, panel_b, design_b, lag_b, config.solver, options);
        write_placebo_csv(out_path("diff_placebo.csv"), table);
        record("diff_placebo.csv");
        for (const auto& row : table.rows) {
            if (row.unit != design.treated_unit || row.flagged) continue;
            DiffEffects diff;
            for (size_t i = 0; i < row.gaps.period_ids.size(); ++i) {
                diff.event_weeks.push_back(std::stol(row.gaps.period_ids[i]));
            }
            diff.diffs = row.gaps.gaps;
            write_diff_csv(out_path("diff.csv"), diff);
            record("diff.csv");
        }
        metadata["diff"] = {{"treated_rank", table.treated_rank}, {"p_value", table.p_value}};
        solver_trouble |= table_has_flags(table);
    }

    if (solver_trouble) {
        outcome.messages.push_back("solver non-convergence or flagged rows; see run_metadata.json");
        outcome.exit_code = kExitSolverNonConvergence;
    }
    metadata["exit_code"] = outcome.exit_code;

    {
        std::ofstream meta(out_path("run_metadata.json"));
        if (!meta) throw std::runtime_error("cannot write file: " + out_path("run_metadata.json"));
        meta << metadata.dump(2) << "\n";
        record("run_metadata.json");
    }

    if (!config.quiet) {
        const Eigen::Index last = gaps.period_count() - 1;
        std::printf("treated unit:    %s\n", design.treated_unit.c_str());
        std::printf("final period %s: actual %.4f, synthetic %.4f, gap %+.4f (%+.1f pp)\n",
                    gaps.period_ids.back().c_str(), gaps.actual(last), gaps.synthetic(last),
                    gaps.gaps(last), 100.0 * gaps.gaps(last));
        std::printf("pre-period MSPE: %.3e\n", mspe(gaps, Window::pre));
        std::printf("active donors:  ");
        for (size_t i = 0; i < main_solution.unit_weights.donor_ids.size(); ++i) {
            const double w = main_solution.unit_weights.weights(static_cast<Eigen::Index>(i));
            if (w > kContributingWeightThreshold) {
                std::printf(" %s=%.3f", main_solution.unit_weights.donor_ids[i].c_str(), w);
            }
        }
        std::printf("\n");
    }

    return outcome;
}

}  // namespace scm
