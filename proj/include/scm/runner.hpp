#pragma once

#include "scm/panel.hpp"
#include "scm/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scm {

/// One analysis run as configured from the command line or a config file.
struct RunConfig {
    std::string panel_path;
    std::string covariates_path;
    std::string proxy_panel_path;  // empty = no proxy
    OutcomeKind outcome_kind = OutcomeKind::share;

    std::string treated_unit;
    int t0 = 0;
    std::vector<std::string> excluded_donors;

    LagScheme scheme = LagScheme::pretreatment_mean;
    bool with_covariates = true;

    SolverSettings solver;

    bool run_placebo = false;
    bool run_loo = false;
    bool run_specsearch = false;
    bool run_diff = false;

    // Second panel for the difference-in-effects analysis.
    std::string panel_b_path;
    std::string proxy_panel_b_path;
    int t0_b = 0;
    std::string origin_a;  // empty = per-unit default origin
    std::string origin_b;

    std::string out_dir = "synthctl-out";
    bool quiet = false;
};

enum ExitCode : int {
    kExitOk = 0,
    kExitValidationFailure = 1,
    kExitSolverNonConvergence = 2,
};

struct RunOutcome {
    int exit_code = kExitOk;
    std::vector<std::string> messages;       // validation violations, warnings
    std::vector<std::string> written_files;  // relative to out_dir
};

/// Loads, validates, estimates, runs the toggled analyses, and emits report
/// files into out_dir. Results are still written when a solver fails to
/// converge; the exit code reports it.
RunOutcome run_analysis(const RunConfig& config);

}  // namespace scm
