#pragma once

#include "scm/estimator.hpp"
#include "scm/panel.hpp"
#include "scm/placebo.hpp"
#include "scm/solver.hpp"

#include <string>
#include <vector>

namespace scm {

/// Donors with weight above this contribute to the synthetic control and are
/// iterated by the leave-one-out analysis.
inline constexpr double kContributingWeightThreshold = 1e-6;

struct LooResult {
    std::string omitted_unit;
    UnitWeights weights;  // over the reduced pool
    GapSeries gaps;
    NestedDiagnostics diagnostics;
};

/// Re-estimates the full nested solve once per contributing donor, each time
/// with that donor excluded from the pool. A non-empty explicit_omissions
/// list overrides the contributing-donor scan (useful for probing
/// zero-weight donors). V is re-optimized on every reduced pool.
std::vector<LooResult> leave_one_out(const Panel& panel, const StudyDesign& design,
                                     const CovariateTable& covariates, const LagSpec& lagspec,
                                     const SolverSettings& settings,
                                     const std::vector<std::string>& explicit_omissions = {});

struct SpecSearchRow {
    std::string label;  // "1a".."7b"
    LagScheme scheme = LagScheme::all_lags;
    bool include_covariates = false;
    int treated_rank = 0;
    double p_value = 0.0;
    double treated_post_mspe = 0.0;
    bool flagged = false;
    std::string flag_reason;
};

/// Exactly 14 rows: the 7 lag schemes crossed with covariates off ("a") and
/// on ("b").
struct SpecSearchResult {
    std::vector<SpecSearchRow> rows;
};

/// Runs the full placebo pipeline once per specification in the 14-variant
/// grid, reusing one settings object so rows differ by specification only.
/// The base LagSpec supplies the proxy outcome panel (its scheme and
/// covariate flag are ignored).
SpecSearchResult spec_search(const Panel& panel, const StudyDesign& design,
                             const CovariateTable& covariates, const LagSpec& base,
                             const SolverSettings& settings);

}  // namespace scm
