#pragma once

#include "scm/estimator.hpp"
#include "scm/panel.hpp"
#include "scm/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scm {

struct PlaceboRow {
    std::string unit;
    double pre_mspe = 0.0;
    double post_mspe = 0.0;
    double ratio = 0.0;
    bool ratio_defined = true;
    GapSeries gaps;
    int rank = 0;          // 1-based after ranking; 0 while unranked or flagged
    double p_value = 0.0;  // rank / ranked-row count
    bool flagged = false;  // per-unit solve failed; excluded from ranking
    std::string flag_reason;
};

/// One row per eligible unit (the truly treated included). p-values are
/// rank/(J+1) once ranked.
struct PlaceboTable {
    std::vector<PlaceboRow> rows;
    std::string treated_unit;
    int treated_rank = 0;
    double p_value = 0.0;
};

/// Re-runs the full nested pipeline once per unit, casting each in turn as
/// pseudo-treated with all other units as its donor pool, then ranks by
/// post-period MSPE. Per-unit estimations run in parallel; the assembled
/// table does not depend on scheduling.
PlaceboTable placebo_in_space(const Panel& panel, const StudyDesign& design,
                              const CovariateTable& covariates, const LagSpec& lagspec,
                              const SolverSettings& settings);

/// Sorts rows by post-period MSPE descending (ties broken by unit label),
/// fills rank and p-value fields, and records the treated unit's rank.
/// Flagged rows keep their position in the table but receive no rank.
PlaceboTable rank_by_post_mspe(PlaceboTable table);

/// Two gap series re-indexed to event time (periods relative to each
/// group's own origin) and differenced on the overlap.
struct DiffEffects {
    std::vector<long> event_weeks;
    Eigen::VectorXd diffs;  // group A minus group B, aligned on event time
    std::string origin_a;
    std::string origin_b;
};

DiffEffects diff_in_effects(const GapSeries& gaps_a, const GapSeries& gaps_b,
                            const std::string& origin_a, const std::string& origin_b);

struct DiffPlaceboOptions {
    // Fixed alignment origins. When unset, each unit's origin defaults to its
    // first period with a strictly positive outcome in that group's panel.
    std::optional<std::string> origin_a;
    std::optional<std::string> origin_b;
};

/// Difference-in-effects across two outcome panels with placebo ranking:
/// every eligible unit is run as pseudo-treated in both panels, the two gap
/// series are differenced on event time, and units are ranked by the
/// post-window MSPE of the differenced series. The post window starts at the
/// later of the two groups' post-period starts in event time; the pre window
/// ends at the earlier one.
PlaceboTable diff_in_effects_placebo(const Panel& panel_a, const StudyDesign& design_a,
                                     const CovariateTable& covariates, const LagSpec& lag_a,
                                     const Panel& panel_b, const StudyDesign& design_b,
                                     const LagSpec& lag_b, const SolverSettings& settings,
                                     const DiffPlaceboOptions& options = {});

struct PairedCi {
    double mean_diff = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Mean of pairwise differences with a two-sided Student-t interval on the
/// paired differences.
PairedCi paired_difference_ci(const Eigen::VectorXd& treated_values,
                              const Eigen::VectorXd& neighbor_values, double level);

}  // namespace scm
