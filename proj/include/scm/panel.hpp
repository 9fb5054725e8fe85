#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace scm {

enum class OutcomeKind { share, real };

/// Balanced unit-by-period outcome matrix. Suppressed source cells are
/// expected to arrive as literal zeros, not as missing values; the matrix
/// is always complete.
struct Panel {
    std::vector<std::string> unit_ids;    // J+1 units, treated among them
    std::vector<std::string> period_ids;  // T periods in time order
    Eigen::MatrixXd outcomes;             // unit x period
    OutcomeKind outcome_kind = OutcomeKind::share;

    Eigen::Index unit_count() const { return static_cast<Eigen::Index>(unit_ids.size()); }
    Eigen::Index period_count() const { return static_cast<Eigen::Index>(period_ids.size()); }
    std::optional<Eigen::Index> unit_index(const std::string& id) const;
    std::optional<Eigen::Index> period_index(const std::string& id) const;
};

/// Which unit is treated, how many leading periods are pre-treatment, and
/// which units are barred from the donor pool.
struct StudyDesign {
    std::string treated_unit;
    Eigen::Index t0 = 0;  // number of pre-treatment periods
    std::vector<std::string> excluded_donors;

    bool is_excluded(const std::string& unit) const;
};

/// Donor pool as indices into panel.unit_ids, in panel order.
std::vector<Eigen::Index> donor_indices(const Panel& panel, const StudyDesign& design);

/// Per-unit covariates recorded once (unit x predictor). Rows are aligned to
/// panels by unit label, not by position.
struct CovariateTable {
    std::vector<std::string> predictor_names;
    std::vector<std::string> unit_ids;
    Eigen::MatrixXd values;  // unit x predictor

    std::optional<Eigen::Index> unit_index(const std::string& id) const;
};

enum class LagScheme {
    all_lags,
    first_three_fourths,
    first_half,
    odd_lags,
    even_lags,
    pretreatment_mean,
    three_values,
};

/// 1..7, the scheme's position in the specification-search grid.
int scheme_number(LagScheme scheme);
const char* scheme_name(LagScheme scheme);
std::optional<LagScheme> parse_scheme(const std::string& name);

/// How pre-treatment outcomes enter the predictor matrix, and whether the
/// covariate columns are included. When proxy_outcome is set, lag columns are
/// taken from that panel's series instead of the analysis outcome (used when
/// the analysis outcome has no pre-treatment variation).
struct LagSpec {
    LagScheme scheme = LagScheme::pretreatment_mean;
    bool include_covariates = true;
    std::optional<Panel> proxy_outcome;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks every structural invariant of the inputs and reports all
/// violations at once. Never throws; callers decide what to do.
ValidationReport validate_panel(const Panel& panel, const StudyDesign& design,
                                const CovariateTable& covariates);

/// One row per panel unit, in panel order. Columns: covariates (when
/// included) followed by the lag summaries selected by the scheme.
struct PredictorMatrix {
    std::vector<std::string> column_names;
    Eigen::MatrixXd values;  // unit x predictor

    Eigen::Index column_count() const { return values.cols(); }
};

PredictorMatrix build_predictor_matrix(const Panel& panel, const StudyDesign& design,
                                       const CovariateTable& covariates, const LagSpec& lagspec);

}  // namespace scm
