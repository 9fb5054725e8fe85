#include "scm/robustness.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scm {

std::vector<LooResult> leave_one_out(const Panel& panel, const StudyDesign& design,
                                     const CovariateTable& covariates, const LagSpec& lagspec,
                                     const SolverSettings& settings,
                                     const std::vector<std::string>& explicit_omissions) {
    const PredictorMatrix pm = build_predictor_matrix(panel, design, covariates, lagspec);

    std::vector<std::string> omissions = explicit_omissions;
    if (omissions.empty()) {
        const NestedSolution baseline = solve_nested(panel, design, pm, settings);
        for (size_t i = 0; i < baseline.unit_weights.donor_ids.size(); ++i) {
            if (baseline.unit_weights.weights(static_cast<Eigen::Index>(i)) >
                kContributingWeightThreshold) {
                omissions.push_back(baseline.unit_weights.donor_ids[i]);
            }
        }
    }
    for (const auto& unit : omissions) {
        if (!panel.unit_index(unit)) {
            throw std::invalid_argument("leave_one_out: unit '" + unit + "' not in panel");
        }
        if (unit == design.treated_unit) {
            throw std::invalid_argument("leave_one_out: cannot omit the treated unit");
        }
    }

    std::vector<LooResult> results(omissions.size());
    detail::parallel_for_index(omissions.size(), [&](size_t i) {
        StudyDesign reduced = design;
        reduced.excluded_donors.push_back(omissions[i]);
        if (donor_indices(panel, reduced).size() < 2) {
            throw std::invalid_argument("leave_one_out: reduced pool smaller than 2 donors");
        }
        const NestedSolution solution = solve_nested(panel, reduced, pm, settings);
        LooResult r;
        r.omitted_unit = omissions[i];
        r.weights = solution.unit_weights;
        r.gaps = synthesize(panel, reduced, solution.unit_weights);
        r.diagnostics = solution.diagnostics;
        results[i] = std::move(r);
    });
    return results;
}

SpecSearchResult spec_search(const Panel& panel, const StudyDesign& design,
                             const CovariateTable& covariates, const LagSpec& base,
                             const SolverSettings& settings) {
    static constexpr LagScheme kSchemes[] = {
        LagScheme::all_lags,      LagScheme::first_three_fourths, LagScheme::first_half,
        LagScheme::odd_lags,      LagScheme::even_lags,           LagScheme::pretreatment_mean,
        LagScheme::three_values,
    };

    SpecSearchResult result;
    for (LagScheme scheme : kSchemes) {
        for (bool with_covariates : {false, true}) {
            SpecSearchRow row;
            row.scheme = scheme;
            row.include_covariates = with_covariates;
            row.label = std::to_string(scheme_number(scheme)) + (with_covariates ? "b" : "a");
            try {
                LagSpec variant;
                variant.scheme = scheme;
                variant.include_covariates = with_covariates;
                variant.proxy_outcome = base.proxy_outcome;
                const PlaceboTable table =
                    placebo_in_space(panel, design, covariates, variant, settings);
                row.treated_rank = table.treated_rank;
                row.p_value = table.p_value;
                for (const auto& r : table.rows) {
                    if (r.unit == design.treated_unit) {
                        row.treated_post_mspe = r.post_mspe;
                        row.flagged = r.flagged;
                        row.flag_reason = r.flag_reason;
                    }
                }
            } catch (const std::exception& e) {
                row.flagged = true;
                row.flag_reason = e.what();
                row.treated_rank = 0;
                row.p_value = std::numeric_limits<double>::quiet_NaN();
                row.treated_post_mspe = std::numeric_limits<double>::quiet_NaN();
            }
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

}  // namespace scm
