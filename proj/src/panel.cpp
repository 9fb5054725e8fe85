#include "scm/panel.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <set>
#include <sstream>
#include <stdexcept>

namespace scm {

namespace {

std::optional<Eigen::Index> index_of(const std::vector<std::string>& ids, const std::string& id) {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it - ids.begin());
}

bool parse_integer(const std::string& s, long long& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::vector<std::string> duplicate_labels(const std::vector<std::string>& ids) {
    std::set<std::string> seen, dups;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) dups.insert(id);
    }
    return {dups.begin(), dups.end()};
}

}  // namespace

std::optional<Eigen::Index> Panel::unit_index(const std::string& id) const {
    return index_of(unit_ids, id);
}

std::optional<Eigen::Index> Panel::period_index(const std::string& id) const {
    return index_of(period_ids, id);
}

bool StudyDesign::is_excluded(const std::string& unit) const {
    return std::find(excluded_donors.begin(), excluded_donors.end(), unit) != excluded_donors.end();
}

std::vector<Eigen::Index> donor_indices(const Panel& panel, const StudyDesign& design) {
    std::vector<Eigen::Index> donors;
    donors.reserve(panel.unit_ids.size());
    for (Eigen::Index j = 0; j < panel.unit_count(); ++j) {
        const std::string& id = panel.unit_ids[static_cast<size_t>(j)];
        if (id == design.treated_unit || design.is_excluded(id)) continue;
        donors.push_back(j);
    }
    return donors;
}

std::optional<Eigen::Index> CovariateTable::unit_index(const std::string& id) const {
    return index_of(unit_ids, id);
}

int scheme_number(LagScheme scheme) {
    switch (scheme) {
        case LagScheme::all_lags: return 1;
        case LagScheme::first_three_fourths: return 2;
        case LagScheme::first_half: return 3;
        case LagScheme::odd_lags: return 4;
        case LagScheme::even_lags: return 5;
        case LagScheme::pretreatment_mean: return 6;
        case LagScheme::three_values: return 7;
    }
    return 0;
}

const char* scheme_name(LagScheme scheme) {
    switch (scheme) {
        case LagScheme::all_lags: return "all_lags";
        case LagScheme::first_three_fourths: return "first_three_fourths";
        case LagScheme::first_half: return "first_half";
        case LagScheme::odd_lags: return "odd_lags";
        case LagScheme::even_lags: return "even_lags";
        case LagScheme::pretreatment_mean: return "pretreatment_mean";
        case LagScheme::three_values: return "three_values";
    }
    return "unknown";
}

std::optional<LagScheme> parse_scheme(const std::string& name) {
    static const LagScheme all[] = {
        LagScheme::all_lags,      LagScheme::first_three_fourths, LagScheme::first_half,
        LagScheme::odd_lags,      LagScheme::even_lags,           LagScheme::pretreatment_mean,
        LagScheme::three_values,
    };
    for (LagScheme s : all) {
        if (name == scheme_name(s)) return s;
    }
    return std::nullopt;
}

ValidationReport validate_panel(const Panel& panel, const StudyDesign& design,
                                const CovariateTable& covariates) {
    ValidationReport report;
    auto flag = [&report](const std::string& msg) { report.violations.push_back(msg); };

    const Eigen::Index n_units = panel.unit_count();
    const Eigen::Index n_periods = panel.period_count();

    for (const auto& d : duplicate_labels(panel.unit_ids)) flag("duplicate unit label: " + d);
    for (const auto& d : duplicate_labels(panel.period_ids)) flag("duplicate period label: " + d);

    // Numeric period labels must be strictly increasing; opaque labels take
    // the given order as canonical.
    bool all_numeric = !panel.period_ids.empty();
    std::vector<long long> numeric(panel.period_ids.size());
    for (size_t i = 0; i < panel.period_ids.size(); ++i) {
        if (!parse_integer(panel.period_ids[i], numeric[i])) {
            all_numeric = false;
            break;
        }
    }
    if (all_numeric) {
        for (size_t i = 1; i < numeric.size(); ++i) {
            if (numeric[i] <= numeric[i - 1]) {
                flag("periods not strictly ordered at label '" + panel.period_ids[i] + "'");
                break;
            }
        }
    }

    if (panel.outcomes.rows() != n_units || panel.outcomes.cols() != n_periods) {
        std::ostringstream os;
        os << "outcome matrix is " << panel.outcomes.rows() << "x" << panel.outcomes.cols()
           << ", expected " << n_units << "x" << n_periods;
        flag(os.str());
        return report;  // further cell checks would index out of range
    }

    for (Eigen::Index j = 0; j < n_units; ++j) {
        for (Eigen::Index t = 0; t < n_periods; ++t) {
            const double y = panel.outcomes(j, t);
            if (!std::isfinite(y)) {
                flag("non-finite outcome at unit '" + panel.unit_ids[static_cast<size_t>(j)] +
                     "', period '" + panel.period_ids[static_cast<size_t>(t)] + "'");
            } else if (panel.outcome_kind == OutcomeKind::share && (y < 0.0 || y > 1.0)) {
                std::ostringstream os;
                os << "share outcome out of [0,1] at unit '" << panel.unit_ids[static_cast<size_t>(j)]
                   << "', period '" << panel.period_ids[static_cast<size_t>(t)] << "': " << y;
                flag(os.str());
            }
        }
    }

    if (!panel.unit_index(design.treated_unit)) {
        flag("treated unit '" + design.treated_unit + "' not in panel");
    }
    if (design.is_excluded(design.treated_unit)) {
        flag("treated unit '" + design.treated_unit + "' is in the excluded-donor set");
    }
    for (const auto& ex : design.excluded_donors) {
        if (!panel.unit_index(ex)) flag("excluded donor '" + ex + "' not in panel");
    }
    if (design.t0 < 1) {
        flag("t0 must be at least 1");
    }
    if (design.t0 >= n_periods) {
        flag("no post-period: t0 >= period count");
    }
    if (donor_indices(panel, design).size() < 2) {
        flag("donor pool has fewer than 2 members");
    }

    if (covariates.values.rows() != static_cast<Eigen::Index>(covariates.unit_ids.size()) ||
        covariates.values.cols() != static_cast<Eigen::Index>(covariates.predictor_names.size())) {
        flag("covariate matrix shape does not match its labels");
        return report;
    }
    for (const auto& d : duplicate_labels(covariates.predictor_names)) {
        flag("duplicate predictor name: " + d);
    }
    for (const auto& d : duplicate_labels(covariates.unit_ids)) {
        flag("duplicate covariate unit label: " + d);
    }
    for (const auto& unit : panel.unit_ids) {
        if (!covariates.unit_index(unit)) flag("covariate row missing for unit '" + unit + "'");
    }
    for (Eigen::Index r = 0; r < covariates.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < covariates.values.cols(); ++c) {
            if (!std::isfinite(covariates.values(r, c))) {
                flag("non-finite covariate for unit '" + covariates.unit_ids[static_cast<size_t>(r)] +
                     "', predictor '" + covariates.predictor_names[static_cast<size_t>(c)] + "'");
            }
        }
    }

    return report;
}

namespace {

// 0-based positions of the pre-periods selected by the scheme.
std::vector<Eigen::Index> lag_positions(LagScheme scheme, Eigen::Index t0) {
    std::vector<Eigen::Index> pos;
    switch (scheme) {
        case LagScheme::all_lags:
            for (Eigen::Index t = 0; t < t0; ++t) pos.push_back(t);
            break;
        case LagScheme::first_three_fourths: {
            Eigen::Index n = std::max<Eigen::Index>(1, (t0 * 3) / 4);
            for (Eigen::Index t = 0; t < n; ++t) pos.push_back(t);
            break;
        }
        case LagScheme::first_half: {
            Eigen::Index n = std::max<Eigen::Index>(1, t0 / 2);
            for (Eigen::Index t = 0; t < n; ++t) pos.push_back(t);
            break;
        }
        case LagScheme::odd_lags:
            for (Eigen::Index t = 0; t < t0; t += 2) pos.push_back(t);  // 1-based odd
            break;
        case LagScheme::even_lags:
            for (Eigen::Index t = 1; t < t0; t += 2) pos.push_back(t);  // 1-based even
            break;
        case LagScheme::pretreatment_mean:
            break;  // handled as a single aggregate column
        case LagScheme::three_values: {
            Eigen::Index middle = (t0 + 1) / 2 - 1;  // ceil(t0/2), 1-based, to 0-based
            pos = {0, middle, t0 - 1};
            break;
        }
    }
    return pos;
}

}  // namespace

PredictorMatrix build_predictor_matrix(const Panel& panel, const StudyDesign& design,
                                       const CovariateTable& covariates, const LagSpec& lagspec) {
    const Eigen::Index n_units = panel.unit_count();
    const Eigen::Index t0 = design.t0;
    if (t0 < 1 || t0 > panel.period_count()) {
        throw std::invalid_argument("build_predictor_matrix: t0 out of range");
    }

    // Pre-period series per unit, from the proxy panel when one is set.
    Eigen::MatrixXd pre(n_units, t0);
    if (lagspec.proxy_outcome) {
        const Panel& proxy = *lagspec.proxy_outcome;
        for (Eigen::Index j = 0; j < n_units; ++j) {
            auto pu = proxy.unit_index(panel.unit_ids[static_cast<size_t>(j)]);
            if (!pu) {
                throw std::invalid_argument("proxy panel missing unit '" +
                                            panel.unit_ids[static_cast<size_t>(j)] + "'");
            }
            for (Eigen::Index t = 0; t < t0; ++t) {
                auto pt = proxy.period_index(panel.period_ids[static_cast<size_t>(t)]);
                if (!pt) {
                    throw std::invalid_argument("proxy panel missing period '" +
                                                panel.period_ids[static_cast<size_t>(t)] + "'");
                }
                pre(j, t) = proxy.outcomes(*pu, *pt);
            }
        }
    } else {
        pre = panel.outcomes.leftCols(t0);
    }

    const Eigen::Index n_covs =
        lagspec.include_covariates ? static_cast<Eigen::Index>(covariates.predictor_names.size()) : 0;
    std::vector<Eigen::Index> positions = lag_positions(lagspec.scheme, t0);
    const bool mean_column = lagspec.scheme == LagScheme::pretreatment_mean;
    const Eigen::Index n_lags = mean_column ? 1 : static_cast<Eigen::Index>(positions.size());
    if (n_lags == 0) {
        throw std::invalid_argument(std::string("lag scheme '") + scheme_name(lagspec.scheme) +
                                    "' selects no pre-periods for t0=" + std::to_string(t0));
    }

    PredictorMatrix pm;
    pm.values.resize(n_units, n_covs + n_lags);

    for (Eigen::Index k = 0; k < n_covs; ++k) {
        pm.column_names.push_back(covariates.predictor_names[static_cast<size_t>(k)]);
        for (Eigen::Index j = 0; j < n_units; ++j) {
            auto row = covariates.unit_index(panel.unit_ids[static_cast<size_t>(j)]);
            if (!row) {
                throw std::invalid_argument("covariate row missing for unit '" +
                                            panel.unit_ids[static_cast<size_t>(j)] + "'");
            }
            pm.values(j, k) = covariates.values(*row, k);
        }
    }

    if (mean_column) {
        pm.column_names.push_back("lag_mean");
        pm.values.col(n_covs) = pre.rowwise().mean();
    } else {
        for (Eigen::Index c = 0; c < n_lags; ++c) {
            const Eigen::Index t = positions[static_cast<size_t>(c)];
            pm.column_names.push_back("lag_" + panel.period_ids[static_cast<size_t>(t)]);
            pm.values.col(n_covs + c) = pre.col(t);
        }
    }

    return pm;
}

}  // namespace scm
