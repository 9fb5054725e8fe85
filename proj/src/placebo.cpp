#include "scm/placebo.hpp"

#include "parallel.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scm {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

PlaceboRow make_flagged_row(const std::string& unit, const std::string& reason) {
    PlaceboRow row;
    row.unit = unit;
    row.pre_mspe = kNan;
    row.post_mspe = kNan;
    row.ratio = kNan;
    row.ratio_defined = false;
    row.flagged = true;
    row.flag_reason = reason;
    return row;
}

std::vector<std::string> eligible_units(const Panel& panel, const StudyDesign& design) {
    std::vector<std::string> units;
    for (const auto& id : panel.unit_ids) {
        if (!design.is_excluded(id)) units.push_back(id);
    }
    return units;
}

}  // namespace

PlaceboTable placebo_in_space(const Panel& panel, const StudyDesign& design,
                              const CovariateTable& covariates, const LagSpec& lagspec,
                              const SolverSettings& settings) {
    // The predictor matrix does not depend on which unit is cast as treated,
    // so it is built once and shared by every placebo estimation.
    const PredictorMatrix pm = build_predictor_matrix(panel, design, covariates, lagspec);
    const std::vector<std::string> units = eligible_units(panel, design);

    PlaceboTable table;
    table.treated_unit = design.treated_unit;
    table.rows.resize(units.size());

    detail::parallel_for_index(units.size(), [&](size_t i) {
        StudyDesign pseudo = design;
        pseudo.treated_unit = units[i];
        PlaceboRow row;
        row.unit = units[i];
        try {
            const NestedSolution solution = solve_nested(panel, pseudo, pm, settings);
            row.gaps = synthesize(panel, pseudo, solution.unit_weights);
            const MspeSummary s = summarize_mspe(row.gaps);
            row.pre_mspe = s.pre_mspe;
            row.post_mspe = s.post_mspe;
            row.ratio = s.ratio;
            row.ratio_defined = s.ratio_defined;
        } catch (const std::exception& e) {
            row = make_flagged_row(units[i], e.what());
        }
        table.rows[i] = std::move(row);
    });

    return rank_by_post_mspe(std::move(table));
}

PlaceboTable rank_by_post_mspe(PlaceboTable table) {
    for (auto& row : table.rows) {
        if (!row.flagged && !std::isfinite(row.post_mspe)) {
            row.flagged = true;
            row.flag_reason = "post-period MSPE is not finite";
        }
    }

    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const PlaceboRow& a, const PlaceboRow& b) {
                         if (a.flagged != b.flagged) return !a.flagged;  // flagged rows sink
                         if (a.flagged) return a.unit < b.unit;
                         if (a.post_mspe != b.post_mspe) return a.post_mspe > b.post_mspe;
                         return a.unit < b.unit;
                     });

    int ranked = 0;
    for (const auto& row : table.rows) {
        if (!row.flagged) ++ranked;
    }

    int rank = 0;
    for (auto& row : table.rows) {
        if (row.flagged) {
            row.rank = 0;
            row.p_value = kNan;
            continue;
        }
        row.rank = ++rank;
        row.p_value = static_cast<double>(row.rank) / static_cast<double>(ranked);
        if (row.unit == table.treated_unit) {
            table.treated_rank = row.rank;
            table.p_value = row.p_value;
        }
    }
    return table;
}

DiffEffects diff_in_effects(const GapSeries& gaps_a, const GapSeries& gaps_b,
                            const std::string& origin_a, const std::string& origin_b) {
    auto position = [](const GapSeries& g, const std::string& origin, const char* which) {
        auto it = std::find(g.period_ids.begin(), g.period_ids.end(), origin);
        if (it == g.period_ids.end()) {
            throw std::invalid_argument(std::string("diff_in_effects: origin '") + origin +
                                        "' not covered by series " + which);
        }
        return static_cast<long>(it - g.period_ids.begin());
    };
    const long pos_a = position(gaps_a, origin_a, "A");
    const long pos_b = position(gaps_b, origin_b, "B");

    const long lo = std::max(-pos_a, -pos_b);
    const long hi = std::min(static_cast<long>(gaps_a.period_count()) - 1 - pos_a,
                             static_cast<long>(gaps_b.period_count()) - 1 - pos_b);
    if (lo > hi) throw std::invalid_argument("diff_in_effects: event-time supports do not overlap");

    DiffEffects out;
    out.origin_a = origin_a;
    out.origin_b = origin_b;
    out.diffs.resize(hi - lo + 1);
    for (long e = lo; e <= hi; ++e) {
        out.event_weeks.push_back(e);
        out.diffs(e - lo) = gaps_a.gaps(e + pos_a) - gaps_b.gaps(e + pos_b);
    }
    return out;
}

namespace {

// First period with a strictly positive outcome for the unit; the default
// alignment origin when none is supplied.
std::optional<std::string> default_origin(const Panel& panel, Eigen::Index unit) {
    for (Eigen::Index t = 0; t < panel.period_count(); ++t) {
        if (panel.outcomes(unit, t) > 0.0) return panel.period_ids[static_cast<size_t>(t)];
    }
    return std::nullopt;
}

}  // namespace

PlaceboTable diff_in_effects_placebo(const Panel& panel_a, const StudyDesign& design_a,
                                     const CovariateTable& covariates, const LagSpec& lag_a,
                                     const Panel& panel_b, const StudyDesign& design_b,
                                     const LagSpec& lag_b, const SolverSettings& settings,
                                     const DiffPlaceboOptions& options) {
    const PredictorMatrix pm_a = build_predictor_matrix(panel_a, design_a, covariates, lag_a);
    const PredictorMatrix pm_b = build_predictor_matrix(panel_b, design_b, covariates, lag_b);
    const std::vector<std::string> units = eligible_units(panel_a, design_a);

    PlaceboTable table;
    table.treated_unit = design_a.treated_unit;
    table.rows.resize(units.size());

    detail::parallel_for_index(units.size(), [&](size_t i) {
        const std::string& unit = units[i];
        PlaceboRow row;
        row.unit = unit;
        try {
            const auto idx_a = panel_a.unit_index(unit);
            const auto idx_b = panel_b.unit_index(unit);
            if (!idx_a || !idx_b) {
                throw std::invalid_argument("unit '" + unit + "' missing from one of the panels");
            }

            StudyDesign pseudo_a = design_a;
            pseudo_a.treated_unit = unit;
            StudyDesign pseudo_b = design_b;
            pseudo_b.treated_unit = unit;

            const NestedSolution sol_a = solve_nested(panel_a, pseudo_a, pm_a, settings);
            const NestedSolution sol_b = solve_nested(panel_b, pseudo_b, pm_b, settings);
            const GapSeries gaps_a = synthesize(panel_a, pseudo_a, sol_a.unit_weights);
            const GapSeries gaps_b = synthesize(panel_b, pseudo_b, sol_b.unit_weights);

            const auto origin_a = options.origin_a ? options.origin_a : default_origin(panel_a, *idx_a);
            const auto origin_b = options.origin_b ? options.origin_b : default_origin(panel_b, *idx_b);
            if (!origin_a || !origin_b) {
                throw std::invalid_argument("unit '" + unit +
                                            "' has no positive outcome to anchor event time");
            }

            const DiffEffects diff = diff_in_effects(gaps_a, gaps_b, *origin_a, *origin_b);

            const long pos_a = *panel_a.period_index(*origin_a);
            const long pos_b = *panel_b.period_index(*origin_b);
            const long post_a = static_cast<long>(design_a.t0) - pos_a;  // event time where A turns post
            const long post_b = static_cast<long>(design_b.t0) - pos_b;
            const long post_from = std::max(post_a, post_b);
            const long pre_until = std::min(post_a, post_b);

            double pre_sum = 0.0, post_sum = 0.0;
            long pre_n = 0, post_n = 0;
            for (size_t k = 0; k < diff.event_weeks.size(); ++k) {
                const long e = diff.event_weeks[k];
                const double d2 = diff.diffs(static_cast<Eigen::Index>(k)) *
                                  diff.diffs(static_cast<Eigen::Index>(k));
                if (e >= post_from) {
                    post_sum += d2;
                    ++post_n;
                } else if (e < pre_until) {
                    pre_sum += d2;
                    ++pre_n;
                }
            }
            if (post_n == 0) {
                throw std::invalid_argument("unit '" + unit +
                                            "' has no post-period overlap in event time");
            }

            row.post_mspe = post_sum / static_cast<double>(post_n);
            row.pre_mspe = pre_n > 0 ? pre_sum / static_cast<double>(pre_n) : 0.0;
            if (row.pre_mspe > 0.0) {
                row.ratio = row.post_mspe / row.pre_mspe;
                row.ratio_defined = true;
            } else {
                row.ratio = std::numeric_limits<double>::infinity();
                row.ratio_defined = false;
            }

            // Store the aligned pair as a gap series on event time: actual
            // carries group A's gaps, synthetic group B's, so the stored
            // gaps are exactly the differences.
            GapSeries aligned;
            aligned.actual.resize(static_cast<Eigen::Index>(diff.event_weeks.size()));
            aligned.synthetic.resize(static_cast<Eigen::Index>(diff.event_weeks.size()));
            Eigen::Index first_post = static_cast<Eigen::Index>(diff.event_weeks.size());
            for (size_t k = 0; k < diff.event_weeks.size(); ++k) {
                const long e = diff.event_weeks[k];
                aligned.period_ids.push_back(std::to_string(e));
                aligned.actual(static_cast<Eigen::Index>(k)) = gaps_a.gaps(e + pos_a);
                aligned.synthetic(static_cast<Eigen::Index>(k)) = gaps_b.gaps(e + pos_b);
                if (e >= post_from && static_cast<Eigen::Index>(k) < first_post) {
                    first_post = static_cast<Eigen::Index>(k);
                }
            }
            aligned.gaps = aligned.actual - aligned.synthetic;
            aligned.t0 = first_post;
            row.gaps = std::move(aligned);
        } catch (const std::exception& e) {
            row = make_flagged_row(unit, e.what());
        }
        table.rows[i] = std::move(row);
    });

    return rank_by_post_mspe(std::move(table));
}

PairedCi paired_difference_ci(const Eigen::VectorXd& treated_values,
                              const Eigen::VectorXd& neighbor_values, double level) {
    const Eigen::Index n = treated_values.size();
    if (neighbor_values.size() != n) {
        throw std::invalid_argument("paired_difference_ci: length mismatch");
    }
    if (n < 2) throw std::invalid_argument("paired_difference_ci: fewer than 2 pairs");
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("paired_difference_ci: level must be in (0,1)");
    }

    const Eigen::VectorXd diffs = treated_values - neighbor_values;
    const double mean = diffs.mean();
    const double ss = (diffs.array() - mean).matrix().squaredNorm();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const double se = sd / std::sqrt(static_cast<double>(n));

    boost::math::students_t dist(static_cast<double>(n - 1));
    const double t = boost::math::quantile(dist, 0.5 + level / 2.0);

    PairedCi ci;
    ci.mean_diff = mean;
    ci.lo = mean - t * se;
    ci.hi = mean + t * se;
    return ci;
}

}  // namespace scm
