#include "scm/generator.hpp"

#include "scm/solver.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace scm {

namespace {

std::string unit_label(int index, int count) {
    int width = 1;
    for (int c = count; c >= 10; c /= 10) ++width;
    std::ostringstream os;
    os << "U";
    std::string digits = std::to_string(index + 1);
    os << std::string(static_cast<size_t>(width) - digits.size(), '0') << digits;
    return os.str();
}

}  // namespace

GeneratedPanel generate_panel(const GeneratorSpec& spec) {
    if (spec.unit_count < 3) throw std::invalid_argument("generate_panel: need at least 3 units");
    if (spec.period_count < 2) throw std::invalid_argument("generate_panel: need at least 2 periods");
    if (spec.t0 < 1 || spec.t0 >= spec.period_count) {
        throw std::invalid_argument("generate_panel: t0 out of range");
    }
    if (spec.factor_count < 1) throw std::invalid_argument("generate_panel: need at least 1 factor");
    if (spec.noise_scale < 0.0) throw std::invalid_argument("generate_panel: negative noise scale");

    const int n_units = spec.unit_count;
    const int n_periods = spec.period_count;
    const int n_donors = n_units - 1;

    std::mt19937_64 engine(spec.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Logistic factor curves: rollout-shaped, spread over the sample window.
    Eigen::MatrixXd factors(spec.factor_count, n_periods);
    for (int f = 0; f < spec.factor_count; ++f) {
        const double center = (0.2 + 0.6 * uniform(engine)) * static_cast<double>(n_periods);
        const double scale = 2.0 + 6.0 * uniform(engine);
        for (int t = 0; t < n_periods; ++t) {
            factors(f, t) = 1.0 / (1.0 + std::exp(-(static_cast<double>(t + 1) - center) / scale));
        }
    }

    Eigen::MatrixXd loadings(n_units, spec.factor_count);
    for (int j = 0; j < n_units; ++j) {
        double row_sum = 0.0;
        for (int f = 0; f < spec.factor_count; ++f) {
            loadings(j, f) = uniform(engine);
            row_sum += loadings(j, f);
        }
        if (row_sum > 0.0) loadings.row(j) /= row_sum;
    }

    Eigen::MatrixXd outcomes = loadings * factors;
    for (int j = 0; j < n_units; ++j) {
        for (int t = 0; t < n_periods; ++t) {
            outcomes(j, t) += spec.noise_scale * normal(engine);
        }
    }

    // Covariates correlated with the loadings so they carry real matching
    // information.
    Eigen::MatrixXd cov_directions(spec.covariate_count, spec.factor_count);
    for (int k = 0; k < spec.covariate_count; ++k) {
        double row_sum = 0.0;
        for (int f = 0; f < spec.factor_count; ++f) {
            cov_directions(k, f) = uniform(engine);
            row_sum += cov_directions(k, f);
        }
        if (row_sum > 0.0) cov_directions.row(k) /= row_sum;
    }
    Eigen::MatrixXd covariate_values = loadings * cov_directions.transpose();
    for (int j = 0; j < n_units; ++j) {
        for (int k = 0; k < spec.covariate_count; ++k) {
            covariate_values(j, k) += 0.05 * normal(engine);
        }
    }

    Eigen::VectorXd planted_full;
    if (spec.planted_weights) {
        if (spec.planted_weights->size() > n_donors) {
            throw std::invalid_argument("generate_panel: more planted weights than donors");
        }
        planted_full = Eigen::VectorXd::Zero(n_donors);
        planted_full.head(spec.planted_weights->size()) = *spec.planted_weights;
        if (!simplex_valid(planted_full)) {
            throw std::invalid_argument("generate_panel: planted weights are not a simplex point");
        }
        // Treated row (unit 0) becomes the exact convex combination of the
        // donor rows; donors are units 1..J in order.
        outcomes.row(0).setZero();
        covariate_values.row(0).setZero();
        for (int d = 0; d < n_donors; ++d) {
            outcomes.row(0) += planted_full(d) * outcomes.row(d + 1);
            covariate_values.row(0) += planted_full(d) * covariate_values.row(d + 1);
        }
    }

    Eigen::VectorXd effect = Eigen::VectorXd::Zero(n_periods);
    if (spec.planted_effect) {
        const Eigen::Index post_len = n_periods - spec.t0;
        if (spec.planted_effect->size() == 1) {
            effect.tail(post_len).setConstant((*spec.planted_effect)(0));
        } else if (spec.planted_effect->size() == post_len) {
            effect.tail(post_len) = *spec.planted_effect;
        } else {
            throw std::invalid_argument(
                "generate_panel: effect profile length must be 1 or the post-period count");
        }
        outcomes.row(0) += effect.transpose();
    }

    GeneratedPanel out;
    out.treated_unit = unit_label(0, n_units);

    out.panel.outcome_kind = OutcomeKind::real;
    out.panel.outcomes = outcomes;
    for (int j = 0; j < n_units; ++j) out.panel.unit_ids.push_back(unit_label(j, n_units));
    for (int t = 0; t < n_periods; ++t) out.panel.period_ids.push_back(std::to_string(t + 1));

    out.covariates.unit_ids = out.panel.unit_ids;
    out.covariates.values = covariate_values;
    for (int k = 0; k < spec.covariate_count; ++k) {
        out.covariates.predictor_names.push_back("x" + std::to_string(k + 1));
    }

    out.truth.true_gap = effect;
    for (int d = 0; d < n_donors; ++d) out.truth.donor_ids.push_back(unit_label(d + 1, n_units));
    if (spec.planted_weights) out.truth.planted_weights = planted_full;

    return out;
}

}  // namespace scm
