#pragma once

#include "scm/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>

namespace scm {

/// Seeded factor-model panel generator. Outcomes follow a latent-factor
/// model with logistic factor curves and unit loadings; when planted weights
/// are given, the treated series is the exact convex combination of the
/// donor series over all periods, plus the planted effect profile after t0.
struct GeneratorSpec {
    int unit_count = 21;
    int period_count = 46;
    int t0 = 27;
    int factor_count = 4;
    double noise_scale = 0.01;
    int covariate_count = 8;
    // Weights over the leading donors; shorter vectors are zero-padded to
    // the donor count. Must lie on the simplex.
    std::optional<Eigen::VectorXd> planted_weights;
    // Added to the treated outcome in post periods; length T - t0 (a single
    // value is broadcast).
    std::optional<Eigen::VectorXd> planted_effect;
    std::uint64_t seed = 0;
};

struct GroundTruth {
    std::vector<std::string> donor_ids;
    std::optional<Eigen::VectorXd> planted_weights;  // full donor-pool length
    Eigen::VectorXd true_gap;                        // length T; zero pre-t0
};

struct GeneratedPanel {
    Panel panel;
    CovariateTable covariates;
    GroundTruth truth;
    std::string treated_unit;
};

GeneratedPanel generate_panel(const GeneratorSpec& spec);

}  // namespace scm
