#pragma once

#include "scm/generator.hpp"
#include "scm/panel.hpp"
#include "scm/solver.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace testutil {

// Small hand-built panel: unit labels A, B, C, ... with the given outcome
// matrix (unit x period). Periods are labeled 1..T.
inline scm::Panel make_panel(const Eigen::MatrixXd& outcomes,
                             scm::OutcomeKind kind = scm::OutcomeKind::real) {
    scm::Panel p;
    p.outcome_kind = kind;
    p.outcomes = outcomes;
    for (Eigen::Index j = 0; j < outcomes.rows(); ++j) {
        p.unit_ids.push_back(std::string(1, static_cast<char>('A' + j)));
    }
    for (Eigen::Index t = 0; t < outcomes.cols(); ++t) {
        p.period_ids.push_back(std::to_string(t + 1));
    }
    return p;
}

inline scm::CovariateTable make_covariates(const scm::Panel& panel, const Eigen::MatrixXd& values) {
    scm::CovariateTable c;
    c.unit_ids = panel.unit_ids;
    c.values = values;
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
        c.predictor_names.push_back("x" + std::to_string(k + 1));
    }
    return c;
}

inline scm::CovariateTable empty_covariates(const scm::Panel& panel) {
    scm::CovariateTable c;
    c.unit_ids = panel.unit_ids;
    c.values.resize(panel.unit_count(), 0);
    return c;
}

inline scm::StudyDesign make_design(const std::string& treated, Eigen::Index t0) {
    scm::StudyDesign d;
    d.treated_unit = treated;
    d.t0 = t0;
    return d;
}

// Settings tuned for small test instances: one outer start keeps unit tests
// fast while the inner solve stays at full precision.
inline scm::SolverSettings lean_settings(std::uint64_t seed = 0) {
    scm::SolverSettings s;
    s.multistart_count = 1;
    s.outer_max_evaluations = 60;
    s.rng_seed = seed;
    return s;
}

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

}  // namespace testutil
