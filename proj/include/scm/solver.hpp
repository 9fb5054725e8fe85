#pragma once

#include "scm/panel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace scm {

/// Simplex-constrained weights over the donor pool. donor_ids records which
/// pool the vector is aligned to (panel order).
struct UnitWeights {
    std::vector<std::string> donor_ids;
    Eigen::VectorXd weights;

    std::optional<double> weight_for(const std::string& donor) const;
};

/// Nonnegative normalized importance weights over predictor columns.
struct PredictorWeights {
    Eigen::VectorXd weights;
};

/// True when w is entrywise in [0,1] and sums to 1 within tol.
bool simplex_valid(const Eigen::VectorXd& w, double tol = 1e-9);

struct SolverSettings {
    double inner_tolerance = 1e-10;   // stop when the projected gradient inf-norm falls below
    int inner_max_iterations = 100000;
    double outer_tolerance = 1e-10;   // direct-search objective spread, relative to 1+|best|
    int outer_max_evaluations = 1000; // per start
    int multistart_count = 5;         // equal weights plus seeded random starts
    std::uint64_t rng_seed = 0;
};

struct WSolution {
    Eigen::VectorXd weights;
    double objective = 0.0;                 // sum_k v_k (x_k - w.X_k)^2 at return
    double projected_gradient_norm = 0.0;   // inf-norm stationarity measure at return
    int iterations = 0;
    bool converged = false;
};

/// Minimizes the v-weighted squared predictor discrepancy over the unit
/// simplex by projected gradient descent with exact line search for the
/// quadratic objective. A stationary point is certified by the projected
/// gradient; on iteration overrun the best iterate is returned with
/// converged=false. Deterministic for identical inputs.
///
/// Columns of x_donors are expected standardized when called from the nested
/// pipeline; the routine itself accepts any finite matrix.
WSolution solve_w(const Eigen::VectorXd& x_treated, const Eigen::MatrixXd& x_donors,
                  const PredictorWeights& v, const SolverSettings& settings,
                  std::vector<double>* objective_trace = nullptr);

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& y);

/// Z-scores every column (population standard deviation). Zero-variance
/// columns map to all zeros so they drop out of the fit.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& raw);

struct NestedDiagnostics {
    double predictor_objective = 0.0;  // inner objective at the returned (W,V)
    double outcome_mspe = 0.0;         // pre-period outcome MSPE at the returned W
    int outer_evaluations = 0;         // total across starts
    int starts_run = 0;
    int best_start = 0;
    bool inner_all_converged = true;
    bool outer_stagnated = false;
};

struct NestedSolution {
    UnitWeights unit_weights;
    PredictorWeights predictor_weights;
    NestedDiagnostics diagnostics;
};

/// Nested W/V optimization: the outer derivative-free search moves V on the
/// predictor simplex (softmax reparameterization, reflection/contraction
/// steps, multistart with equal weights always first) to minimize the
/// pre-period outcome MSPE of the inner solve_w fit. Predictor columns are
/// standardized across the treated unit and the donor pool before the inner
/// solves; tie-breaks are by panel order throughout.
NestedSolution solve_nested(const Panel& panel, const StudyDesign& design,
                            const PredictorMatrix& pm, const SolverSettings& settings);

}  // namespace scm
