#include "scm/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace scm {

namespace {

void check_settings(const SolverSettings& s) {
    if (!(s.inner_tolerance > 0.0) || !(s.outer_tolerance > 0.0)) {
        throw std::invalid_argument("solver tolerances must be positive");
    }
    if (s.inner_max_iterations < 1 || s.outer_max_evaluations < 1 || s.multistart_count < 1) {
        throw std::invalid_argument("solver iteration counts must be at least 1");
    }
}

}  // namespace

std::optional<double> UnitWeights::weight_for(const std::string& donor) const {
    for (size_t i = 0; i < donor_ids.size(); ++i) {
        if (donor_ids[i] == donor) return weights(static_cast<Eigen::Index>(i));
    }
    return std::nullopt;
}

bool simplex_valid(const Eigen::VectorXd& w, double tol) {
    if (w.size() == 0) return false;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (!std::isfinite(w(i)) || w(i) < -tol || w(i) > 1.0 + tol) return false;
    }
    return std::abs(w.sum() - 1.0) <= tol;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& y) {
    const Eigen::Index n = y.size();
    std::vector<double> u(y.data(), y.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());

    double cumsum = 0.0;
    double tau = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        cumsum += u[static_cast<size_t>(k)];
        const double candidate = (1.0 - cumsum) / static_cast<double>(k + 1);
        if (u[static_cast<size_t>(k)] + candidate > 0.0) tau = candidate;
    }

    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = std::max(y(i) + tau, 0.0);
    return w;
}

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& raw) {
    const Eigen::Index rows = raw.rows();
    const Eigen::Index cols = raw.cols();
    Eigen::MatrixXd z(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        const double mean = raw.col(c).mean();
        const Eigen::VectorXd centered = raw.col(c).array() - mean;
        const double spread = centered.cwiseAbs().maxCoeff();
        // Constant columns carry no matching information; zero them rather
        // than dividing by a rounding-level standard deviation.
        if (spread <= 1e-12 * (std::abs(mean) + 1.0)) {
            z.col(c).setZero();
            continue;
        }
        const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(rows));
        z.col(c) = centered / sd;
    }
    return z;
}

namespace {

struct QuadraticForm {
    // f(w) = w'Aw - 2 b'w + c, the v-weighted squared predictor discrepancy.
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    double c = 0.0;

    double value(const Eigen::VectorXd& w) const { return w.dot(A * w) - 2.0 * b.dot(w) + c; }
    Eigen::VectorXd gradient(const Eigen::VectorXd& w) const { return 2.0 * (A * w - b); }
};

QuadraticForm make_quadratic(const Eigen::VectorXd& x, const Eigen::MatrixXd& donors,
                             const Eigen::VectorXd& v) {
    QuadraticForm q;
    const Eigen::MatrixXd weighted = donors * v.asDiagonal();  // J x K
    q.A = weighted * donors.transpose();
    q.b = weighted * x;
    q.c = x.dot(v.asDiagonal() * x);
    return q;
}

double residual_objective(const Eigen::VectorXd& x, const Eigen::MatrixXd& donors,
                          const Eigen::VectorXd& v, Eigen::Index j) {
    double f = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double r = x(k) - donors(j, k);
        f += v(k) * r * r;
    }
    return f;
}

// Minimizes the quadratic over the face {w : w_i = 0 for i not in support,
// sum w = 1} by solving the equality-constrained KKT system. Returns the
// face optimum when it is feasible and does not worsen the objective.
std::optional<Eigen::VectorXd> face_optimum(const QuadraticForm& q,
                                            const std::vector<Eigen::Index>& support,
                                            const Eigen::VectorXd& current, double f_current) {
    const Eigen::Index m = static_cast<Eigen::Index>(support.size());
    if (m == 0) return std::nullopt;

    Eigen::MatrixXd kkt(m + 1, m + 1);
    Eigen::VectorXd rhs(m + 1);
    for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < m; ++c) {
            kkt(r, c) = 2.0 * q.A(support[static_cast<size_t>(r)], support[static_cast<size_t>(c)]);
        }
        kkt(r, m) = 1.0;
        kkt(m, r) = 1.0;
        rhs(r) = 2.0 * q.b(support[static_cast<size_t>(r)]);
    }
    kkt(m, m) = 0.0;
    rhs(m) = 1.0;

    // Rank-deficient systems are routine (more donors than predictors); any
    // consistent solution of the stationarity equations is a face optimum,
    // so solve in the least-squares sense and verify consistency.
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
    const Eigen::VectorXd sol = cod.solve(rhs);
    if (!sol.allFinite()) return std::nullopt;
    const double scale = kkt.cwiseAbs().maxCoeff() + rhs.cwiseAbs().maxCoeff() + 1.0;
    if ((kkt * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-10 * scale) return std::nullopt;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(current.size());
    for (Eigen::Index r = 0; r < m; ++r) {
        const double wi = sol(r);
        if (wi < -1e-10) return std::nullopt;  // face optimum leaves the simplex
        w(support[static_cast<size_t>(r)]) = std::max(wi, 0.0);
    }
    const double total = w.sum();
    if (!(total > 0.0)) return std::nullopt;
    w /= total;

    const double f_face = q.value(w);
    if (f_face > f_current + 1e-12 * (1.0 + std::abs(f_current))) return std::nullopt;
    return w;
}

}  // namespace

WSolution solve_w(const Eigen::VectorXd& x_treated, const Eigen::MatrixXd& x_donors,
                  const PredictorWeights& v, const SolverSettings& settings,
                  std::vector<double>* objective_trace) {
    check_settings(settings);
    const Eigen::Index n_donors = x_donors.rows();
    const Eigen::Index n_predictors = x_donors.cols();
    if (n_donors < 1) throw std::invalid_argument("solve_w: empty donor pool");
    if (n_predictors < 1) throw std::invalid_argument("solve_w: no predictors");
    if (x_treated.size() != n_predictors || v.weights.size() != n_predictors) {
        throw std::invalid_argument("solve_w: predictor dimension mismatch");
    }
    if ((v.weights.array() < 0.0).any()) {
        throw std::invalid_argument("solve_w: predictor weights must be nonnegative");
    }

    WSolution out;
    if (n_donors == 1) {
        out.weights = Eigen::VectorXd::Ones(1);
        out.objective = residual_objective(x_treated, x_donors, v.weights, 0);
        out.converged = true;
        if (objective_trace) objective_trace->push_back(out.objective);
        return out;
    }

    // A donor that reproduces the treated row exactly is the optimum on its
    // own; the first such donor wins.
    for (Eigen::Index j = 0; j < n_donors; ++j) {
        if (residual_objective(x_treated, x_donors, v.weights, j) == 0.0) {
            out.weights = Eigen::VectorXd::Zero(n_donors);
            out.weights(j) = 1.0;
            out.objective = 0.0;
            out.converged = true;
            if (objective_trace) objective_trace->push_back(0.0);
            return out;
        }
    }

    const QuadraticForm q = make_quadratic(x_treated, x_donors, v.weights);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(q.A, Eigen::EigenvaluesOnly);
    const double lipschitz = 2.0 * std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

    Eigen::VectorXd w = Eigen::VectorXd::Constant(n_donors, 1.0 / static_cast<double>(n_donors));
    double f_current = q.value(w);
    if (objective_trace) objective_trace->push_back(f_current);

    constexpr int kPolishInterval = 20;
    constexpr int kStallLimit = 64;
    int iter = 0;
    int stall = 0;
    double pg_norm = std::numeric_limits<double>::infinity();
    bool converged = false;

    while (iter < settings.inner_max_iterations) {
        ++iter;
        const Eigen::VectorXd g = q.gradient(w);
        pg_norm = (w - project_to_simplex(w - g)).lpNorm<Eigen::Infinity>();
        if (pg_norm <= settings.inner_tolerance) {
            converged = true;
            break;
        }

        const Eigen::VectorXd candidate = project_to_simplex(w - step * g);

        // The projection's active set is the best available guess at the
        // optimal face; solving the face exactly skips the slow tail of the
        // gradient iteration when the guess is right.
        if (iter % kPolishInterval == 0) {
            std::vector<Eigen::Index> support;
            for (Eigen::Index i = 0; i < n_donors; ++i) {
                if (candidate(i) > 0.0) support.push_back(i);
            }
            if (auto polished = face_optimum(q, support, w, f_current)) {
                w = *polished;
                f_current = q.value(w);
                if (objective_trace) objective_trace->push_back(f_current);
                continue;
            }
        }

        const Eigen::VectorXd direction = candidate - w;
        const double g_dot_d = g.dot(direction);
        if (g_dot_d >= 0.0) break;  // no descent available at working precision

        const double curvature = 2.0 * direction.dot(q.A * direction);
        const double alpha = curvature > 0.0 ? std::min(1.0, -g_dot_d / curvature) : 1.0;
        w += alpha * direction;

        const double f_next = q.value(w);
        assert(f_next <= f_current + 1e-10 * (1.0 + std::abs(f_current)));
        if (f_current - f_next <= 1e-16 * (1.0 + std::abs(f_current))) {
            if (++stall >= kStallLimit) {
                f_current = f_next;
                if (objective_trace) objective_trace->push_back(f_current);
                break;
            }
        } else {
            stall = 0;
        }
        f_current = f_next;
        if (objective_trace) objective_trace->push_back(f_current);
    }

    // Exact simplex membership regardless of accumulated rounding.
    w = w.cwiseMax(0.0);
    w /= w.sum();

    out.weights = w;
    out.objective = q.value(w);
    out.projected_gradient_norm = (w - project_to_simplex(w - q.gradient(w))).lpNorm<Eigen::Infinity>();
    out.iterations = iter;
    out.converged = converged || out.projected_gradient_norm <= settings.inner_tolerance;
    if (!simplex_valid(out.weights)) {
        throw std::logic_error("solve_w produced weights off the simplex");
    }
    return out;
}

namespace {

Eigen::VectorXd softmax_full(const Eigen::VectorXd& z_free) {
    // z_free has K-1 free coordinates; the last logit is pinned to zero.
    const Eigen::Index k = z_free.size() + 1;
    Eigen::VectorXd logits(k);
    logits.head(k - 1) = z_free;
    logits(k - 1) = 0.0;
    const double top = logits.maxCoeff();
    Eigen::VectorXd v = (logits.array() - top).exp();
    v /= v.sum();
    return v;
}

struct DirectSearchResult {
    Eigen::VectorXd best_point;
    double best_value = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    bool stagnated = false;
};

// Nelder-Mead with standard reflection/expansion/contraction/shrink
// coefficients; deterministic for a fixed starting point.
template <typename Objective>
DirectSearchResult direct_search(const Eigen::VectorXd& start, Objective&& objective,
                                 double tolerance, int max_evaluations) {
    const Eigen::Index n = start.size();
    DirectSearchResult result;

    std::vector<Eigen::VectorXd> points;
    std::vector<double> values;
    points.reserve(static_cast<size_t>(n) + 1);
    points.push_back(start);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd p = start;
        p(i) += 0.5;
        points.push_back(p);
    }
    for (const auto& p : points) {
        values.push_back(objective(p));
        ++result.evaluations;
    }

    std::vector<size_t> order(points.size());
    auto sort_order = [&] {
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return values[a] < values[b]; });
    };

    while (true) {
        sort_order();
        const double f_best = values[order.front()];
        const double f_worst = values[order.back()];
        if (f_worst - f_best <= tolerance * (1.0 + std::abs(f_best))) break;
        if (result.evaluations >= max_evaluations) {
            result.stagnated = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i + 1 < order.size(); ++i) centroid += points[order[i]];
        centroid /= static_cast<double>(order.size() - 1);

        const size_t worst = order.back();
        const size_t second_worst = order[order.size() - 2];

        const Eigen::VectorXd reflected = centroid + (centroid - points[worst]);
        const double f_reflected = objective(reflected);
        ++result.evaluations;

        if (f_reflected < values[order.front()]) {
            const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - points[worst]);
            const double f_expanded = objective(expanded);
            ++result.evaluations;
            if (f_expanded < f_reflected) {
                points[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                points[worst] = reflected;
                values[worst] = f_reflected;
            }
            continue;
        }
        if (f_reflected < values[second_worst]) {
            points[worst] = reflected;
            values[worst] = f_reflected;
            continue;
        }

        const bool outside = f_reflected < values[worst];
        const Eigen::VectorXd contracted =
            outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                    : Eigen::VectorXd(centroid - 0.5 * (centroid - points[worst]));
        const double f_contracted = objective(contracted);
        ++result.evaluations;
        if (f_contracted < std::min(f_reflected, values[worst])) {
            points[worst] = contracted;
            values[worst] = f_contracted;
            continue;
        }

        // Shrink toward the best point.
        const Eigen::VectorXd best_point = points[order.front()];
        for (size_t i = 1; i < order.size(); ++i) {
            points[order[i]] = best_point + 0.5 * (points[order[i]] - best_point);
            values[order[i]] = objective(points[order[i]]);
            ++result.evaluations;
        }
    }

    sort_order();
    result.best_point = points[order.front()];
    result.best_value = values[order.front()];
    return result;
}

}  // namespace

NestedSolution solve_nested(const Panel& panel, const StudyDesign& design,
                            const PredictorMatrix& pm, const SolverSettings& settings) {
    check_settings(settings);
    const auto treated = panel.unit_index(design.treated_unit);
    if (!treated) throw std::invalid_argument("solve_nested: treated unit not in panel");
    const std::vector<Eigen::Index> donors = donor_indices(panel, design);
    const Eigen::Index n_donors = static_cast<Eigen::Index>(donors.size());
    if (n_donors < 1) throw std::invalid_argument("solve_nested: empty donor pool");
    if (pm.values.rows() != panel.unit_count()) {
        throw std::invalid_argument("solve_nested: predictor matrix row count mismatch");
    }
    const Eigen::Index n_predictors = pm.values.cols();
    if (n_predictors < 1) throw std::invalid_argument("solve_nested: no predictors");
    if (design.t0 < 1 || design.t0 >= panel.period_count()) {
        throw std::invalid_argument("solve_nested: t0 out of range");
    }

    // Standardize across the treated unit and its donor pool only, so
    // excluded units do not shift the scale.
    Eigen::MatrixXd eligible(n_donors + 1, n_predictors);
    eligible.row(0) = pm.values.row(*treated);
    for (Eigen::Index j = 0; j < n_donors; ++j) {
        eligible.row(j + 1) = pm.values.row(donors[static_cast<size_t>(j)]);
    }
    const Eigen::MatrixXd z = standardize_columns(eligible);
    const Eigen::VectorXd x_treated = z.row(0);
    const Eigen::MatrixXd x_donors = z.bottomRows(n_donors);

    Eigen::VectorXd y_treated_pre = panel.outcomes.row(*treated).head(design.t0);
    Eigen::MatrixXd y_donors_pre(n_donors, design.t0);
    for (Eigen::Index j = 0; j < n_donors; ++j) {
        y_donors_pre.row(j) = panel.outcomes.row(donors[static_cast<size_t>(j)]).head(design.t0);
    }

    auto pre_outcome_mspe = [&](const Eigen::VectorXd& w) {
        const Eigen::VectorXd synthetic = y_donors_pre.transpose() * w;
        return (y_treated_pre - synthetic).squaredNorm() / static_cast<double>(design.t0);
    };

    NestedSolution out;
    out.unit_weights.donor_ids.reserve(static_cast<size_t>(n_donors));
    for (Eigen::Index j : donors) {
        out.unit_weights.donor_ids.push_back(panel.unit_ids[static_cast<size_t>(j)]);
    }

    auto finish = [&](const Eigen::VectorXd& v_final) {
        PredictorWeights v{v_final};
        const WSolution ws = solve_w(x_treated, x_donors, v, settings);
        out.unit_weights.weights = ws.weights;
        out.predictor_weights = v;
        out.diagnostics.predictor_objective = ws.objective;
        out.diagnostics.outcome_mspe = pre_outcome_mspe(ws.weights);
        out.diagnostics.inner_all_converged &= ws.converged;
        if (!simplex_valid(out.predictor_weights.weights)) {
            throw std::logic_error("solve_nested produced predictor weights off the simplex");
        }
    };

    if (n_predictors == 1) {
        out.diagnostics.starts_run = 1;
        finish(Eigen::VectorXd::Ones(1));
        return out;
    }

    bool inner_all_converged = true;
    auto objective = [&](const Eigen::VectorXd& z_free) {
        PredictorWeights v{softmax_full(z_free)};
        const WSolution ws = solve_w(x_treated, x_donors, v, settings);
        inner_all_converged &= ws.converged;
        return pre_outcome_mspe(ws.weights);
    };

    // Equal predictor weights are always the first start; the remaining
    // starts perturb the logits with seeded Gaussian draws.
    std::mt19937_64 engine(settings.rng_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXd> starts;
    starts.push_back(Eigen::VectorXd::Zero(n_predictors - 1));
    for (int s = 1; s < settings.multistart_count; ++s) {
        Eigen::VectorXd z0(n_predictors - 1);
        for (Eigen::Index i = 0; i < z0.size(); ++i) z0(i) = normal(engine);
        starts.push_back(z0);
    }

    DirectSearchResult best;
    int best_start = 0;
    for (size_t s = 0; s < starts.size(); ++s) {
        DirectSearchResult r = direct_search(starts[s], objective, settings.outer_tolerance,
                                             settings.outer_max_evaluations);
        out.diagnostics.outer_evaluations += r.evaluations;
        ++out.diagnostics.starts_run;
        if (r.best_value < best.best_value) {
            best = r;
            best_start = static_cast<int>(s);
        }
    }

    out.diagnostics.best_start = best_start;
    out.diagnostics.outer_stagnated = best.stagnated;
    out.diagnostics.inner_all_converged = inner_all_converged;
    finish(softmax_full(best.best_point));
    return out;
}

}  // namespace scm
