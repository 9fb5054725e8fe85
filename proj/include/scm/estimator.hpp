#pragma once

#include "scm/panel.hpp"
#include "scm/solver.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace scm {

/// Treated trajectory, its synthetic counterfactual, and their difference.
/// gaps[t] == actual[t] - synthetic[t] holds exactly.
struct GapSeries {
    std::vector<std::string> period_ids;
    Eigen::VectorXd actual;
    Eigen::VectorXd synthetic;
    Eigen::VectorXd gaps;
    Eigen::Index t0 = 0;

    Eigen::Index period_count() const { return static_cast<Eigen::Index>(period_ids.size()); }
};

enum class Window { pre, post };

/// synthetic[t] = sum_j w_j Y_jt over the donor pool.
GapSeries synthesize(const Panel& panel, const StudyDesign& design, const UnitWeights& w);

/// Mean squared gap over the chosen window. Pre is periods [0, t0); post is
/// [t0, T), i.e. the intervention period itself counts as post.
double mspe(const GapSeries& gaps, Window window);

struct MspeSummary {
    double pre_mspe = 0.0;
    double post_mspe = 0.0;
    double ratio = 0.0;        // post/pre; +inf when pre == 0
    bool ratio_defined = true; // false when pre == 0
};

MspeSummary summarize_mspe(const GapSeries& gaps);

}  // namespace scm
