#include "scm/estimator.hpp"

#include <limits>
#include <stdexcept>

namespace scm {

GapSeries synthesize(const Panel& panel, const StudyDesign& design, const UnitWeights& w) {
    const auto treated = panel.unit_index(design.treated_unit);
    if (!treated) throw std::invalid_argument("synthesize: treated unit not in panel");
    if (!simplex_valid(w.weights)) {
        throw std::invalid_argument("synthesize: unit weights are not a simplex point");
    }

    GapSeries out;
    out.period_ids = panel.period_ids;
    out.t0 = design.t0;
    out.actual = panel.outcomes.row(*treated);
    out.synthetic = Eigen::VectorXd::Zero(panel.period_count());
    for (size_t i = 0; i < w.donor_ids.size(); ++i) {
        const auto j = panel.unit_index(w.donor_ids[i]);
        if (!j) throw std::invalid_argument("synthesize: donor '" + w.donor_ids[i] + "' not in panel");
        out.synthetic += w.weights(static_cast<Eigen::Index>(i)) * panel.outcomes.row(*j).transpose();
    }
    out.gaps = out.actual - out.synthetic;
    return out;
}

double mspe(const GapSeries& gaps, Window window) {
    const Eigen::Index n = gaps.period_count();
    const Eigen::Index from = window == Window::pre ? 0 : gaps.t0;
    const Eigen::Index until = window == Window::pre ? gaps.t0 : n;
    if (until <= from) throw std::invalid_argument("mspe: empty window");
    return gaps.gaps.segment(from, until - from).squaredNorm() / static_cast<double>(until - from);
}

MspeSummary summarize_mspe(const GapSeries& gaps) {
    MspeSummary s;
    s.pre_mspe = mspe(gaps, Window::pre);
    s.post_mspe = mspe(gaps, Window::post);
    if (s.pre_mspe > 0.0) {
        s.ratio = s.post_mspe / s.pre_mspe;
        s.ratio_defined = true;
    } else {
        s.ratio = std::numeric_limits<double>::infinity();
        s.ratio_defined = false;
    }
    return s;
}

}  // namespace scm
