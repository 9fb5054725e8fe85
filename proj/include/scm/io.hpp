#pragma once

#include "scm/estimator.hpp"
#include "scm/panel.hpp"
#include "scm/placebo.hpp"
#include "scm/robustness.hpp"
#include "scm/solver.hpp"

#include <string>
#include <vector>

namespace scm {

/// Long-format CSV loaders. Files are UTF-8 with a header row, comma
/// separated, dot-decimal numbers. Every malformed row, duplicate cell, and
/// non-numeric value is reported with its line number; an incomplete panel
/// (missing unit-period cells) is an error.
///
/// Panel schema: unit,period,value. Unit order follows first appearance;
/// periods sort numerically when every label parses as an integer,
/// lexicographically otherwise.
Panel load_panel(const std::string& path, OutcomeKind kind = OutcomeKind::share);

/// Covariate schema: unit,predictor,value. Predictor order follows first
/// appearance.
CovariateTable load_covariates(const std::string& path);

/// Reads back a gaps.csv written by write_gaps_csv, bit-exactly.
GapSeries load_gaps(const std::string& path);

/// Full-precision rendering (round-trips through load without loss).
std::string format_double(double value);

void write_weights_csv(const std::string& path, const UnitWeights& w,
                       const PredictorWeights& v, const std::vector<std::string>& predictor_names);
void write_gaps_csv(const std::string& path, const GapSeries& gaps);
void write_placebo_csv(const std::string& path, const PlaceboTable& table);
void write_loo_csv(const std::string& path, const std::vector<LooResult>& results);
void write_specsearch_csv(const std::string& path, const SpecSearchResult& result);
void write_diff_csv(const std::string& path, const DiffEffects& diff);

}  // namespace scm
