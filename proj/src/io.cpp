#include "scm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace scm {

namespace {

struct CsvRow {
    size_t line_number;
    std::vector<std::string> fields;
};

std::string location(const std::string& path, size_t line) {
    return path + " line " + std::to_string(line);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

void check_label(const std::string& path, size_t line, const std::string& label) {
    if (label.empty()) {
        throw std::runtime_error(location(path, line) + ": empty label");
    }
    if (label.find('"') != std::string::npos) {
        throw std::runtime_error(location(path, line) + ": quotes are not allowed in labels");
    }
}

double parse_value(const std::string& path, size_t line, const std::string& token) {
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw std::runtime_error(location(path, line) + ": not a finite number: '" + token + "'");
    }
    return value;
}

// Reads a long-format CSV with the exact expected header; every row must
// have the same field count. CRLF endings are tolerated.
std::vector<CsvRow> read_long_csv(const std::string& path, const std::string& expected_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    const size_t n_fields = split_fields(expected_header).size();
    std::vector<CsvRow> rows;
    std::string line;
    size_t line_number = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!saw_header) {
            if (line != expected_header) {
                throw std::runtime_error(location(path, line_number) + ": expected header '" +
                                         expected_header + "', got '" + line + "'");
            }
            saw_header = true;
            continue;
        }
        if (line.empty()) continue;  // ignore trailing blank lines
        CsvRow row{line_number, split_fields(line)};
        if (row.fields.size() != n_fields) {
            throw std::runtime_error(location(path, line_number) + ": expected " +
                                     std::to_string(n_fields) + " fields, got " +
                                     std::to_string(row.fields.size()));
        }
        rows.push_back(std::move(row));
    }
    if (!saw_header) throw std::runtime_error(path + ": empty file (header required)");
    return rows;
}

bool parse_integer_label(const std::string& s, long long& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

// Distinct labels in canonical order: numeric ascending when every label is
// an integer, lexicographic otherwise.
std::vector<std::string> canonical_period_order(const std::vector<std::string>& seen) {
    std::vector<std::string> order = seen;
    bool all_numeric = true;
    std::vector<std::pair<long long, std::string>> numeric;
    for (const auto& s : order) {
        long long v = 0;
        if (!parse_integer_label(s, v)) {
            all_numeric = false;
            break;
        }
        numeric.emplace_back(v, s);
    }
    if (all_numeric) {
        std::sort(numeric.begin(), numeric.end());
        order.clear();
        for (auto& [v, s] : numeric) order.push_back(std::move(s));
    } else {
        std::sort(order.begin(), order.end());
    }
    return order;
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

// Free-text columns (failure reasons) must not break the row grammar.
std::string sanitize_field(std::string text) {
    for (char& c : text) {
        if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
    }
    return text;
}

}  // namespace

std::string format_double(double value) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
    return std::string(buffer, ptr);
}

Panel load_panel(const std::string& path, OutcomeKind kind) {
    const auto rows = read_long_csv(path, "unit,period,value");

    std::vector<std::string> units;       // first-appearance order
    std::vector<std::string> periods_seen;
    std::set<std::string> unit_set, period_set;
    std::map<std::pair<std::string, std::string>, std::pair<double, size_t>> cells;

    for (const auto& row : rows) {
        const std::string& unit = row.fields[0];
        const std::string& period = row.fields[1];
        check_label(path, row.line_number, unit);
        check_label(path, row.line_number, period);
        const double value = parse_value(path, row.line_number, row.fields[2]);

        if (unit_set.insert(unit).second) units.push_back(unit);
        if (period_set.insert(period).second) periods_seen.push_back(period);

        auto [it, inserted] = cells.insert({{unit, period}, {value, row.line_number}});
        if (!inserted) {
            throw std::runtime_error(location(path, row.line_number) + ": duplicate cell (" + unit +
                                     ", " + period + "); first seen at line " +
                                     std::to_string(it->second.second));
        }
    }
    if (units.empty()) throw std::runtime_error(path + ": no data rows");

    Panel panel;
    panel.outcome_kind = kind;
    panel.unit_ids = units;
    panel.period_ids = canonical_period_order(periods_seen);
    panel.outcomes.resize(static_cast<Eigen::Index>(units.size()),
                          static_cast<Eigen::Index>(panel.period_ids.size()));
    for (size_t j = 0; j < units.size(); ++j) {
        for (size_t t = 0; t < panel.period_ids.size(); ++t) {
            auto it = cells.find({units[j], panel.period_ids[t]});
            if (it == cells.end()) {
                throw std::runtime_error(path + ": incomplete panel: unit '" + units[j] +
                                         "' missing period '" + panel.period_ids[t] + "'");
            }
            panel.outcomes(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) =
                it->second.first;
        }
    }
    return panel;
}

CovariateTable load_covariates(const std::string& path) {
    const auto rows = read_long_csv(path, "unit,predictor,value");

    std::vector<std::string> units, predictors;
    std::set<std::string> unit_set, predictor_set;
    std::map<std::pair<std::string, std::string>, std::pair<double, size_t>> cells;

    for (const auto& row : rows) {
        const std::string& unit = row.fields[0];
        const std::string& predictor = row.fields[1];
        check_label(path, row.line_number, unit);
        check_label(path, row.line_number, predictor);
        const double value = parse_value(path, row.line_number, row.fields[2]);

        if (unit_set.insert(unit).second) units.push_back(unit);
        if (predictor_set.insert(predictor).second) predictors.push_back(predictor);

        auto [it, inserted] = cells.insert({{unit, predictor}, {value, row.line_number}});
        if (!inserted) {
            throw std::runtime_error(location(path, row.line_number) + ": duplicate cell (" + unit +
                                     ", " + predictor + "); first seen at line " +
                                     std::to_string(it->second.second));
        }
    }
    if (units.empty()) throw std::runtime_error(path + ": no data rows");

    CovariateTable table;
    table.unit_ids = units;
    table.predictor_names = predictors;
    table.values.resize(static_cast<Eigen::Index>(units.size()),
                        static_cast<Eigen::Index>(predictors.size()));
    for (size_t j = 0; j < units.size(); ++j) {
        for (size_t k = 0; k < predictors.size(); ++k) {
            auto it = cells.find({units[j], predictors[k]});
            if (it == cells.end()) {
                throw std::runtime_error(path + ": incomplete table: unit '" + units[j] +
                                         "' missing predictor '" + predictors[k] + "'");
            }
            table.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                it->second.first;
        }
    }
    return table;
}

GapSeries load_gaps(const std::string& path) {
    const auto rows = read_long_csv(path, "period,actual,synthetic,gap,window");

    GapSeries gaps;
    gaps.actual.resize(static_cast<Eigen::Index>(rows.size()));
    gaps.synthetic.resize(static_cast<Eigen::Index>(rows.size()));
    gaps.gaps.resize(static_cast<Eigen::Index>(rows.size()));
    Eigen::Index t0 = 0;
    bool saw_post = false;
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        check_label(path, row.line_number, row.fields[0]);
        gaps.period_ids.push_back(row.fields[0]);
        gaps.actual(static_cast<Eigen::Index>(i)) = parse_value(path, row.line_number, row.fields[1]);
        gaps.synthetic(static_cast<Eigen::Index>(i)) =
            parse_value(path, row.line_number, row.fields[2]);
        gaps.gaps(static_cast<Eigen::Index>(i)) = parse_value(path, row.line_number, row.fields[3]);
        if (row.fields[4] == "pre") {
            if (saw_post) {
                throw std::runtime_error(location(path, row.line_number) +
                                         ": 'pre' row after a 'post' row");
            }
            ++t0;
        } else if (row.fields[4] == "post") {
            saw_post = true;
        } else {
            throw std::runtime_error(location(path, row.line_number) +
                                     ": window must be 'pre' or 'post'");
        }
    }
    gaps.t0 = t0;
    return gaps;
}

void write_weights_csv(const std::string& path, const UnitWeights& w, const PredictorWeights& v,
                       const std::vector<std::string>& predictor_names) {
    auto out = open_for_write(path);
    out << "role,name,weight\n";
    for (size_t i = 0; i < w.donor_ids.size(); ++i) {
        out << "unit," << w.donor_ids[i] << ","
            << format_double(w.weights(static_cast<Eigen::Index>(i))) << "\n";
    }
    for (Eigen::Index k = 0; k < v.weights.size(); ++k) {
        const std::string name = static_cast<size_t>(k) < predictor_names.size()
                                     ? predictor_names[static_cast<size_t>(k)]
                                     : "p" + std::to_string(k + 1);
        out << "predictor," << name << "," << format_double(v.weights(k)) << "\n";
    }
}

void write_gaps_csv(const std::string& path, const GapSeries& gaps) {
    auto out = open_for_write(path);
    out << "period,actual,synthetic,gap,window\n";
    for (size_t t = 0; t < gaps.period_ids.size(); ++t) {
        const Eigen::Index i = static_cast<Eigen::Index>(t);
        out << gaps.period_ids[t] << "," << format_double(gaps.actual(i)) << ","
            << format_double(gaps.synthetic(i)) << "," << format_double(gaps.gaps(i)) << ","
            << (i < gaps.t0 ? "pre" : "post") << "\n";
    }
}

void write_placebo_csv(const std::string& path, const PlaceboTable& table) {
    auto out = open_for_write(path);
    out << "unit,pre_mspe,post_mspe,post_pre_ratio,rank,p_value,flag\n";
    for (const auto& row : table.rows) {
        out << sanitize_field(row.unit) << "," << format_double(row.pre_mspe) << ","
            << format_double(row.post_mspe) << ","
            << (row.ratio_defined ? format_double(row.ratio) : "inf") << "," << row.rank << ","
            << format_double(row.p_value) << "," << sanitize_field(row.flag_reason) << "\n";
    }
}

void write_loo_csv(const std::string& path, const std::vector<LooResult>& results) {
    auto out = open_for_write(path);
    out << "omitted_unit,period,actual,synthetic,gap\n";
    for (const auto& r : results) {
        for (size_t t = 0; t < r.gaps.period_ids.size(); ++t) {
            const Eigen::Index i = static_cast<Eigen::Index>(t);
            out << r.omitted_unit << "," << r.gaps.period_ids[t] << ","
                << format_double(r.gaps.actual(i)) << "," << format_double(r.gaps.synthetic(i))
                << "," << format_double(r.gaps.gaps(i)) << "\n";
        }
    }
}

void write_specsearch_csv(const std::string& path, const SpecSearchResult& result) {
    auto out = open_for_write(path);
    out << "specification,scheme,with_covariates,treated_rank,p_value,treated_post_mspe,flag\n";
    for (const auto& row : result.rows) {
        out << row.label << "," << scheme_name(row.scheme) << ","
            << (row.include_covariates ? "true" : "false") << "," << row.treated_rank << ","
            << format_double(row.p_value) << "," << format_double(row.treated_post_mspe) << ","
            << sanitize_field(row.flag_reason) << "\n";
    }
}

void write_diff_csv(const std::string& path, const DiffEffects& diff) {
    auto out = open_for_write(path);
    out << "event_week,diff\n";
    for (size_t i = 0; i < diff.event_weeks.size(); ++i) {
        out << diff.event_weeks[i] << "," << format_double(diff.diffs(static_cast<Eigen::Index>(i)))
            << "\n";
    }
}

}  // namespace scm
