#ifndef RISKGRID_DATASET_HPP
#define RISKGRID_DATASET_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "riskgrid/errors.hpp"
#include "riskgrid/rng.hpp"
#include "riskgrid/schema.hpp"
#include "riskgrid/tensor.hpp"

namespace riskgrid {

enum RiskState : int { kLow = 0, kMedium = 1, kHigh = 2, kAttack = 3 };

struct Sample {
    std::vector<std::optional<double>> features;
    int risk_state = kLow;

    // Binary stroke-occurrence label, derived: attack vs everything else.
    int stroke() const { return risk_state == kAttack ? 1 : 0; }
};

struct FeatureStats {
    double mean = 0.0;
    double stddev = 1.0;
    double mode = 0.0;
    std::size_t count = 0; // non-missing values seen
};

struct Dataset {
    FeatureSchema schema;
    std::vector<Sample> samples;
    std::vector<FeatureStats> stats; // filled by compute_stats

    std::size_t size() const { return samples.size(); }
    std::size_t width() const { return schema.size(); }

    std::vector<int> risk_labels() const {
        std::vector<int> y(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) y[i] = samples[i].risk_state;
        return y;
    }
    std::vector<double> stroke_labels() const {
        std::vector<double> y(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) y[i] = samples[i].stroke();
        return y;
    }

    std::array<std::size_t, 4> class_counts() const {
        std::array<std::size_t, 4> c{};
        for (const auto& s : samples) c[s.risk_state]++;
        return c;
    }

    Dataset subset(const std::vector<std::size_t>& rows) const {
        Dataset out;
        out.schema = schema;
        out.stats = stats;
        out.samples.reserve(rows.size());
        for (std::size_t r : rows) out.samples.push_back(samples[r]);
        return out;
    }

    // Dense feature matrix over selected columns; requires no missing cells.
    Tensor matrix(const std::vector<std::size_t>& cols) const {
        Tensor X = Tensor::zeros(samples.size(), cols.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            for (std::size_t j = 0; j < cols.size(); ++j) {
                const auto& v = samples[i].features[cols[j]];
                if (!v)
                    throw data_error("matrix: missing value at row " + std::to_string(i) +
                                     ", column '" + schema[cols[j]].abbrev +
                                     "' (impute first)");
                X.at(i, j) = *v;
            }
        return X;
    }

    std::vector<std::size_t> all_columns() const {
        std::vector<std::size_t> c(schema.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = i;
        return c;
    }
};

namespace detail {

inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t line_no,
                         const std::string& column) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw data_error("csv: non-numeric cell '" + cell + "' at line " +
                         std::to_string(line_no) + ", column '" + column + "'");
    return v;
}

} // namespace detail

// Header must match the schema abbreviations exactly, in order, plus a
// trailing risk_state column. Empty cells are missing values.
inline Dataset parse_csv(std::istream& in, const FeatureSchema& schema) {
    Dataset ds;
    ds.schema = schema;
    std::string line;
    if (!std::getline(in, line)) throw data_error("csv: empty file");
    auto header = detail::split_line(line);
    if (header.size() != schema.size() + 1)
        throw data_error("csv: expected " + std::to_string(schema.size() + 1) +
                         " columns, found " + std::to_string(header.size()));
    for (std::size_t i = 0; i < schema.size(); ++i)
        if (header[i] != schema[i].abbrev)
            throw data_error("csv: unknown column '" + header[i] + "' at position " +
                             std::to_string(i + 1) + ", expected '" + schema[i].abbrev + "'");
    if (header.back() != "risk_state")
        throw data_error("csv: last column must be 'risk_state', found '" + header.back() + "'");

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = detail::split_line(line);
        if (cells.size() != schema.size() + 1)
            throw data_error("csv: line " + std::to_string(line_no) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(schema.size() + 1));
        Sample s;
        s.features.resize(schema.size());
        for (std::size_t j = 0; j < schema.size(); ++j) {
            if (cells[j].empty())
                s.features[j] = std::nullopt;
            else
                s.features[j] = detail::parse_cell(cells[j], line_no, schema[j].abbrev);
        }
        double rs = detail::parse_cell(cells.back(), line_no, "risk_state");
        if (rs != 0.0 && rs != 1.0 && rs != 2.0 && rs != 3.0)
            throw data_error("csv: risk_state '" + cells.back() + "' outside 0..3 at line " +
                             std::to_string(line_no));
        s.risk_state = static_cast<int>(rs);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline Dataset load_csv(const std::string& path, const FeatureSchema& schema) {
    std::ifstream in(path);
    if (!in) throw data_error("csv: cannot open '" + path + "'");
    return parse_csv(in, schema);
}

inline void write_csv(const Dataset& ds, std::ostream& out) {
    for (std::size_t i = 0; i < ds.schema.size(); ++i) out << ds.schema[i].abbrev << ',';
    out << "risk_state\n";
    for (const auto& s : ds.samples) {
        for (std::size_t j = 0; j < ds.schema.size(); ++j) {
            if (s.features[j]) out << detail::format_double(*s.features[j]);
            out << ',';
        }
        out << s.risk_state << '\n';
    }
}

inline std::string csv_string(const Dataset& ds) {
    std::ostringstream os;
    write_csv(ds, os);
    return os.str();
}

// Per-feature mean/stddev/mode over the given rows, non-missing values only.
// Population stddev. A column with no observed value cannot be imputed.
inline std::vector<FeatureStats> compute_stats(const Dataset& ds,
                                               const std::vector<std::size_t>& rows) {
    std::vector<FeatureStats> stats(ds.width());
    for (std::size_t j = 0; j < ds.width(); ++j) {
        FeatureStats& st = stats[j];
        double sum = 0.0;
        for (std::size_t r : rows) {
            const auto& v = ds.samples[r].features[j];
            if (!v) continue;
            sum += *v;
            st.count++;
        }
        if (st.count == 0)
            throw config_error("stats: column '" + ds.schema[j].abbrev +
                               "' has no observed values in the training rows");
        st.mean = sum / double(st.count);
        double ss = 0.0;
        for (std::size_t r : rows) {
            const auto& v = ds.samples[r].features[j];
            if (!v) continue;
            double d = *v - st.mean;
            ss += d * d;
        }
        st.stddev = std::sqrt(ss / double(st.count));

        if (ds.schema[j].kind != FeatureKind::continuous) {
            // mode with smallest-value tie break
            std::vector<double> vals;
            for (std::size_t r : rows)
                if (ds.samples[r].features[j]) vals.push_back(*ds.samples[r].features[j]);
            std::sort(vals.begin(), vals.end());
            double best = vals[0];
            std::size_t best_n = 0, i = 0;
            while (i < vals.size()) {
                std::size_t k = i;
                while (k < vals.size() && vals[k] == vals[i]) ++k;
                if (k - i > best_n) {
                    best_n = k - i;
                    best = vals[i];
                }
                i = k;
            }
            st.mode = best;
        }
    }
    return stats;
}

inline std::vector<std::size_t> all_rows(const Dataset& ds) {
    std::vector<std::size_t> r(ds.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
    return r;
}

// Continuous missing cells get the training mean, categorical/binary the
// training mode. Non-missing cells are never touched.
inline Dataset impute(const Dataset& ds, const std::vector<FeatureStats>& stats) {
    Dataset out = ds;
    out.stats = stats;
    for (auto& s : out.samples)
        for (std::size_t j = 0; j < out.width(); ++j)
            if (!s.features[j])
                s.features[j] = out.schema[j].kind == FeatureKind::continuous ? stats[j].mean
                                                                              : stats[j].mode;
    return out;
}

// Z-scores continuous columns with the supplied stats; constant columns are
// centered only. Categorical and binary codes pass through untouched.
inline Dataset normalize(const Dataset& ds, const std::vector<FeatureStats>& stats) {
    Dataset out = ds;
    out.stats = stats;
    for (auto& s : out.samples)
        for (std::size_t j = 0; j < out.width(); ++j) {
            if (out.schema[j].kind != FeatureKind::continuous) continue;
            if (!s.features[j]) continue;
            double sd = stats[j].stddev > 0.0 ? stats[j].stddev : 1.0;
            s.features[j] = (*s.features[j] - stats[j].mean) / sd;
        }
    return out;
}

// Model-space baseline: the all-typical feature vector. Continuous columns
// are at their (normalized) mean, categorical/binary at the training mode.
inline std::vector<double> baseline_vector(const FeatureSchema& schema,
                                           const std::vector<FeatureStats>& stats) {
    std::vector<double> base(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j)
        base[j] = schema[j].kind == FeatureKind::continuous ? 0.0 : stats[j].mode;
    return base;
}

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Stratified by risk state: every class contributes its rounded share of
// test rows, so each class's test count is within one sample of
// n_class * test_fraction. Deterministic under the seed.
inline SplitIndices stratified_split(const Dataset& ds, double test_fraction,
                                     std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw config_error("split: test_fraction must be in (0,1)");
    std::array<std::vector<std::size_t>, 4> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[ds.samples[i].risk_state].push_back(i);

    SplitIndices out;
    for (int c = 0; c < 4; ++c) {
        auto& rows = by_class[c];
        if (rows.size() < 2)
            throw data_error("split: class " + std::to_string(c) + " has " +
                             std::to_string(rows.size()) + " samples, cannot stratify");
        auto rng = make_rng(seed, "split", static_cast<std::uint64_t>(c));
        shuffle_vec(rows, rng);
        auto n_test = static_cast<std::size_t>(
            std::llround(double(rows.size()) * test_fraction));
        n_test = std::min(n_test, rows.size() - 1);
        for (std::size_t i = 0; i < rows.size(); ++i)
            (i < n_test ? out.test : out.train).push_back(rows[i]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

} // namespace riskgrid

#endif
