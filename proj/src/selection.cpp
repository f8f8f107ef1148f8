// SPDX-License-Identifier: Apache-2.0

#include "hqc/selection.hpp"

#include "hqc/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace hqc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace

std::string_view to_string(Direction d) {
    return d == Direction::higher_better ? "higher_better" : "lower_better";
}

Direction parse_direction(std::string_view s) {
    if (s == "higher_better") return Direction::higher_better;
    if (s == "lower_better") return Direction::lower_better;
    throw ConfigError("unknown metric direction '" + std::string(s) + "'");
}

std::string_view to_string(MetricSource s) {
    return s == MetricSource::in_core ? "in_core" : "external";
}

MetricSource parse_metric_source(std::string_view s) {
    if (s == "in_core") return MetricSource::in_core;
    if (s == "external") return MetricSource::external;
    throw ConfigError("unknown metric source '" + std::string(s) + "'");
}

void validate_metric_specs(const std::vector<MetricSpec>& specs) {
    std::set<std::string, std::less<>> names;
    for (const auto& s : specs) {
        if (s.name.empty()) throw ConfigError("metric name must not be empty");
        if (!names.insert(s.name).second) throw ConfigError("duplicate metric '" + s.name + "'");
        if (s.threshold && !std::isfinite(*s.threshold)) {
            throw ConfigError("threshold for metric '" + s.name + "' must be finite");
        }
    }
}

std::size_t ScoreTable::add_row(std::string crop_id) {
    if (index_.count(crop_id)) throw DataError("duplicate crop_id '" + crop_id + "'");
    const std::size_t row = crop_ids_.size();
    index_.emplace(crop_id, row);
    crop_ids_.push_back(std::move(crop_id));
    for (auto& [name, col] : columns_) col.push_back(kNaN);
    z_columns_.clear();
    aggregate_.clear();
    return row;
}

std::optional<std::size_t> ScoreTable::find(std::string_view crop_id) const {
    const auto it = index_.find(std::string(crop_id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void ScoreTable::set(std::size_t row, std::string_view metric, double value) {
    if (row >= crop_ids_.size()) throw std::out_of_range("ScoreTable::set: row out of range");
    auto it = columns_.find(metric);
    if (it == columns_.end()) {
        it = columns_.emplace(std::string(metric), std::vector<double>(crop_ids_.size(), kNaN)).first;
    }
    it->second[row] = value;
}

double ScoreTable::get(std::size_t row, std::string_view metric) const {
    const auto it = columns_.find(metric);
    if (it == columns_.end() || row >= crop_ids_.size()) return kNaN;
    return it->second[row];
}

bool ScoreTable::has_column(std::string_view metric) const {
    return columns_.find(metric) != columns_.end();
}

const std::vector<double>& ScoreTable::column(std::string_view metric) const {
    const auto it = columns_.find(metric);
    if (it == columns_.end()) throw DataError("no column '" + std::string(metric) + "'");
    return it->second;
}

std::vector<std::string> ScoreTable::column_names() const {
    std::vector<std::string> out;
    for (const auto& [name, col] : columns_) out.push_back(name);
    return out;
}

const std::vector<double>& ScoreTable::z_column(std::string_view metric) const {
    const auto it = z_columns_.find(metric);
    if (it == z_columns_.end()) throw DataError("no normalized column '" + std::string(metric) + "'");
    return it->second;
}

ScoreTable ingest_external_scores(ScoreTable table, std::istream& csv, const std::vector<std::string>& expected_metrics,
                                  Diagnostics& diag) {
    std::string line;
    if (!std::getline(csv, line)) throw DataError("score CSV is empty");
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "crop_id") throw DataError("score CSV header must start with crop_id");
    for (const auto& m : expected_metrics) {
        if (std::find(header.begin() + 1, header.end(), m) == header.end()) {
            throw DataError("score CSV is missing expected metric column '" + m + "'");
        }
    }
    std::set<std::string> header_set(header.begin(), header.end());
    if (header_set.size() != header.size()) throw DataError("score CSV header has duplicate columns");

    std::vector<std::string> unknown;
    std::set<std::string> seen;
    std::size_t line_no = 1;
    struct Pending {
        std::size_t row;
        std::vector<double> values;
    };
    std::vector<Pending> pending;
    while (std::getline(csv, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("score CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(header.size()));
        }
        const auto row = table.find(cells[0]);
        if (!row) {
            unknown.push_back(cells[0]);
            continue;
        }
        if (!seen.insert(cells[0]).second) {
            diag.warn("duplicate crop_id '" + cells[0] + "' in score CSV, last row wins");
        }
        Pending p{*row, {}};
        for (std::size_t c = 1; c < cells.size(); ++c) {
            double v;
            if (!parse_double(cells[c], v) || !std::isfinite(v)) {
                throw DataError("score CSV line " + std::to_string(line_no) + ": invalid value '" + cells[c] +
                                "' for " + header[c]);
            }
            p.values.push_back(v);
        }
        pending.push_back(std::move(p));
    }
    if (!unknown.empty()) {
        std::string msg = "score CSV references " + std::to_string(unknown.size()) + " unknown crop_id(s):";
        for (std::size_t i = 0; i < unknown.size() && i < 20; ++i) msg += " " + unknown[i];
        if (unknown.size() > 20) msg += " ...";
        throw DataError(msg);
    }
    for (const auto& p : pending) {
        for (std::size_t c = 0; c < p.values.size(); ++c) table.set(p.row, header[c + 1], p.values[c]);
    }
    return table;
}

void write_scores_csv(std::ostream& out, const ScoreTable& table, const std::vector<std::string>& metrics) {
    out << "crop_id";
    for (const auto& m : metrics) out << ',' << m;
    out << '\n';
    std::ostringstream cell;
    cell.precision(17);
    for (std::size_t r = 0; r < table.rows(); ++r) {
        out << table.crop_id(r);
        for (const auto& m : metrics) {
            cell.str({});
            cell << table.get(r, m);
            out << ',' << cell.str();
        }
        out << '\n';
    }
}

ScoreTable normalize(const ScoreTable& table, const std::vector<MetricSpec>& specs) {
    validate_metric_specs(specs);
    if (specs.empty()) throw ConfigError("normalize: no metrics configured");
    const std::size_t n = table.rows();
    if (n < 2) throw DataError("normalize: need at least 2 rows, got " + std::to_string(n));

    ScoreTable out = table;
    out.z_columns_.clear();
    out.aggregate_.assign(n, 0.0);
    for (const auto& spec : specs) {
        if (!table.has_column(spec.name)) throw DataError("missing metric column '" + spec.name + "'");
        const auto& raw = table.column(spec.name);
        const double sign = spec.direction == Direction::lower_better ? -1.0 : 1.0;
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(raw[i])) {
                throw DataError("metric '" + spec.name + "' has no finite value for " + table.crop_id(i));
            }
            v[i] = sign * raw[i];
        }
        const double mu = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double x : v) ss += (x - mu) * (x - mu);
        const double sigma = std::sqrt(ss / static_cast<double>(n));
        if (!(sigma > 0.0)) throw DataError("degenerate metric " + spec.name);
        for (auto& x : v) x = (x - mu) / sigma;
        for (std::size_t i = 0; i < n; ++i) out.aggregate_[i] += v[i];
        out.z_columns_.emplace(spec.name, std::move(v));
    }
    for (auto& a : out.aggregate_) a /= static_cast<double>(specs.size());
    return out;
}

std::string_view to_string(CropStatus s) {
    switch (s) {
        case CropStatus::selected: return "selected";
        case CropStatus::below_top_fraction: return "below_top_fraction";
        case CropStatus::failed_threshold: return "failed_threshold";
        case CropStatus::failed_blur_gate: return "failed_blur_gate";
        case CropStatus::failed_size_gate: return "failed_size_gate";
        case CropStatus::suppressed_nms: return "suppressed_nms";
    }
    return "unknown";
}

CropStatus parse_crop_status(std::string_view s) {
    for (auto st : {CropStatus::selected, CropStatus::below_top_fraction, CropStatus::failed_threshold,
                    CropStatus::failed_blur_gate, CropStatus::failed_size_gate, CropStatus::suppressed_nms}) {
        if (to_string(st) == s) return st;
    }
    throw DataError("unknown crop status '" + std::string(s) + "'");
}

std::size_t top_count(double fraction, std::size_t n) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("--fraction must lie in (0, 1], got " + std::to_string(fraction));
    }
    return std::min(n, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
}

SelectionManifest select_top(const ScoreTable& table, double fraction, const std::vector<MetricSpec>& specs) {
    const std::size_t n = table.rows();
    const std::size_t k = top_count(fraction, n);
    if (!table.normalized()) throw DataError("select_top: table is not normalized");

    const auto& agg = table.aggregate();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (agg[a] != agg[b]) return agg[a] > agg[b];
        return table.crop_id(a) < table.crop_id(b);
    });

    SelectionManifest m;
    m.entries.reserve(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t r = order[pos];
        ManifestEntry e;
        e.crop_id = table.crop_id(r);
        e.aggregate = agg[r];
        e.rank = pos + 1;
        for (const auto& spec : specs) {
            e.raw_scores[spec.name] = table.get(r, spec.name);
            if (table.has_z_column(spec.name)) e.z_scores[spec.name] = table.z_column(spec.name)[r];
        }
        if (table.has_column(kLaplacianColumn) && !e.raw_scores.count(std::string(kLaplacianColumn))) {
            const double lv = table.get(r, kLaplacianColumn);
            if (std::isfinite(lv)) e.raw_scores[std::string(kLaplacianColumn)] = lv;
        }
        if (pos >= k) {
            e.status = CropStatus::below_top_fraction;
        } else {
            e.status = CropStatus::selected;
            for (const auto& spec : specs) {
                if (!spec.threshold) continue;
                const double v = table.get(r, spec.name);
                const bool pass =
                    spec.direction == Direction::higher_better ? v >= *spec.threshold : v <= *spec.threshold;
                if (!pass) {
                    e.status = CropStatus::failed_threshold;
                    e.failed_metric = spec.name;
                    break;
                }
            }
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

}  // namespace hqc
