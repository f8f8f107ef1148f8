// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/diagnostics.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hqc {

enum class Direction { higher_better, lower_better };
enum class MetricSource { in_core, external };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view s);
std::string_view to_string(MetricSource s);
MetricSource parse_metric_source(std::string_view s);

struct MetricSpec {
    std::string name;
    Direction direction = Direction::higher_better;
    /// Pass condition in the native direction: >= for higher_better, <= for lower_better.
    std::optional<double> threshold;
    MetricSource source = MetricSource::in_core;
};

/// Throws ConfigError on duplicate or empty names.
void validate_metric_specs(const std::vector<MetricSpec>& specs);

inline constexpr std::string_view kLaplacianColumn = "laplacian_variance";

/// Per-crop metric values. Missing cells hold NaN.
class ScoreTable {
public:
    /// Appends a row; throws DataError on a duplicate crop_id.
    std::size_t add_row(std::string crop_id);
    std::size_t rows() const noexcept { return crop_ids_.size(); }
    const std::string& crop_id(std::size_t row) const { return crop_ids_.at(row); }
    const std::vector<std::string>& crop_ids() const noexcept { return crop_ids_; }
    std::optional<std::size_t> find(std::string_view crop_id) const;

    void set(std::size_t row, std::string_view metric, double value);
    double get(std::size_t row, std::string_view metric) const;
    bool has_column(std::string_view metric) const;
    const std::vector<double>& column(std::string_view metric) const;
    std::vector<std::string> column_names() const;

    /// Populated by normalize().
    bool normalized() const noexcept { return !aggregate_.empty(); }
    const std::vector<double>& z_column(std::string_view metric) const;
    bool has_z_column(std::string_view metric) const { return z_columns_.find(metric) != z_columns_.end(); }
    const std::vector<double>& aggregate() const noexcept { return aggregate_; }

private:
    friend ScoreTable normalize(const ScoreTable&, const std::vector<MetricSpec>&);

    std::vector<std::string> crop_ids_;
    std::unordered_map<std::string, std::size_t> index_;
    std::map<std::string, std::vector<double>, std::less<>> columns_;
    std::map<std::string, std::vector<double>, std::less<>> z_columns_;
    std::vector<double> aggregate_;
};

/// Merges a CSV with header `crop_id,<metric...>`. Every expected metric must
/// appear in the header and every crop_id must already exist in the table.
/// Duplicate crop_ids are resolved last-wins with a warning. Throws DataError.
ScoreTable ingest_external_scores(ScoreTable table, std::istream& csv, const std::vector<std::string>& expected_metrics,
                                  Diagnostics& diag);

/// Writes `crop_id,<columns...>` for the given metric columns, rows in table order.
void write_scores_csv(std::ostream& out, const ScoreTable& table, const std::vector<std::string>& metrics);

/// z-scores per metric (lower_better columns negated first, population
/// statistics) and their unweighted mean as the aggregate.
/// Throws DataError with fewer than 2 rows, a missing or non-finite cell, or a
/// zero-deviation column ("degenerate metric <name>").
ScoreTable normalize(const ScoreTable& table, const std::vector<MetricSpec>& specs);

enum class CropStatus {
    selected,
    below_top_fraction,
    failed_threshold,
    failed_blur_gate,
    failed_size_gate,
    suppressed_nms,
};

std::string_view to_string(CropStatus s);
CropStatus parse_crop_status(std::string_view s);

struct CropRect {
    int x = 0;
    int y = 0;
    int side = 0;
    friend bool operator==(const CropRect&, const CropRect&) = default;
};

struct ManifestEntry {
    std::string crop_id;
    std::string source_image_id;
    std::optional<CropRect> crop;
    /// Curated 512x512 file, relative to the manifest directory; empty when not written.
    std::string hq_path;
    std::map<std::string, double> raw_scores;
    std::map<std::string, double> z_scores;
    std::optional<double> aggregate;
    std::optional<std::size_t> rank;
    CropStatus status = CropStatus::selected;
    /// Metric that failed first, in spec order, for failed_threshold.
    std::string failed_metric;
};

struct SelectionManifest {
    std::vector<ManifestEntry> entries;
};

/// Number of rows kept by the top-fraction cut, floor(fraction * n).
std::size_t top_count(double fraction, std::size_t n);

/// Ranks all rows by aggregate descending (ties by crop_id ascending), keeps
/// the first top_count rows, then selects those passing every threshold.
/// Entries are returned in rank order. Throws ConfigError when fraction is
/// outside (0, 1], DataError when the table is not normalized.
SelectionManifest select_top(const ScoreTable& table, double fraction, const std::vector<MetricSpec>& specs);

inline constexpr double kDefaultSelectionFraction = 1.0 / 3.0;

}  // namespace hqc
