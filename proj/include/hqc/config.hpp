// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/annotations.hpp"
#include "hqc/degrade.hpp"
#include "hqc/selection.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hqc {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kConfigEnvVar = "HQC_CONFIG";

struct SourceSpec {
    std::string name;  // namespace prefix of image ids, unique per config
    DatasetOrigin origin = DatasetOrigin::coco;
    std::filesystem::path annotations;
    std::filesystem::path image_dir;
};

enum class BlurScope { image, box };
enum class UnreadablePolicy { skip, fail };

struct PipelineConfig {
    std::vector<SourceSpec> sources;
    std::string alias_canonical = "person";
    std::vector<std::string> aliases;  // empty: LabelAliasMap::defaults()
    double detection_min_confidence = kDefaultDetectionMinConfidence;
    std::optional<double> oid_min_confidence;

    double blur_variance_threshold = 100.0;
    BlurScope blur_scope = BlurScope::image;
    int min_side = 384;
    double iou_threshold = 0.45;
    int output_side = 512;

    std::vector<MetricSpec> metrics{{"niqe", Direction::lower_better, std::nullopt, MetricSource::in_core}};
    double fraction = 1.0 / 3.0;
    std::optional<std::filesystem::path> external_scores;
    std::optional<std::filesystem::path> niqe_model;  // default: shipped model
    std::optional<std::filesystem::path> brisque_model;  // .svm; the .range sidecar sits beside it

    int workers = 1;
    int shard_size = 1000;
    UnreadablePolicy on_unreadable = UnreadablePolicy::skip;
    std::filesystem::path checkpoint_dir = "checkpoints";
    std::filesystem::path output_dir = "out";

    DegradationConfig degradation = DegradationConfig::defaults();

    LabelAliasMap alias_map() const;

    /// Throws ConfigError naming the offending field.
    void validate() const;

    /// Hash of every field that influences per-image shard results. Worker
    /// count, directories and selection parameters are excluded.
    std::string processing_hash() const;
};

std::string_view to_string(BlurScope s);
std::string_view to_string(UnreadablePolicy p);

/// Parses a JSON config; relative paths resolve against `base_dir`.
/// Throws ConfigError.
PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Canonical JSON form with absolute paths.
std::string pipeline_config_to_json(const PipelineConfig& cfg);

}  // namespace hqc
