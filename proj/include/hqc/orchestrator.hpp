// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/annotations.hpp"
#include "hqc/brisque.hpp"
#include "hqc/config.hpp"
#include "hqc/diagnostics.hpp"
#include "hqc/niqe.hpp"
#include "hqc/selection.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hqc {

struct FunnelStats {
    std::size_t collected = 0;
    std::size_t person_labeled = 0;
    std::size_t passed_blur_gate = 0;
    std::size_t boxes_total = 0;
    std::size_t boxes_after_size_gate = 0;
    std::size_t crops_after_nms = 0;
    std::size_t scored = 0;
    std::size_t top_fraction = 0;
    std::size_t selected = 0;
    std::map<std::string, std::size_t> reasons;
    std::map<std::string, double> stage_seconds;

    /// collected >= person_labeled >= passed_blur_gate and
    /// boxes_total >= boxes_after_size_gate >= crops_after_nms >= scored >=
    /// top_fraction >= selected.
    bool monotone() const;

    std::string to_json() const;
    static FunnelStats from_json(const std::string& text);
    /// Plain-text funnel table, one stage per line.
    std::string to_table() const;
};

/// Parses every configured source. Image ids are namespaced as
/// "<source name>:<id>" and image paths resolved against the source's image
/// directory. Records are returned in source order, then parse order.
/// Fills `collected` and `person_labeled`.
std::vector<SourceRecord> ingest_sources(const PipelineConfig& cfg, Diagnostics& diag, FunnelStats* stats = nullptr);

/// Models shared read-only by all workers.
struct ScoringResources {
    std::optional<NiqeModel> niqe;
    std::optional<SvrModel> brisque;

    /// Loads the models required by the configured in-core metrics.
    static ScoringResources load(const PipelineConfig& cfg);
};

enum class ProcessDepth { gate, crop, score };

enum class CandidateStatus { scored, score_failed, failed_blur_gate, failed_size_gate, suppressed_nms, cropped };

struct CandidateResult {
    std::string crop_id;  // "<image_id>#<box index>"
    int box_index = 0;
    CropRect rect;
    CandidateStatus status = CandidateStatus::scored;
    double gate_value = 0.0;  // Laplacian variance that decided the blur gate
    std::map<std::string, double> metrics;
    std::string hq_path;  // relative to the output directory
};

struct ImageResult {
    std::string image_id;
    bool readable = true;
    double laplacian_variance = 0.0;
    bool passed_blur_gate = false;
    std::size_t boxes = 0;
    std::vector<CandidateResult> candidates;
    Diagnostics diag;
};

/// Fused per-image stages: decode, blur gate, squarify, size gate, NMS, then
/// (depth >= crop) crop + resize written to `<output_dir>/crops`, then
/// (depth == score) in-core metrics. Unreadable images are reported with
/// readable = false under the skip policy and throw DataError under fail.
ImageResult process_image(const SourceRecord& record, const PipelineConfig& cfg, const ScoringResources& res,
                          ProcessDepth depth);

/// File name (without directory) used for a crop's 512x512 file.
std::string crop_file_name(const std::string& crop_id);

struct RunOptions {
    bool resume = false;
    /// Stop after this many shards have been completed in this invocation.
    std::optional<std::size_t> stop_after_shards;
};

struct RunResult {
    bool completed = false;
    SelectionManifest manifest;
    FunnelStats stats;
    Diagnostics diag;
};

/// Scores every shard into the checkpoint directory (skipping completed
/// shards when resuming) and writes `<output_dir>/candidates.tsv`.
/// Returns false when stopped early. Throws ConfigError when resuming against
/// checkpoints written with a different processing hash.
bool score_shards(const PipelineConfig& cfg, const RunOptions& opts, Diagnostics& diag, FunnelStats& stats);

/// Global barrier: reads all shard results, merges external scores, runs
/// normalize + select_top and writes manifest.jsonl, stats.json, funnel.txt
/// and curated/ copies into the output directory.
RunResult select_from_checkpoints(const PipelineConfig& cfg, FunnelStats stats = {});

/// score_shards followed by select_from_checkpoints.
RunResult run_pipeline(const PipelineConfig& cfg, const RunOptions& opts = {});
RunResult resume_pipeline(const PipelineConfig& cfg, RunOptions opts = {});

/// Blur-gate report `<output_dir>/gate.jsonl`, one line per readable image.
void write_gate_report(const PipelineConfig& cfg, Diagnostics& diag);
/// Geometry + crop files, `<output_dir>/crops.jsonl` with one line per candidate.
void write_crop_report(const PipelineConfig& cfg, Diagnostics& diag);

/// Validates a score CSV against the scored candidates in the checkpoint and
/// stores it as `<checkpoint_dir>/external_scores.csv` for later selection.
void ingest_scores_file(const PipelineConfig& cfg, const std::filesystem::path& csv, Diagnostics& diag);

struct HoldoutSplit {
    SelectionManifest train;
    SelectionManifest holdout;
};

/// Source-disjoint split: entries whose source name (prefix of
/// source_image_id) is listed go to the holdout, and additionally entries
/// whose source image hashes below `fraction`. All crops of one source image
/// land on the same side.
HoldoutSplit holdout_split(const SelectionManifest& manifest, const std::vector<std::string>& holdout_sources,
                           double fraction, std::uint64_t seed);

}  // namespace hqc
