// SPDX-License-Identifier: Apache-2.0

#include "hqc/cli.hpp"

#include "hqc/config.hpp"
#include "hqc/degrade.hpp"
#include "hqc/error.hpp"
#include "hqc/image_io.hpp"
#include "hqc/manifest.hpp"
#include "hqc/niqe.hpp"
#include "hqc/orchestrator.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

namespace hqc {

namespace {

namespace fs = std::filesystem;

struct Flags {
    std::string config;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    std::optional<double> fraction;
    std::optional<double> blur_threshold;
    std::optional<int> min_side;
    std::optional<double> iou_threshold;
    std::string out;
    std::string checkpoints;
    bool resume = false;
    std::optional<std::size_t> stop_after_shards;

    std::string csv;
    std::string manifest;
    std::string degrade_config;
    bool x4 = false;
    std::string images;
    int patch_size = kNiqeDefaultPatch;
    double sharpness = kNiqeDefaultSharpness;
    std::string stats;
    std::vector<std::string> holdout_sources;
    double holdout_fraction = 0.0;
    std::string log_level = "info";
};

enum FlagSet : unsigned {
    kConfig = 1u << 0,
    kWorkers = 1u << 1,
    kDirs = 1u << 2,
    kGeometry = 1u << 3,
    kFraction = 1u << 4,
    kResume = 1u << 5,
    kStop = 1u << 6,
    kSeed = 1u << 7,
};

void add_flags(CLI::App* app, Flags& f, unsigned set) {
    if (set & kConfig) {
        app->add_option("--config", f.config,
                        std::string("Pipeline config (JSON); default: $") + kConfigEnvVar);
    }
    if (set & kWorkers) {
        app->add_option("--workers", f.workers, "Worker threads [config: workers, default 1]")
            ->check(CLI::PositiveNumber);
    }
    if (set & kSeed) {
        app->add_option("--seed", f.seed, "Random seed [config: degradation.seed, default 0]");
    }
    if (set & kFraction) {
        app->add_option("--fraction", f.fraction, "Top fraction kept before thresholds [config: fraction, default 1/3]")
            ->check(CLI::Range(0.0, 1.0).description("in (0, 1]"))
            ->check(CLI::Validator(
                [](std::string& s) { return std::stod(s) > 0.0 ? std::string() : std::string("must be > 0"); },
                "", "positive"));
    }
    if (set & kGeometry) {
        app->add_option("--blur-threshold", f.blur_threshold,
                        "Laplacian-variance blur gate, pass iff variance >= value [config: "
                        "blur_variance_threshold, default 100]")
            ->check(CLI::PositiveNumber);
        app->add_option("--min-side", f.min_side, "Minimum square crop side in pixels [config: min_side, default 384]")
            ->check(CLI::PositiveNumber);
        app->add_option("--iou-threshold", f.iou_threshold,
                        "NMS suppresses a crop when IoU exceeds value [config: iou_threshold, default 0.45]")
            ->check(CLI::Range(0.0, 1.0));
    }
    if (set & kDirs) {
        app->add_option("--out", f.out, "Output directory [config: output_dir, default out]");
        app->add_option("--checkpoints", f.checkpoints, "Checkpoint directory [config: checkpoint_dir, default checkpoints]");
    }
    if (set & kResume) {
        app->add_flag("--resume", f.resume, "Skip shards completed by an earlier run with the same config hash");
    }
    if (set & kStop) {
        app->add_option("--stop-after-shards", f.stop_after_shards,
                        "Stop after completing this many shards (resume later)");
    }
}

PipelineConfig load_config(const Flags& f) {
    std::string path = f.config;
    if (path.empty()) {
        if (const char* env = std::getenv(kConfigEnvVar)) path = env;
    }
    if (path.empty()) throw ConfigError(std::string("--config is required (or set ") + kConfigEnvVar + ")");
    PipelineConfig cfg = load_pipeline_config(path);
    if (f.workers) cfg.workers = *f.workers;
    if (f.seed) cfg.degradation.seed = *f.seed;
    if (f.fraction) cfg.fraction = *f.fraction;
    if (f.blur_threshold) cfg.blur_variance_threshold = *f.blur_threshold;
    if (f.min_side) cfg.min_side = *f.min_side;
    if (f.iou_threshold) cfg.iou_threshold = *f.iou_threshold;
    if (!f.out.empty()) cfg.output_dir = fs::absolute(f.out).lexically_normal();
    if (!f.checkpoints.empty()) cfg.checkpoint_dir = fs::absolute(f.checkpoints).lexically_normal();
    cfg.validate();
    return cfg;
}

void log_diagnostics(const Diagnostics& diag) {
    const auto& w = diag.warnings();
    const std::size_t shown = std::min<std::size_t>(w.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) spdlog::warn("{}", w[i]);
    if (w.size() > shown) spdlog::warn("... {} more warning(s)", w.size() - shown);
    for (const auto& [k, v] : diag.counters()) spdlog::debug("counter {} = {}", k, v);
}

int cmd_ingest(const Flags& f) {
    const auto cfg = load_config(f);
    Diagnostics diag;
    FunnelStats stats;
    const auto records = ingest_sources(cfg, diag, &stats);
    fs::create_directories(cfg.output_dir);
    std::ofstream out(cfg.output_dir / "records.jsonl", std::ios::binary);
    if (!out) throw DataError("cannot write " + (cfg.output_dir / "records.jsonl").string());
    for (const auto& r : records) {
        nlohmann::ordered_json boxes = nlohmann::ordered_json::array();
        for (const auto& b : r.person_boxes) boxes.push_back({b.x, b.y, b.w, b.h});
        out << nlohmann::ordered_json{{"image_id", r.image_id},
                                      {"image_path", r.image_path},
                                      {"origin", to_string(r.dataset_origin)},
                                      {"width", r.width},
                                      {"height", r.height},
                                      {"boxes", boxes},
                                      {"confidences", r.confidences}}
                   .dump()
            << '\n';
    }
    log_diagnostics(diag);
    spdlog::info("ingested {} person-labeled of {} collected images", stats.person_labeled, stats.collected);
    return kExitOk;
}

int cmd_gate(const Flags& f) {
    const auto cfg = load_config(f);
    Diagnostics diag;
    write_gate_report(cfg, diag);
    log_diagnostics(diag);
    spdlog::info("wrote {}", (cfg.output_dir / "gate.jsonl").string());
    return kExitOk;
}

int cmd_crop(const Flags& f) {
    const auto cfg = load_config(f);
    Diagnostics diag;
    write_crop_report(cfg, diag);
    log_diagnostics(diag);
    spdlog::info("wrote {}", (cfg.output_dir / "crops.jsonl").string());
    return kExitOk;
}

int cmd_score(const Flags& f) {
    const auto cfg = load_config(f);
    Diagnostics diag;
    FunnelStats stats;
    RunOptions opts;
    opts.resume = f.resume;
    opts.stop_after_shards = f.stop_after_shards;
    const bool done = score_shards(cfg, opts, diag, stats);
    log_diagnostics(diag);
    if (done) {
        spdlog::info("scoring complete; candidates in {}", (cfg.output_dir / "candidates.tsv").string());
    } else {
        spdlog::info("scoring stopped early; continue with --resume");
    }
    return kExitOk;
}

int cmd_ingest_scores(const Flags& f) {
    if (!fs::exists(f.csv)) throw DataError("score CSV not found: " + f.csv);
    const auto cfg = load_config(f);
    Diagnostics diag;
    ingest_scores_file(cfg, f.csv, diag);
    log_diagnostics(diag);
    spdlog::info("stored external scores for selection");
    return kExitOk;
}

int report_result(const RunResult& r, const PipelineConfig& cfg, std::ostream& out) {
    log_diagnostics(r.diag);
    if (!r.completed) {
        spdlog::info("run stopped early; continue with `resume`");
        return kExitOk;
    }
    out << r.stats.to_table();
    spdlog::info("manifest: {}", (cfg.output_dir / "manifest.jsonl").string());
    return kExitOk;
}

int cmd_select(const Flags& f, std::ostream& out) {
    const auto cfg = load_config(f);
    return report_result(select_from_checkpoints(cfg), cfg, out);
}

int cmd_run(const Flags& f, bool resume, std::ostream& out) {
    const auto cfg = load_config(f);
    RunOptions opts;
    opts.resume = resume || f.resume;
    opts.stop_after_shards = f.stop_after_shards;
    return report_result(run_pipeline(cfg, opts), cfg, out);
}

int cmd_report(const Flags& f, std::ostream& out) {
    fs::path stats_path = f.stats;
    if (stats_path.empty()) stats_path = load_config(f).output_dir / "stats.json";
    std::ifstream in(stats_path);
    if (!in) throw DataError("cannot open stats " + stats_path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    out << FunnelStats::from_json(ss.str()).to_table();
    return kExitOk;
}

int cmd_degrade(const Flags& f) {
    DegradationConfig dcfg = DegradationConfig::defaults();
    fs::path manifest_path = f.manifest;
    fs::path out_dir = f.out;
    int workers = f.workers.value_or(1);
    if (!f.config.empty() || std::getenv(kConfigEnvVar)) {
        const auto cfg = load_config(f);
        dcfg = cfg.degradation;
        if (manifest_path.empty()) manifest_path = cfg.output_dir / "manifest.jsonl";
        if (out_dir.empty()) out_dir = cfg.output_dir / "pairs";
        if (!f.workers) workers = cfg.workers;
    }
    if (!f.degrade_config.empty()) {
        std::ifstream in(f.degrade_config);
        if (!in) throw ConfigError("cannot open --degrade-config " + f.degrade_config);
        std::stringstream ss;
        ss << in.rdbuf();
        dcfg = parse_degradation_config(ss.str(), dcfg);
    }
    if (f.seed) dcfg.seed = *f.seed;
    if (f.x4) dcfg.final_stage.output_size = dcfg.input_size / 4;
    dcfg.validate();
    if (manifest_path.empty()) throw ConfigError("--manifest is required without --config");
    if (out_dir.empty()) throw ConfigError("--out is required without --config");
    const auto manifest = load_manifest(manifest_path);
    Diagnostics diag;
    const auto pairs = build_pairs(manifest, fs::absolute(manifest_path).parent_path(), dcfg, out_dir, workers, diag);
    log_diagnostics(diag);
    spdlog::info("wrote {} pair(s) to {}", pairs.size(), out_dir.string());
    return kExitOk;
}

int cmd_niqe_fit(const Flags& f) {
    if (f.images.empty() || f.out.empty()) throw ConfigError("niqe-fit needs --images and --out");
    if (!fs::is_directory(f.images)) throw DataError("--images is not a directory: " + f.images);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(f.images)) {
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<ImageBuffer> images;
    for (const auto& p : files) images.push_back(read_image(p));
    spdlog::info("fitting NIQE model on {} image(s)", images.size());
    const NiqeModel model = niqe_fit(images, f.patch_size, f.sharpness);
    save_niqe_model(f.out, model);
    spdlog::info("wrote {}", f.out);
    return kExitOk;
}

int cmd_holdout_split(const Flags& f) {
    if (f.manifest.empty() || f.out.empty()) throw ConfigError("holdout-split needs --manifest and --out");
    const auto manifest = load_manifest(f.manifest);
    const auto split = holdout_split(manifest, f.holdout_sources, f.holdout_fraction, f.seed.value_or(0));
    fs::create_directories(f.out);
    save_manifest(fs::path(f.out) / "train.jsonl", split.train);
    save_manifest(fs::path(f.out) / "holdout.jsonl", split.holdout);
    spdlog::info("split {} entries: {} train, {} holdout", manifest.entries.size(), split.train.entries.size(),
                 split.holdout.entries.size());
    return kExitOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("hqcurate", sink);
    logger->set_pattern("[%l] %v");
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);
    struct Restore {
        std::shared_ptr<spdlog::logger> p;
        ~Restore() { spdlog::set_default_logger(p); }
    } restore{previous};

    CLI::App app("Curate high-quality human crops from detection corpora", "hqcurate");
    app.require_subcommand(1);
    app.fallthrough();
    app.get_formatter()->column_width(34);
    Flags f;
    app.add_option("--log-level", f.log_level, "Log level: trace, debug, info, warn, error, off")
        ->capture_default_str()
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    auto* ingest = app.add_subcommand("ingest", "Parse annotation sources into records.jsonl");
    add_flags(ingest, f, kConfig | kDirs);
    auto* gate = app.add_subcommand("gate", "Blur-gate every image and write gate.jsonl");
    add_flags(gate, f, kConfig | kWorkers | kDirs | kGeometry);
    auto* crop = app.add_subcommand("crop", "Squarify, size-gate, NMS and write 512x512 crops plus crops.jsonl");
    add_flags(crop, f, kConfig | kWorkers | kDirs | kGeometry);
    auto* score = app.add_subcommand("score", "Run the fused per-image stages into shard checkpoints");
    add_flags(score, f, kConfig | kWorkers | kDirs | kGeometry | kResume | kStop);
    auto* ingest_scores = app.add_subcommand("ingest-scores", "Validate and store an external score CSV");
    add_flags(ingest_scores, f, kConfig | kDirs);
    ingest_scores->add_option("--csv", f.csv, "CSV with header crop_id,<metric...>")->required();
    auto* select = app.add_subcommand("select", "Normalize scores and select the curated subset");
    add_flags(select, f, kConfig | kDirs | kFraction);
    auto* degrade_cmd = app.add_subcommand("degrade", "Synthesize LQ counterparts for manifest entries");
    add_flags(degrade_cmd, f, kConfig | kWorkers | kSeed);
    degrade_cmd->add_option("--manifest", f.manifest, "Selection manifest [default: <output_dir>/manifest.jsonl]");
    degrade_cmd->add_option("--out", f.out, "Pair output directory [default: <output_dir>/pairs]");
    degrade_cmd->add_option("--degrade-config", f.degrade_config, "JSON overriding degradation parameters");
    degrade_cmd->add_flag("--x4", f.x4, "Emit LQ at a quarter of the HQ side instead of 512");
    auto* fit = app.add_subcommand("niqe-fit", "Fit a NIQE pristine model from a directory of images");
    fit->add_option("--images", f.images, "Directory of pristine PNG/JPEG images")->required();
    fit->add_option("--out", f.out, "Model file to write")->required();
    fit->add_option("--patch-size", f.patch_size, "Patch side in pixels")->capture_default_str();
    fit->add_option("--sharpness", f.sharpness, "Fraction of sharpest patches kept per image")->capture_default_str();
    auto* report = app.add_subcommand("report", "Print the funnel table of a finished run");
    add_flags(report, f, kConfig);
    report->add_option("--stats", f.stats, "stats.json to read [default: <output_dir>/stats.json]");
    auto* run = app.add_subcommand("run", "Full pipeline: ingest, gate, crop, score, select");
    add_flags(run, f, kConfig | kWorkers | kDirs | kGeometry | kFraction | kResume | kStop);
    auto* resume = app.add_subcommand("resume", "Continue an interrupted run from its checkpoints");
    add_flags(resume, f, kConfig | kWorkers | kDirs | kGeometry | kFraction | kStop);
    auto* split = app.add_subcommand("holdout-split", "Split a manifest into source-disjoint train/holdout sets");
    add_flags(split, f, kSeed);
    split->add_option("--manifest", f.manifest, "Manifest to split")->required();
    split->add_option("--out", f.out, "Directory for train.jsonl and holdout.jsonl")->required();
    split->add_option("--holdout-sources", f.holdout_sources, "Source names sent wholly to the holdout");
    split->add_option("--holdout-fraction", f.holdout_fraction, "Additional hashed fraction of source images")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfigError;
    }
    logger->set_level(spdlog::level::from_str(f.log_level));

    try {
        if (*ingest) return cmd_ingest(f);
        if (*gate) return cmd_gate(f);
        if (*crop) return cmd_crop(f);
        if (*score) return cmd_score(f);
        if (*ingest_scores) return cmd_ingest_scores(f);
        if (*select) return cmd_select(f, out);
        if (*degrade_cmd) return cmd_degrade(f);
        if (*fit) return cmd_niqe_fit(f);
        if (*report) return cmd_report(f, out);
        if (*run) return cmd_run(f, false, out);
        if (*resume) return cmd_run(f, true, out);
        if (*split) return cmd_holdout_split(f);
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kExitConfigError;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitDataError;
    }
    return kExitConfigError;
}

}  // namespace hqc
