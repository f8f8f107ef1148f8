// SPDX-License-Identifier: Apache-2.0

#include "hqc/orchestrator.hpp"

#include "hqc/boxgeom.hpp"
#include "hqc/error.hpp"
#include "hqc/image_io.hpp"
#include "hqc/keyed_rng.hpp"
#include "hqc/manifest.hpp"
#include "hqc/parallel.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace hqc {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr const char* kCheckpointSchema = "hqc.checkpoint/1";
constexpr const char* kShardSchema = "hqc.shard/1";

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw DataError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string_view to_string(CandidateStatus s) {
    switch (s) {
        case CandidateStatus::scored: return "scored";
        case CandidateStatus::score_failed: return "score_failed";
        case CandidateStatus::failed_blur_gate: return "failed_blur_gate";
        case CandidateStatus::failed_size_gate: return "failed_size_gate";
        case CandidateStatus::suppressed_nms: return "suppressed_nms";
        case CandidateStatus::cropped: return "cropped";
    }
    return "scored";
}

CandidateStatus parse_candidate_status(const std::string& s) {
    for (auto st : {CandidateStatus::scored, CandidateStatus::score_failed, CandidateStatus::failed_blur_gate,
                    CandidateStatus::failed_size_gate, CandidateStatus::suppressed_nms, CandidateStatus::cropped}) {
        if (to_string(st) == s) return st;
    }
    throw DataError("unknown candidate status '" + s + "' in shard file");
}

ojson image_result_json(const ImageResult& r) {
    ojson cands = ojson::array();
    for (const auto& c : r.candidates) {
        ojson m = ojson::object();
        for (const auto& [k, v] : c.metrics) m[k] = v;
        cands.push_back({{"crop_id", c.crop_id},
                         {"box_index", c.box_index},
                         {"rect", {c.rect.x, c.rect.y, c.rect.side}},
                         {"status", to_string(c.status)},
                         {"gate_value", c.gate_value},
                         {"metrics", m},
                         {"hq_path", c.hq_path}});
    }
    ojson counters = ojson::object();
    for (const auto& [k, v] : r.diag.counters()) counters[k] = v;
    return ojson{{"schema", kShardSchema},
                 {"image_id", r.image_id},
                 {"readable", r.readable},
                 {"laplacian_variance", r.laplacian_variance},
                 {"passed_blur_gate", r.passed_blur_gate},
                 {"boxes", r.boxes},
                 {"candidates", cands},
                 {"counters", counters},
                 {"warnings", r.diag.warnings()}};
}

ImageResult image_result_from(const json& j) {
    if (j.value("schema", std::string()) != kShardSchema) throw DataError("shard line has an unsupported schema");
    ImageResult r;
    r.image_id = j.at("image_id").get<std::string>();
    r.readable = j.at("readable").get<bool>();
    r.laplacian_variance = j.at("laplacian_variance").get<double>();
    r.passed_blur_gate = j.at("passed_blur_gate").get<bool>();
    r.boxes = j.at("boxes").get<std::size_t>();
    for (const auto& c : j.at("candidates")) {
        CandidateResult cr;
        cr.crop_id = c.at("crop_id").get<std::string>();
        cr.box_index = c.at("box_index").get<int>();
        const auto& rect = c.at("rect");
        cr.rect = {rect.at(0).get<int>(), rect.at(1).get<int>(), rect.at(2).get<int>()};
        cr.status = parse_candidate_status(c.at("status").get<std::string>());
        cr.gate_value = c.at("gate_value").get<double>();
        for (const auto& [k, v] : c.at("metrics").items()) cr.metrics[k] = v.get<double>();
        cr.hq_path = c.at("hq_path").get<std::string>();
        r.candidates.push_back(std::move(cr));
    }
    // warn() re-counts "warnings", so that counter is not restored directly.
    for (const auto& [k, v] : j.at("counters").items()) {
        if (k != "warnings") r.diag.count(k, v.get<std::size_t>());
    }
    for (const auto& w : j.at("warnings")) r.diag.warn(w.get<std::string>());
    return r;
}

struct Checkpoint {
    std::string processing_hash;
    std::size_t total_shards = 0;
    std::size_t records = 0;
    std::set<std::size_t> completed;
    std::size_t collected = 0;
    std::size_t person_labeled = 0;
    std::map<std::string, double> stage_seconds;
};

fs::path checkpoint_file(const PipelineConfig& cfg) {
    return cfg.checkpoint_dir / "checkpoint.json";
}

fs::path shard_file(const PipelineConfig& cfg, std::size_t shard) {
    char name[32];
    std::snprintf(name, sizeof name, "shard-%06zu.jsonl", shard);
    return cfg.checkpoint_dir / "shards" / name;
}

void save_checkpoint(const PipelineConfig& cfg, const Checkpoint& c) {
    ojson j{{"schema", kCheckpointSchema},
            {"processing_hash", c.processing_hash},
            {"total_shards", c.total_shards},
            {"records", c.records},
            {"completed", std::vector<std::size_t>(c.completed.begin(), c.completed.end())},
            {"collected", c.collected},
            {"person_labeled", c.person_labeled},
            {"stage_seconds", c.stage_seconds}};
    write_atomic(checkpoint_file(cfg), j.dump(2) + "\n");
}

std::optional<Checkpoint> load_checkpoint(const PipelineConfig& cfg) {
    const fs::path path = checkpoint_file(cfg);
    if (!fs::exists(path)) return std::nullopt;
    try {
        const json j = json::parse(read_file(path));
        if (j.at("schema").get<std::string>() != kCheckpointSchema) throw DataError("unsupported checkpoint schema");
        Checkpoint c;
        c.processing_hash = j.at("processing_hash").get<std::string>();
        c.total_shards = j.at("total_shards").get<std::size_t>();
        c.records = j.at("records").get<std::size_t>();
        for (const auto& s : j.at("completed")) c.completed.insert(s.get<std::size_t>());
        c.collected = j.at("collected").get<std::size_t>();
        c.person_labeled = j.at("person_labeled").get<std::size_t>();
        c.stage_seconds = j.at("stage_seconds").get<std::map<std::string, double>>();
        return c;
    } catch (const json::exception& e) {
        throw DataError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
}

std::vector<ImageResult> read_shard(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing shard result " + path.string());
    std::vector<ImageResult> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(image_result_from(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError("corrupt shard result " + path.string() + ": " + e.what());
        }
    }
    return out;
}

Checkpoint require_complete_checkpoint(const PipelineConfig& cfg) {
    auto ckpt = load_checkpoint(cfg);
    if (!ckpt) throw DataError("no checkpoint in " + cfg.checkpoint_dir.string() + "; run the score stage first");
    if (ckpt->processing_hash != cfg.processing_hash()) {
        throw ConfigError("checkpoint in " + cfg.checkpoint_dir.string() + " was written with config hash " +
                          ckpt->processing_hash + ", current config hashes to " + cfg.processing_hash());
    }
    if (ckpt->completed.size() != ckpt->total_shards) {
        throw DataError("scoring incomplete: " + std::to_string(ckpt->completed.size()) + " of " +
                        std::to_string(ckpt->total_shards) + " shards done; use resume");
    }
    return *ckpt;
}

// Visits every image result in shard order without holding more than one shard.
template <typename Fn>
void for_each_image_result(const PipelineConfig& cfg, const Checkpoint& ckpt, Fn&& fn) {
    for (std::size_t s = 0; s < ckpt.total_shards; ++s) {
        for (auto& r : read_shard(shard_file(cfg, s))) fn(r);
    }
}

bool needs_metric(const PipelineConfig& cfg, std::string_view name) {
    return std::any_of(cfg.metrics.begin(), cfg.metrics.end(), [&](const MetricSpec& m) {
        return m.source == MetricSource::in_core && m.name == name;
    });
}

std::vector<std::string> external_metric_names(const PipelineConfig& cfg) {
    std::vector<std::string> out;
    for (const auto& m : cfg.metrics) {
        if (m.source == MetricSource::external) out.push_back(m.name);
    }
    return out;
}

std::optional<fs::path> external_scores_path(const PipelineConfig& cfg) {
    if (cfg.external_scores) return cfg.external_scores;
    const fs::path stored = cfg.checkpoint_dir / "external_scores.csv";
    if (fs::exists(stored)) return stored;
    return std::nullopt;
}

CropStatus manifest_status(CandidateStatus s) {
    switch (s) {
        case CandidateStatus::failed_blur_gate: return CropStatus::failed_blur_gate;
        case CandidateStatus::failed_size_gate: return CropStatus::failed_size_gate;
        case CandidateStatus::suppressed_nms: return CropStatus::suppressed_nms;
        default: return CropStatus::selected;
    }
}

void process_records_in_chunks(const PipelineConfig& cfg, const std::vector<SourceRecord>& records,
                               ProcessDepth depth, const std::function<void(ImageResult&)>& sink) {
    const auto res = depth == ProcessDepth::score ? ScoringResources::load(cfg) : ScoringResources{};
    const std::size_t chunk = static_cast<std::size_t>(cfg.shard_size);
    for (std::size_t start = 0; start < records.size(); start += chunk) {
        const std::size_t n = std::min(chunk, records.size() - start);
        std::vector<ImageResult> results(n);
        parallel_for(n, cfg.workers,
                     [&](std::size_t i) { results[i] = process_image(records[start + i], cfg, res, depth); });
        for (auto& r : results) sink(r);
    }
}

}  // namespace

bool FunnelStats::monotone() const {
    return collected >= person_labeled && person_labeled >= passed_blur_gate && boxes_total >= boxes_after_size_gate &&
           boxes_after_size_gate >= crops_after_nms && crops_after_nms >= scored && scored >= top_fraction &&
           top_fraction >= selected;
}

std::string FunnelStats::to_json() const {
    ojson j{{"schema", "hqc.stats/1"},
            {"collected", collected},
            {"person_labeled", person_labeled},
            {"passed_blur_gate", passed_blur_gate},
            {"boxes_total", boxes_total},
            {"boxes_after_size_gate", boxes_after_size_gate},
            {"crops_after_nms", crops_after_nms},
            {"scored", scored},
            {"top_fraction", top_fraction},
            {"selected", selected},
            {"reasons", reasons},
            {"stage_seconds", stage_seconds}};
    return j.dump(2) + "\n";
}

FunnelStats FunnelStats::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        FunnelStats s;
        s.collected = j.at("collected").get<std::size_t>();
        s.person_labeled = j.at("person_labeled").get<std::size_t>();
        s.passed_blur_gate = j.at("passed_blur_gate").get<std::size_t>();
        s.boxes_total = j.at("boxes_total").get<std::size_t>();
        s.boxes_after_size_gate = j.at("boxes_after_size_gate").get<std::size_t>();
        s.crops_after_nms = j.at("crops_after_nms").get<std::size_t>();
        s.scored = j.at("scored").get<std::size_t>();
        s.top_fraction = j.at("top_fraction").get<std::size_t>();
        s.selected = j.at("selected").get<std::size_t>();
        s.reasons = j.at("reasons").get<std::map<std::string, std::size_t>>();
        s.stage_seconds = j.value("stage_seconds", std::map<std::string, double>{});
        return s;
    } catch (const json::exception& e) {
        throw DataError(std::string("stats: ") + e.what());
    }
}

std::string FunnelStats::to_table() const {
    std::ostringstream out;
    auto row = [&](const char* label, std::size_t v) { out << std::left << std::setw(26) << label << v << '\n'; };
    out << "Stage 1  collection\n";
    row("  images collected", collected);
    row("  person-labeled images", person_labeled);
    out << "Stage 2  blur gate\n";
    row("  images passing", passed_blur_gate);
    out << "Stage 3  box adjustment + crop\n";
    row("  person boxes", boxes_total);
    row("  after size gate", boxes_after_size_gate);
    row("  crops after NMS", crops_after_nms);
    out << "Stage 4  IQA selection\n";
    row("  scored crops", scored);
    row("  top fraction", top_fraction);
    row("  selected", selected);
    if (!reasons.empty()) {
        out << "Rejections\n";
        for (const auto& [k, v] : reasons) {
            out << "  " << std::left << std::setw(24) << k << v << '\n';
        }
    }
    if (!stage_seconds.empty()) {
        out << "Wall clock (s)\n";
        for (const auto& [k, v] : stage_seconds) {
            out << "  " << std::left << std::setw(24) << k << std::fixed << std::setprecision(3) << v << '\n';
        }
    }
    return out.str();
}

std::vector<SourceRecord> ingest_sources(const PipelineConfig& cfg, Diagnostics& diag, FunnelStats* stats) {
    const LabelAliasMap aliases = cfg.alias_map();
    std::vector<SourceRecord> records;
    std::size_t collected = 0;
    for (const auto& src : cfg.sources) {
        std::ifstream in(src.annotations, std::ios::binary);
        if (!in) throw DataError("cannot open annotations " + src.annotations.string());
        Diagnostics local;
        auto sink = [&](SourceRecord r) {
            r.image_id = src.name + ":" + r.image_id;
            const fs::path p(r.image_path);
            r.image_path = (p.is_absolute() ? p : src.image_dir / p).string();
            records.push_back(std::move(r));
        };
        auto dims = [&](const std::string& id) { return probe_dimensions(src.image_dir / (id + ".jpg")); };
        switch (src.origin) {
            case DatasetOrigin::coco:
            case DatasetOrigin::object365:
                parse_coco(in, aliases, src.origin, sink, local);
                break;
            case DatasetOrigin::oid:
                parse_oid_csv(in, dims, aliases, sink, local, OidOptions{cfg.oid_min_confidence});
                break;
            case DatasetOrigin::crowdhuman:
                parse_odgt(in, dims, sink, local);
                break;
            case DatasetOrigin::detection_import:
                parse_detection_import(in, cfg.detection_min_confidence, sink, local);
                break;
        }
        collected += local.counter("images_seen");
        diag.merge(local);
    }
    if (stats) {
        stats->collected = collected;
        stats->person_labeled = records.size();
    }
    return records;
}

ScoringResources ScoringResources::load(const PipelineConfig& cfg) {
    ScoringResources r;
    if (needs_metric(cfg, "niqe")) {
        r.niqe = load_niqe_model(cfg.niqe_model.value_or(default_niqe_model_path()));
    }
    if (needs_metric(cfg, "brisque")) {
        if (cfg.brisque_model) {
            fs::path range = *cfg.brisque_model;
            range.replace_extension(".range");
            r.brisque = load_brisque_model(*cfg.brisque_model, range);
        } else {
            r.brisque = load_default_brisque_model();
        }
        if (!r.brisque) throw ConfigError("metric 'brisque' requested but no BRISQUE model is available");
    }
    return r;
}

std::string crop_file_name(const std::string& crop_id) {
    std::string safe;
    safe.reserve(crop_id.size());
    for (char ch : crop_id) {
        const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                        ch == '-' || ch == '_' || ch == '.';
        safe.push_back(ok ? ch : '_');
    }
    if (safe.size() > 80) safe.resize(80);
    char hash[9];
    std::snprintf(hash, sizeof hash, "%08llx",
                  static_cast<unsigned long long>(fnv1a64(crop_id) & 0xffffffffULL));
    return safe + "_" + hash + ".png";
}

ImageResult process_image(const SourceRecord& record, const PipelineConfig& cfg, const ScoringResources& res,
                          ProcessDepth depth) {
    ImageResult out;
    out.image_id = record.image_id;
    out.boxes = record.person_boxes.size();

    ImageBuffer img;
    ImageBuffer gray;
    try {
        img = read_image(record.image_path);
        gray = to_luma(img);
        out.laplacian_variance = laplacian_variance(gray);
    } catch (const std::exception& e) {
        if (cfg.on_unreadable == UnreadablePolicy::fail) {
            throw DataError("unreadable image " + record.image_path + ": " + e.what());
        }
        out.readable = false;
        out.diag.warn("unreadable image " + record.image_path + ": " + e.what());
        out.diag.count("unreadable_images");
        return out;
    }
    const ImageSize size{img.width(), img.height()};
    if (size != record.size()) {
        out.diag.warn(record.image_id + ": annotated size " + std::to_string(record.width) + "x" +
                      std::to_string(record.height) + " differs from decoded " + std::to_string(size.width) + "x" +
                      std::to_string(size.height));
        out.diag.count("dimension_mismatch");
    }

    // Geometry for every box, so rejected crops still carry a rect.
    std::vector<SquareCrop> squares;
    for (std::size_t i = 0; i < record.person_boxes.size(); ++i) {
        const auto clamped = clamp_to_image(record.person_boxes[i], size);
        if (!clamped) {
            out.diag.count("boxes_outside_image");
            continue;
        }
        CandidateResult c;
        c.crop_id = record.image_id + "#" + std::to_string(i);
        c.box_index = static_cast<int>(i);
        const SquareCrop sq = squarify(*clamped, size.width, size.height);
        c.rect = {sq.x, sq.y, sq.side};
        squares.push_back(sq);
        out.candidates.push_back(std::move(c));
    }

    const double thr = cfg.blur_variance_threshold;
    if (cfg.blur_scope == BlurScope::image) {
        out.passed_blur_gate = out.laplacian_variance >= thr;
        for (auto& c : out.candidates) {
            c.gate_value = out.laplacian_variance;
            if (!out.passed_blur_gate) c.status = CandidateStatus::failed_blur_gate;
        }
    } else {
        for (std::size_t k = 0; k < out.candidates.size(); ++k) {
            auto& c = out.candidates[k];
            c.gate_value = laplacian_variance(gray, squares[k].region());
            if (c.gate_value < thr) {
                c.status = CandidateStatus::failed_blur_gate;
            } else {
                out.passed_blur_gate = true;
            }
        }
    }

    std::vector<std::size_t> nms_input;
    for (std::size_t k = 0; k < out.candidates.size(); ++k) {
        auto& c = out.candidates[k];
        if (c.status == CandidateStatus::failed_blur_gate) continue;
        if (!size_gate(squares[k], cfg.min_side)) {
            c.status = CandidateStatus::failed_size_gate;
            continue;
        }
        nms_input.push_back(k);
    }
    std::vector<SquareCrop> pool;
    for (auto k : nms_input) pool.push_back(squares[k]);
    const auto kept = center_priority_nms(pool, cfg.iou_threshold);
    std::vector<bool> survives(out.candidates.size(), false);
    for (const auto& kc : kept) {
        for (auto k : nms_input) {
            if (!survives[k] && squares[k] == kc) {
                survives[k] = true;
                break;
            }
        }
    }
    for (auto k : nms_input) {
        if (!survives[k]) out.candidates[k].status = CandidateStatus::suppressed_nms;
    }
    if (depth == ProcessDepth::gate) return out;

    const fs::path crops_dir = cfg.output_dir / "crops";
    fs::create_directories(crops_dir);
    for (auto k : nms_input) {
        if (!survives[k]) continue;
        auto& c = out.candidates[k];
        const ImageBuffer hq = quantize_8bit(resize_square(crop(img, squares[k].region()), cfg.output_side));
        const std::string name = crop_file_name(c.crop_id);
        write_image(crops_dir / name, hq);
        c.hq_path = "crops/" + name;
        c.status = CandidateStatus::cropped;
        if (depth != ProcessDepth::score) continue;
        try {
            for (const auto& m : cfg.metrics) {
                if (m.source != MetricSource::in_core) continue;
                if (m.name == "niqe") {
                    c.metrics["niqe"] = niqe_score(hq, *res.niqe);
                } else if (m.name == "brisque") {
                    c.metrics["brisque"] = brisque_score(brisque_features(hq), *res.brisque, &out.diag);
                }
            }
            c.metrics[std::string(kLaplacianColumn)] = c.gate_value;
            c.status = CandidateStatus::scored;
        } catch (const std::exception& e) {
            c.metrics.clear();
            c.status = CandidateStatus::score_failed;
            out.diag.warn("scoring failed for " + c.crop_id + ": " + e.what());
            out.diag.count("score_failed");
        }
    }
    return out;
}

bool score_shards(const PipelineConfig& cfg, const RunOptions& opts, Diagnostics& diag, FunnelStats& stats) {
    cfg.validate();
    auto t0 = Clock::now();
    const auto records = ingest_sources(cfg, diag, &stats);
    const double ingest_s = seconds_since(t0);
    const std::size_t shard_size = static_cast<std::size_t>(cfg.shard_size);
    const std::size_t total = (records.size() + shard_size - 1) / shard_size;
    const std::string hash = cfg.processing_hash();

    fs::create_directories(cfg.checkpoint_dir / "shards");
    fs::create_directories(cfg.output_dir);

    Checkpoint ckpt;
    std::optional<Checkpoint> existing = opts.resume ? load_checkpoint(cfg) : std::nullopt;
    if (existing) {
        if (existing->processing_hash != hash) {
            throw ConfigError("refusing to resume: checkpoint config hash " + existing->processing_hash +
                              " does not match current config hash " + hash);
        }
        if (existing->total_shards != total || existing->records != records.size()) {
            throw ConfigError("refusing to resume: checkpoint covers " + std::to_string(existing->records) +
                              " records, inputs now yield " + std::to_string(records.size()));
        }
        ckpt = *existing;
        spdlog::info("resuming: {} of {} shards already complete", ckpt.completed.size(), total);
    } else {
        for (const auto& entry : fs::directory_iterator(cfg.checkpoint_dir / "shards")) fs::remove(entry.path());
        fs::remove(cfg.checkpoint_dir / "external_scores.csv");
        ckpt.processing_hash = hash;
        ckpt.total_shards = total;
        ckpt.records = records.size();
    }
    ckpt.collected = stats.collected;
    ckpt.person_labeled = stats.person_labeled;
    ckpt.stage_seconds["ingest"] = ingest_s;
    save_checkpoint(cfg, ckpt);

    const auto res = ScoringResources::load(cfg);
    std::size_t done_now = 0;
    t0 = Clock::now();
    for (std::size_t s = 0; s < total; ++s) {
        if (ckpt.completed.count(s)) continue;
        if (opts.stop_after_shards && done_now >= *opts.stop_after_shards) {
            spdlog::info("stopping after {} shard(s) as requested", done_now);
            return false;
        }
        const std::size_t begin = s * shard_size;
        const std::size_t n = std::min(shard_size, records.size() - begin);
        std::vector<ImageResult> results(n);
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            results[i] = process_image(records[begin + i], cfg, res, ProcessDepth::score);
        });
        std::string body;
        for (const auto& r : results) body += image_result_json(r).dump() + "\n";
        write_atomic(shard_file(cfg, s), body);
        ckpt.completed.insert(s);
        ckpt.stage_seconds["process"] += seconds_since(t0);
        t0 = Clock::now();
        save_checkpoint(cfg, ckpt);
        ++done_now;
        spdlog::info("shard {}/{} done ({} images)", s + 1, total, n);
    }
    stats.stage_seconds = ckpt.stage_seconds;

    std::string tsv;
    for_each_image_result(cfg, ckpt, [&](const ImageResult& r) {
        for (const auto& c : r.candidates) {
            if (c.status == CandidateStatus::scored) {
                tsv += c.crop_id + "\t" + fs::absolute(cfg.output_dir / c.hq_path).lexically_normal().string() + "\n";
            }
        }
    });
    write_atomic(cfg.output_dir / "candidates.tsv", tsv);
    return true;
}

RunResult select_from_checkpoints(const PipelineConfig& cfg, FunnelStats stats) {
    cfg.validate();
    const auto t0 = Clock::now();
    const Checkpoint ckpt = require_complete_checkpoint(cfg);
    RunResult result;
    stats.collected = ckpt.collected;
    stats.person_labeled = ckpt.person_labeled;
    stats.passed_blur_gate = stats.boxes_total = stats.boxes_after_size_gate = 0;
    stats.crops_after_nms = stats.scored = stats.top_fraction = stats.selected = 0;
    stats.reasons.clear();
    stats.stage_seconds = ckpt.stage_seconds;

    struct Meta {
        std::string source_image_id;
        CropRect rect;
        std::string hq_path;
    };
    ScoreTable table;
    std::vector<Meta> meta;
    SelectionManifest rejected;
    for_each_image_result(cfg, ckpt, [&](ImageResult& r) {
        result.diag.merge(r.diag);
        if (!r.readable) {
            ++stats.reasons["unreadable_images"];
            return;
        }
        if (r.passed_blur_gate) ++stats.passed_blur_gate;
        for (auto& c : r.candidates) {
            if (c.status == CandidateStatus::failed_blur_gate) {
                ++stats.reasons["failed_blur_gate"];
            } else {
                ++stats.boxes_total;
                if (c.status == CandidateStatus::failed_size_gate) {
                    ++stats.reasons["failed_size_gate"];
                } else {
                    ++stats.boxes_after_size_gate;
                    if (c.status == CandidateStatus::suppressed_nms) {
                        ++stats.reasons["suppressed_nms"];
                    } else {
                        ++stats.crops_after_nms;
                    }
                }
            }
            if (c.status == CandidateStatus::score_failed || c.status == CandidateStatus::cropped) {
                ++stats.reasons["score_failed"];
                continue;
            }
            if (c.status == CandidateStatus::scored) {
                const std::size_t row = table.add_row(c.crop_id);
                for (const auto& [k, v] : c.metrics) table.set(row, k, v);
                meta.push_back({r.image_id, c.rect, c.hq_path});
                continue;
            }
            ManifestEntry e;
            e.crop_id = c.crop_id;
            e.source_image_id = r.image_id;
            e.crop = c.rect;
            e.raw_scores[std::string(kLaplacianColumn)] = c.gate_value;
            e.status = manifest_status(c.status);
            rejected.entries.push_back(std::move(e));
        }
    });
    stats.scored = table.rows();

    const auto external = external_metric_names(cfg);
    if (!external.empty()) {
        const auto path = external_scores_path(cfg);
        if (!path) {
            throw DataError("external metric(s) configured but no score CSV was ingested; run ingest-scores first");
        }
        std::ifstream csv(*path, std::ios::binary);
        if (!csv) throw DataError("cannot open external scores " + path->string());
        table = ingest_external_scores(std::move(table), csv, external, result.diag);
    }
    if (table.rows() < 2) {
        throw DataError("only " + std::to_string(table.rows()) + " scored crop(s); selection needs at least 2");
    }
    const ScoreTable normalized = normalize(table, cfg.metrics);
    SelectionManifest manifest = select_top(normalized, cfg.fraction, cfg.metrics);
    stats.top_fraction = top_count(cfg.fraction, table.rows());
    for (auto& e : manifest.entries) {
        const auto row = *table.find(e.crop_id);
        e.source_image_id = meta[row].source_image_id;
        e.crop = meta[row].rect;
        e.hq_path = meta[row].hq_path;
        if (e.status == CropStatus::selected) {
            ++stats.selected;
        } else if (e.status == CropStatus::below_top_fraction) {
            ++stats.reasons["below_top_fraction"];
        } else {
            ++stats.reasons["failed_threshold"];
            ++stats.reasons["failed_threshold:" + e.failed_metric];
        }
    }
    for (auto& e : rejected.entries) manifest.entries.push_back(std::move(e));
    sort_manifest(manifest);

    const fs::path curated = cfg.output_dir / "curated";
    fs::create_directories(curated);
    for (const auto& entry : fs::directory_iterator(curated)) fs::remove(entry.path());
    for (const auto& e : manifest.entries) {
        if (e.status == CropStatus::selected) {
            fs::copy_file(cfg.output_dir / e.hq_path, curated / fs::path(e.hq_path).filename(),
                          fs::copy_options::overwrite_existing);
        }
    }
    stats.stage_seconds["select"] = seconds_since(t0);

    save_manifest(cfg.output_dir / "manifest.jsonl", manifest);
    write_atomic(cfg.output_dir / "stats.json", stats.to_json());
    write_atomic(cfg.output_dir / "funnel.txt", stats.to_table());
    result.completed = true;
    result.manifest = std::move(manifest);
    result.stats = std::move(stats);
    return result;
}

RunResult run_pipeline(const PipelineConfig& cfg, const RunOptions& opts) {
    RunResult partial;
    FunnelStats stats;
    if (!score_shards(cfg, opts, partial.diag, stats)) {
        partial.stats = stats;
        return partial;
    }
    RunResult r = select_from_checkpoints(cfg, stats);
    partial.diag.merge(r.diag);
    r.diag = std::move(partial.diag);
    return r;
}

RunResult resume_pipeline(const PipelineConfig& cfg, RunOptions opts) {
    opts.resume = true;
    return run_pipeline(cfg, opts);
}

void write_gate_report(const PipelineConfig& cfg, Diagnostics& diag) {
    cfg.validate();
    const auto records = ingest_sources(cfg, diag);
    fs::create_directories(cfg.output_dir);
    std::string body;
    process_records_in_chunks(cfg, records, ProcessDepth::gate, [&](ImageResult& r) {
        diag.merge(r.diag);
        if (!r.readable) return;
        body += ojson{{"image_id", r.image_id},
                      {"laplacian_variance", r.laplacian_variance},
                      {"passed", r.passed_blur_gate},
                      {"boxes", r.boxes}}
                    .dump() +
                "\n";
    });
    write_atomic(cfg.output_dir / "gate.jsonl", body);
}

void write_crop_report(const PipelineConfig& cfg, Diagnostics& diag) {
    cfg.validate();
    const auto records = ingest_sources(cfg, diag);
    fs::create_directories(cfg.output_dir);
    std::string body;
    process_records_in_chunks(cfg, records, ProcessDepth::crop, [&](ImageResult& r) {
        diag.merge(r.diag);
        for (const auto& c : r.candidates) {
            ojson j{{"crop_id", c.crop_id},
                    {"source_image_id", r.image_id},
                    {"crop", {{"x", c.rect.x}, {"y", c.rect.y}, {"side", c.rect.side}}},
                    {"status", to_string(c.status)},
                    {"hq_path", c.hq_path}};
            body += j.dump() + "\n";
        }
    });
    write_atomic(cfg.output_dir / "crops.jsonl", body);
}

void ingest_scores_file(const PipelineConfig& cfg, const fs::path& csv_path, Diagnostics& diag) {
    std::ifstream csv(csv_path, std::ios::binary);
    if (!csv) throw DataError("cannot open score CSV " + csv_path.string());
    const Checkpoint ckpt = require_complete_checkpoint(cfg);
    ScoreTable table;
    for_each_image_result(cfg, ckpt, [&](const ImageResult& r) {
        for (const auto& c : r.candidates) {
            if (c.status == CandidateStatus::scored) table.add_row(c.crop_id);
        }
    });
    const ScoreTable merged = ingest_external_scores(std::move(table), csv, external_metric_names(cfg), diag);
    for (const auto& name : external_metric_names(cfg)) {
        const auto& col = merged.column(name);
        const auto missing = std::count_if(col.begin(), col.end(), [](double v) { return !std::isfinite(v); });
        if (missing > 0) {
            diag.warn("score CSV leaves " + std::to_string(missing) + " crop(s) without '" + name + "'");
        }
    }
    fs::copy_file(csv_path, cfg.checkpoint_dir / "external_scores.csv", fs::copy_options::overwrite_existing);
}

HoldoutSplit holdout_split(const SelectionManifest& manifest, const std::vector<std::string>& holdout_sources,
                           double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("--holdout-fraction must lie in [0, 1]");
    const std::set<std::string> sources(holdout_sources.begin(), holdout_sources.end());
    HoldoutSplit out;
    for (const auto& e : manifest.entries) {
        const auto colon = e.source_image_id.find(':');
        const std::string source = e.source_image_id.substr(0, colon);
        bool hold = sources.count(source) > 0;
        if (!hold && fraction > 0.0) {
            KeyedRng rng(seed, e.source_image_id, 0);
            hold = rng.uniform() < fraction;
        }
        (hold ? out.holdout : out.train).entries.push_back(e);
    }
    return out;
}

}  // namespace hqc
