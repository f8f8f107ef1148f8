// SPDX-License-Identifier: Apache-2.0

#include "hqc/config.hpp"

#include "hqc/error.hpp"
#include "hqc/keyed_rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace hqc {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path.lexically_normal() : (base / path).lexically_normal();
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "schema_version", "sources",        "aliases",          "detection_min_confidence",
        "oid_min_confidence", "blur_variance_threshold", "blur_scope", "min_side",
        "iou_threshold",  "output_side",    "metrics",          "fraction",
        "external_scores", "niqe_model",    "brisque_model",    "workers",
        "shard_size",     "on_unreadable",  "checkpoint_dir",   "output_dir",
        "degradation"};
    return keys;
}

ojson metrics_json(const std::vector<MetricSpec>& metrics) {
    ojson arr = ojson::array();
    for (const auto& m : metrics) {
        arr.push_back({{"name", m.name},
                       {"direction", to_string(m.direction)},
                       {"threshold", m.threshold ? ojson(*m.threshold) : ojson(nullptr)},
                       {"source", to_string(m.source)}});
    }
    return arr;
}

ojson sources_json(const std::vector<SourceSpec>& sources) {
    ojson arr = ojson::array();
    for (const auto& s : sources) {
        arr.push_back({{"name", s.name},
                       {"origin", to_string(s.origin)},
                       {"annotations", s.annotations.string()},
                       {"images", s.image_dir.string()}});
    }
    return arr;
}

}  // namespace

std::string_view to_string(BlurScope s) {
    return s == BlurScope::image ? "image" : "box";
}

std::string_view to_string(UnreadablePolicy p) {
    return p == UnreadablePolicy::skip ? "skip" : "fail";
}

LabelAliasMap PipelineConfig::alias_map() const {
    if (aliases.empty()) return LabelAliasMap::defaults();
    return LabelAliasMap(alias_canonical, aliases);
}

void PipelineConfig::validate() const {
    if (sources.empty()) throw ConfigError("config: at least one source is required");
    std::set<std::string> names;
    for (const auto& s : sources) {
        if (s.name.empty() || s.name.find_first_of(":#/") != std::string::npos) {
            throw ConfigError("config: source name '" + s.name + "' must be non-empty without ':', '#' or '/'");
        }
        if (!names.insert(s.name).second) throw ConfigError("config: duplicate source name '" + s.name + "'");
    }
    if (!(blur_variance_threshold > 0.0) || !std::isfinite(blur_variance_threshold)) {
        throw ConfigError("--blur-threshold must be positive");
    }
    if (min_side < 1) throw ConfigError("--min-side must be positive");
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("--iou-threshold must lie in (0, 1]");
    if (output_side < 16) throw ConfigError("config: output_side must be at least 16");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("--fraction must lie in (0, 1]");
    if (workers < 1) throw ConfigError("--workers must be at least 1");
    if (shard_size < 1) throw ConfigError("config: shard_size must be at least 1");
    if (!(detection_min_confidence >= 0.0 && detection_min_confidence <= 1.0)) {
        throw ConfigError("config: detection_min_confidence must lie in [0, 1]");
    }
    if (metrics.empty()) throw ConfigError("config: at least one metric is required");
    validate_metric_specs(metrics);
    for (const auto& m : metrics) {
        if (m.source == MetricSource::in_core && m.name != "niqe" && m.name != "brisque" &&
            m.name != kLaplacianColumn) {
            throw ConfigError("config: unknown in-core metric '" + m.name + "'");
        }
    }
    degradation.validate();
}

std::string PipelineConfig::processing_hash() const {
    ojson j{
        {"schema_version", kConfigSchemaVersion},
        {"sources", sources_json(sources)},
        {"alias_canonical", alias_canonical},
        {"aliases", aliases},
        {"detection_min_confidence", detection_min_confidence},
        {"oid_min_confidence", oid_min_confidence ? ojson(*oid_min_confidence) : ojson(nullptr)},
        {"blur_variance_threshold", blur_variance_threshold},
        {"blur_scope", to_string(blur_scope)},
        {"min_side", min_side},
        {"iou_threshold", iou_threshold},
        {"output_side", output_side},
        {"niqe_model", niqe_model ? ojson(niqe_model->string()) : ojson(nullptr)},
        {"brisque_model", brisque_model ? ojson(brisque_model->string()) : ojson(nullptr)},
        {"shard_size", shard_size},
        {"on_unreadable", to_string(on_unreadable)},
    };
    ojson in_core = ojson::array();
    for (const auto& m : metrics) {
        if (m.source == MetricSource::in_core) in_core.push_back(m.name);
    }
    j["in_core_metrics"] = in_core;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

PipelineConfig parse_pipeline_config(std::string_view json_text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known_keys().count(key)) throw ConfigError("config: unknown field '" + key + "'");
    }
    int version = 0;
    read(j, "schema_version", version);
    if (version != kConfigSchemaVersion) {
        throw ConfigError("config: schema_version must be " + std::to_string(kConfigSchemaVersion));
    }

    PipelineConfig c;
    try {
        if (j.contains("sources")) {
            for (const auto& s : j.at("sources")) {
                SourceSpec spec;
                spec.name = s.at("name").get<std::string>();
                try {
                    spec.origin = parse_dataset_origin(s.at("origin").get<std::string>());
                } catch (const std::exception& e) {
                    throw ConfigError(std::string("config: ") + e.what());
                }
                spec.annotations = resolve(base_dir, s.at("annotations").get<std::string>());
                spec.image_dir = resolve(base_dir, s.value("images", std::string(".")));
                c.sources.push_back(std::move(spec));
            }
        }
        if (j.contains("aliases")) {
            const auto& a = j["aliases"];
            c.alias_canonical = a.value("canonical", std::string("person"));
            c.aliases = a.at("labels").get<std::vector<std::string>>();
        }
        read(j, "detection_min_confidence", c.detection_min_confidence);
        if (j.contains("oid_min_confidence") && !j["oid_min_confidence"].is_null()) {
            c.oid_min_confidence = j["oid_min_confidence"].get<double>();
        }
        read(j, "blur_variance_threshold", c.blur_variance_threshold);
        if (j.contains("blur_scope")) {
            const auto s = j["blur_scope"].get<std::string>();
            if (s == "image") c.blur_scope = BlurScope::image;
            else if (s == "box") c.blur_scope = BlurScope::box;
            else throw ConfigError("config: blur_scope must be 'image' or 'box'");
        }
        read(j, "min_side", c.min_side);
        read(j, "iou_threshold", c.iou_threshold);
        read(j, "output_side", c.output_side);
        if (j.contains("metrics")) {
            c.metrics.clear();
            for (const auto& m : j["metrics"]) {
                MetricSpec spec;
                spec.name = m.at("name").get<std::string>();
                spec.direction = parse_direction(m.value("direction", std::string("higher_better")));
                if (m.contains("threshold") && !m["threshold"].is_null()) spec.threshold = m["threshold"].get<double>();
                const bool builtin = spec.name == "niqe" || spec.name == "brisque" || spec.name == kLaplacianColumn;
                spec.source = parse_metric_source(m.value("source", std::string(builtin ? "in_core" : "external")));
                c.metrics.push_back(std::move(spec));
            }
        }
        read(j, "fraction", c.fraction);
        if (j.contains("external_scores") && !j["external_scores"].is_null()) {
            c.external_scores = resolve(base_dir, j["external_scores"].get<std::string>());
        }
        if (j.contains("niqe_model") && !j["niqe_model"].is_null()) {
            c.niqe_model = resolve(base_dir, j["niqe_model"].get<std::string>());
        }
        if (j.contains("brisque_model") && !j["brisque_model"].is_null()) {
            c.brisque_model = resolve(base_dir, j["brisque_model"].get<std::string>());
        }
        read(j, "workers", c.workers);
        read(j, "shard_size", c.shard_size);
        if (j.contains("on_unreadable")) {
            const auto p = j["on_unreadable"].get<std::string>();
            if (p == "skip") c.on_unreadable = UnreadablePolicy::skip;
            else if (p == "fail") c.on_unreadable = UnreadablePolicy::fail;
            else throw ConfigError("config: on_unreadable must be 'skip' or 'fail'");
        }
        if (j.contains("checkpoint_dir")) c.checkpoint_dir = resolve(base_dir, j["checkpoint_dir"].get<std::string>());
        else c.checkpoint_dir = resolve(base_dir, c.checkpoint_dir.string());
        if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
        else c.output_dir = resolve(base_dir, c.output_dir.string());
        if (j.contains("degradation")) {
            c.degradation = parse_degradation_config(j["degradation"].dump(), c.degradation);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_pipeline_config(ss.str(), fs::absolute(path).parent_path());
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
    ojson j{
        {"schema_version", kConfigSchemaVersion},
        {"sources", sources_json(c.sources)},
    };
    if (!c.aliases.empty()) j["aliases"] = {{"canonical", c.alias_canonical}, {"labels", c.aliases}};
    j["detection_min_confidence"] = c.detection_min_confidence;
    j["oid_min_confidence"] = c.oid_min_confidence ? ojson(*c.oid_min_confidence) : ojson(nullptr);
    j["blur_variance_threshold"] = c.blur_variance_threshold;
    j["blur_scope"] = to_string(c.blur_scope);
    j["min_side"] = c.min_side;
    j["iou_threshold"] = c.iou_threshold;
    j["output_side"] = c.output_side;
    j["metrics"] = metrics_json(c.metrics);
    j["fraction"] = c.fraction;
    j["external_scores"] = c.external_scores ? ojson(c.external_scores->string()) : ojson(nullptr);
    j["niqe_model"] = c.niqe_model ? ojson(c.niqe_model->string()) : ojson(nullptr);
    j["brisque_model"] = c.brisque_model ? ojson(c.brisque_model->string()) : ojson(nullptr);
    j["workers"] = c.workers;
    j["shard_size"] = c.shard_size;
    j["on_unreadable"] = to_string(c.on_unreadable);
    j["checkpoint_dir"] = c.checkpoint_dir.string();
    j["output_dir"] = c.output_dir.string();
    j["degradation"] = ojson::parse(degradation_config_to_json(c.degradation));
    return j.dump(2);
}

}  // namespace hqc
