// SPDX-License-Identifier: Apache-2.0

#include "hqc/manifest.hpp"

#include "hqc/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

namespace hqc {

namespace {

using ojson = nlohmann::ordered_json;

ojson to_json(const ManifestEntry& e) {
    ojson j;
    j["schema"] = kManifestSchema;
    j["crop_id"] = e.crop_id;
    j["source_image_id"] = e.source_image_id;
    if (e.crop) {
        j["crop"] = {{"x", e.crop->x}, {"y", e.crop->y}, {"side", e.crop->side}};
    } else {
        j["crop"] = nullptr;
    }
    j["raw_scores"] = ojson::object();
    for (const auto& [k, v] : e.raw_scores) j["raw_scores"][k] = v;
    j["z_scores"] = ojson::object();
    for (const auto& [k, v] : e.z_scores) j["z_scores"][k] = v;
    j["aggregate"] = e.aggregate ? ojson(*e.aggregate) : ojson(nullptr);
    j["rank"] = e.rank ? ojson(*e.rank) : ojson(nullptr);
    j["status"] = to_string(e.status);
    if (e.status == CropStatus::failed_threshold) j["failed_metric"] = e.failed_metric;
    if (!e.hq_path.empty()) j["hq_path"] = e.hq_path;
    return j;
}

ManifestEntry from_json(const nlohmann::json& j) {
    if (j.value("schema", std::string()) != kManifestSchema) {
        throw DataError("manifest entry has unsupported schema '" + j.value("schema", std::string()) + "'");
    }
    ManifestEntry e;
    e.crop_id = j.at("crop_id").get<std::string>();
    e.source_image_id = j.at("source_image_id").get<std::string>();
    if (j.contains("crop") && !j["crop"].is_null()) {
        const auto& c = j["crop"];
        e.crop = CropRect{c.at("x").get<int>(), c.at("y").get<int>(), c.at("side").get<int>()};
    }
    for (const auto& [k, v] : j.at("raw_scores").items()) e.raw_scores[k] = v.get<double>();
    for (const auto& [k, v] : j.at("z_scores").items()) e.z_scores[k] = v.get<double>();
    if (!j.at("aggregate").is_null()) e.aggregate = j["aggregate"].get<double>();
    if (!j.at("rank").is_null()) e.rank = j["rank"].get<std::size_t>();
    e.status = parse_crop_status(j.at("status").get<std::string>());
    e.failed_metric = j.value("failed_metric", std::string());
    e.hq_path = j.value("hq_path", std::string());
    return e;
}

}  // namespace

void write_manifest_jsonl(std::ostream& out, const SelectionManifest& manifest) {
    for (const auto& e : manifest.entries) out << to_json(e).dump() << '\n';
}

void save_manifest(const std::filesystem::path& path, const SelectionManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest " + path.string());
    write_manifest_jsonl(out, manifest);
}

SelectionManifest read_manifest_jsonl(std::istream& in) {
    SelectionManifest m;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t start = offset;
        offset += line.size() + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            m.entries.push_back(from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& ex) {
            throw ParseError(std::string("manifest: ") + ex.what(), start + ex.byte);
        } catch (const nlohmann::json::exception& ex) {
            throw DataError(std::string("manifest: ") + ex.what());
        }
    }
    return m;
}

SelectionManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest " + path.string());
    return read_manifest_jsonl(in);
}

std::map<std::string, std::size_t> status_counts(const SelectionManifest& manifest) {
    std::map<std::string, std::size_t> out;
    for (const auto& e : manifest.entries) ++out[std::string(to_string(e.status))];
    return out;
}

void sort_manifest(SelectionManifest& manifest) {
    std::stable_sort(manifest.entries.begin(), manifest.entries.end(),
                     [](const ManifestEntry& a, const ManifestEntry& b) {
                         if (a.rank.has_value() != b.rank.has_value()) return a.rank.has_value();
                         if (a.rank && *a.rank != *b.rank) return *a.rank < *b.rank;
                         return a.crop_id < b.crop_id;
                     });
}

}  // namespace hqc
