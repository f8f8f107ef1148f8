// SPDX-License-Identifier: Apache-2.0

#include "hqc/annotations.hpp"

#include "hqc/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <istream>
#include <iterator>
#include <map>
#include <sstream>
#include <unordered_map>

namespace hqc {

using nlohmann::json;

std::optional<BBox> clamp_to_image(const BBox& box, ImageSize size) {
    const double x0 = std::clamp(box.x, 0.0, static_cast<double>(size.width));
    const double y0 = std::clamp(box.y, 0.0, static_cast<double>(size.height));
    const double x1 = std::clamp(box.x + box.w, 0.0, static_cast<double>(size.width));
    const double y1 = std::clamp(box.y + box.h, 0.0, static_cast<double>(size.height));
    if (!(x1 > x0) || !(y1 > y0)) {
        return std::nullopt;
    }
    return BBox{x0, y0, x1 - x0, y1 - y0};
}

bool inside_image(const BBox& box, ImageSize size) {
    return box.w > 0 && box.h > 0 && box.x >= 0 && box.y >= 0 && box.x + box.w <= size.width &&
           box.y + box.h <= size.height;
}

std::string_view to_string(DatasetOrigin origin) {
    switch (origin) {
    case DatasetOrigin::coco: return "COCO";
    case DatasetOrigin::oid: return "OID";
    case DatasetOrigin::object365: return "Object365";
    case DatasetOrigin::crowdhuman: return "CrowdHuman";
    case DatasetOrigin::detection_import: return "DetectionImport";
    }
    return "unknown";
}

namespace {

std::string normalize_label(std::string_view label) {
    auto first = label.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    auto last = label.find_last_not_of(" \t\r\n");
    std::string out(label.substr(first, last - first + 1));
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

DatasetOrigin parse_dataset_origin(std::string_view name) {
    const std::string n = normalize_label(name);
    if (n == "coco") return DatasetOrigin::coco;
    if (n == "oid" || n == "openimages") return DatasetOrigin::oid;
    if (n == "object365" || n == "objects365") return DatasetOrigin::object365;
    if (n == "crowdhuman") return DatasetOrigin::crowdhuman;
    if (n == "detectionimport" || n == "detection_import" || n == "detections") return DatasetOrigin::detection_import;
    throw ConfigError("unknown dataset origin '" + std::string(name) + "'");
}

LabelAliasMap::LabelAliasMap(std::string canonical, std::vector<std::string> aliases)
    : canonical_(std::move(canonical)) {
    for (const auto& a : aliases) {
        auto n = normalize_label(a);
        if (!n.empty()) {
            normalized_.insert(std::move(n));
        }
    }
}

LabelAliasMap LabelAliasMap::defaults() {
    return LabelAliasMap("person", {"person", "human", "human body", "/m/01g317", "/m/02p0tk3"});
}

bool LabelAliasMap::matches(std::string_view label) const {
    return normalized_.contains(normalize_label(label));
}

std::vector<std::string> LabelAliasMap::aliases() const {
    return {normalized_.begin(), normalized_.end()};
}

namespace {

std::string id_string(const json& v) {
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_number_integer() || v.is_number_unsigned()) {
        return std::to_string(v.get<long long>());
    }
    return v.dump();
}

bool read_box_array(const json& arr, BBox& out) {
    if (!arr.is_array() || arr.size() != 4) {
        return false;
    }
    for (const auto& v : arr) {
        if (!v.is_number()) {
            return false;
        }
    }
    out = BBox{arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(), arr[3].get<double>()};
    return true;
}

std::string describe(const BBox& b) {
    std::ostringstream os;
    os << "(" << b.x << "," << b.y << "," << b.w << "," << b.h << ")";
    return os.str();
}

}  // namespace

void parse_coco(std::istream& in, const LabelAliasMap& aliases, DatasetOrigin origin, const RecordSink& sink,
                Diagnostics& diag) {
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed COCO document: ") + e.what(), e.byte);
    }
    if (!doc.is_object() || !doc.contains("images") || !doc.contains("annotations") || !doc.contains("categories")) {
        throw ParseError("COCO document must contain images, annotations and categories", 0);
    }

    std::set<std::string> person_categories;
    for (const auto& cat : doc["categories"]) {
        if (cat.contains("name") && cat["name"].is_string() && aliases.matches(cat["name"].get<std::string>())) {
            person_categories.insert(id_string(cat.at("id")));
        }
    }

    std::vector<SourceRecord> records;
    std::unordered_map<std::string, std::size_t> by_id;
    for (const auto& img : doc["images"]) {
        diag.count("images_seen");
        SourceRecord r;
        r.image_id = id_string(img.at("id"));
        r.image_path = img.value("file_name", r.image_id);
        r.dataset_origin = origin;
        r.width = img.value("width", 0);
        r.height = img.value("height", 0);
        if (r.width <= 0 || r.height <= 0) {
            diag.warn("COCO image " + r.image_id + " has no valid dimensions; skipped");
            diag.count("images_without_dims");
            continue;
        }
        if (!by_id.emplace(r.image_id, records.size()).second) {
            diag.warn("duplicate COCO image id " + r.image_id + "; later entry ignored");
            continue;
        }
        records.push_back(std::move(r));
    }

    for (const auto& ann : doc["annotations"]) {
        if (!person_categories.contains(id_string(ann.value("category_id", json())))) {
            continue;
        }
        const std::string image_id = id_string(ann.value("image_id", json()));
        auto it = by_id.find(image_id);
        if (it == by_id.end()) {
            diag.warn("annotation references unknown image id " + image_id + "; skipped");
            diag.count("unknown_image_refs");
            continue;
        }
        BBox raw;
        if (!ann.contains("bbox") || !read_box_array(ann["bbox"], raw)) {
            diag.warn("annotation on image " + image_id + " has no usable bbox; skipped");
            diag.count("boxes_skipped");
            continue;
        }
        auto& rec = records[it->second];
        auto clamped = clamp_to_image(raw, rec.size());
        if (!clamped) {
            diag.warn("box " + describe(raw) + " on image " + image_id + " is empty after clamping; skipped");
            diag.count("boxes_skipped");
            continue;
        }
        rec.person_boxes.push_back(*clamped);
    }

    for (auto& r : records) {
        if (!r.person_boxes.empty()) {
            sink(std::move(r));
        }
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::optional<double> to_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) {
            return std::nullopt;
        }
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

void parse_oid_csv(std::istream& in, const DimensionLookup& dims, const LabelAliasMap& aliases,
                   const RecordSink& sink, Diagnostics& diag, const OidOptions& options) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("empty OID CSV", 0);
    }
    const auto header = split_csv_line(line);
    auto column = [&header](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        return std::nullopt;
    };
    const auto c_id = column("ImageID");
    const auto c_label = column("LabelName");
    const auto c_xmin = column("XMin");
    const auto c_xmax = column("XMax");
    const auto c_ymin = column("YMin");
    const auto c_ymax = column("YMax");
    const auto c_conf = column("Confidence");
    if (!c_id || !c_label || !c_xmin || !c_xmax || !c_ymin || !c_ymax) {
        throw ParseError("OID CSV header lacks one of ImageID,LabelName,XMin,XMax,YMin,YMax", 0);
    }
    const std::size_t needed = std::max({*c_id, *c_label, *c_xmin, *c_xmax, *c_ymin, *c_ymax}) + 1;

    std::vector<SourceRecord> records;
    std::unordered_map<std::string, std::size_t> by_id;
    std::set<std::string> seen;
    std::set<std::string> missing_dims;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() < needed) {
            diag.warn("OID CSV line " + std::to_string(line_no) + " has too few columns; skipped");
            diag.count("malformed_lines");
            continue;
        }
        const std::string& image_id = f[*c_id];
        if (seen.insert(image_id).second) {
            diag.count("images_seen");
        }
        if (!aliases.matches(f[*c_label])) {
            continue;
        }
        if (options.min_confidence && c_conf && *c_conf < f.size()) {
            auto conf = to_double(f[*c_conf]);
            if (conf && *conf < *options.min_confidence) {
                diag.count("rows_below_confidence");
                continue;
            }
        }
        double coords[4];
        bool ok = true;
        const std::size_t cols[4] = {*c_xmin, *c_xmax, *c_ymin, *c_ymax};
        for (int k = 0; k < 4; ++k) {
            auto v = to_double(f[cols[k]]);
            if (!v) {
                ok = false;
                break;
            }
            if (*v < 0.0 || *v > 1.0) {
                diag.warn("OID CSV line " + std::to_string(line_no) + " normalized value out of range; clamped");
                *v = std::clamp(*v, 0.0, 1.0);
            }
            coords[k] = *v;
        }
        if (!ok) {
            diag.warn("OID CSV line " + std::to_string(line_no) + " has non-numeric coordinates; skipped");
            diag.count("malformed_lines");
            continue;
        }
        const double xmin = coords[0], xmax = coords[1], ymin = coords[2], ymax = coords[3];
        if (xmax <= xmin || ymax <= ymin) {
            diag.warn("OID CSV line " + std::to_string(line_no) + " has a degenerate box; skipped");
            diag.count("boxes_skipped");
            continue;
        }
        auto it = by_id.find(image_id);
        if (it == by_id.end()) {
            auto size = dims(image_id);
            if (!size) {
                if (missing_dims.insert(image_id).second) {
                    diag.warn("no dimensions for OID image " + image_id);
                }
                diag.count("rows_missing_dims");
                continue;
            }
            SourceRecord r;
            r.image_id = image_id;
            r.image_path = image_id + ".jpg";
            r.dataset_origin = DatasetOrigin::oid;
            r.width = size->width;
            r.height = size->height;
            it = by_id.emplace(image_id, records.size()).first;
            records.push_back(std::move(r));
        }
        auto& rec = records[it->second];
        const BBox box{xmin * rec.width, ymin * rec.height, (xmax - xmin) * rec.width, (ymax - ymin) * rec.height};
        auto clamped = clamp_to_image(box, rec.size());
        if (!clamped) {
            diag.count("boxes_skipped");
            continue;
        }
        rec.person_boxes.push_back(*clamped);
    }

    for (auto& r : records) {
        if (!r.person_boxes.empty()) {
            sink(std::move(r));
        }
    }
}

void parse_odgt(std::istream& in, const DimensionLookup& dims, const RecordSink& sink, Diagnostics& diag) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error&) {
            diag.count("malformed_lines");
            diag.warn("ODGT line " + std::to_string(line_no) + " is not valid JSON; skipped");
            continue;
        }
        if (!obj.is_object() || !obj.contains("ID") || !obj.contains("gtboxes") || !obj["gtboxes"].is_array()) {
            diag.count("malformed_lines");
            diag.warn("ODGT line " + std::to_string(line_no) + " lacks ID or gtboxes; skipped");
            continue;
        }
        diag.count("images_seen");
        SourceRecord r;
        r.image_id = id_string(obj["ID"]);
        r.image_path = r.image_id + ".jpg";
        r.dataset_origin = DatasetOrigin::crowdhuman;

        std::vector<BBox> candidates;
        for (const auto& gt : obj["gtboxes"]) {
            if (gt.value("tag", std::string()) != "person") {
                continue;
            }
            if (gt.contains("extra") && gt["extra"].is_object() && gt["extra"].value("ignore", 0) != 0) {
                continue;
            }
            BBox raw;
            if (!gt.contains("fbox") || !read_box_array(gt["fbox"], raw)) {
                diag.count("boxes_skipped");
                continue;
            }
            candidates.push_back(raw);
        }
        if (candidates.empty()) {
            continue;
        }
        auto size = dims(r.image_id);
        if (!size) {
            diag.warn("no dimensions for CrowdHuman image " + r.image_id);
            diag.count("rows_missing_dims");
            continue;
        }
        r.width = size->width;
        r.height = size->height;
        for (const auto& raw : candidates) {
            if (auto c = clamp_to_image(raw, r.size())) {
                r.person_boxes.push_back(*c);
            } else {
                diag.warn("fbox " + describe(raw) + " on image " + r.image_id + " is empty after clamping; skipped");
                diag.count("boxes_skipped");
            }
        }
        if (!r.person_boxes.empty()) {
            sink(std::move(r));
        }
    }
}

void parse_detection_import(std::istream& in, double min_confidence, const RecordSink& sink, Diagnostics& diag) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const json obj = json::parse(line);
            SourceRecord r;
            r.image_path = obj.at("image").get<std::string>();
            r.image_id = r.image_path;
            r.dataset_origin = DatasetOrigin::detection_import;
            r.width = obj.at("width").get<int>();
            r.height = obj.at("height").get<int>();
            if (r.width <= 0 || r.height <= 0) {
                throw std::invalid_argument("non-positive dimensions");
            }
            for (const auto& b : obj.at("boxes")) {
                const double x1 = b.at("x1").get<double>();
                const double y1 = b.at("y1").get<double>();
                const double x2 = b.at("x2").get<double>();
                const double y2 = b.at("y2").get<double>();
                const double conf = b.value("conf", 1.0);
                if (x2 <= x1 || y2 <= y1) {
                    diag.count("boxes_skipped");
                    continue;
                }
                if (conf < min_confidence) {
                    diag.count("boxes_below_confidence");
                    continue;
                }
                auto c = clamp_to_image(BBox{x1, y1, x2 - x1, y2 - y1}, r.size());
                if (!c) {
                    diag.count("boxes_skipped");
                    continue;
                }
                r.person_boxes.push_back(*c);
                r.confidences.push_back(conf);
            }
            diag.count("images_seen");
            if (!r.person_boxes.empty()) {
                sink(std::move(r));
            }
        } catch (const std::exception& e) {
            diag.count("malformed_lines");
            diag.warn("detection line " + std::to_string(line_no) + " skipped: " + e.what());
        }
    }
}

}  // namespace hqc
