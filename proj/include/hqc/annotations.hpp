// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/diagnostics.hpp"
#include "hqc/geometry.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace hqc {

enum class DatasetOrigin { coco, oid, object365, crowdhuman, detection_import };

std::string_view to_string(DatasetOrigin origin);
DatasetOrigin parse_dataset_origin(std::string_view name);

/// One source image with its person boxes. `confidences` is either empty or
/// aligned with `person_boxes`.
struct SourceRecord {
    std::string image_id;
    std::string image_path;
    DatasetOrigin dataset_origin = DatasetOrigin::coco;
    int width = 0;
    int height = 0;
    std::vector<BBox> person_boxes;
    std::vector<double> confidences;

    ImageSize size() const noexcept { return {width, height}; }
};

/// Case-insensitive set of labels that count as "person". Lookup trims
/// surrounding whitespace before comparing.
class LabelAliasMap {
public:
    LabelAliasMap(std::string canonical, std::vector<std::string> aliases);

    /// COCO "person", OID "Human body"/"Person" and their machine ids,
    /// Object365 "Person", CrowdHuman "person".
    static LabelAliasMap defaults();

    bool matches(std::string_view label) const;
    const std::string& canonical() const noexcept { return canonical_; }
    std::vector<std::string> aliases() const;

private:
    std::string canonical_;
    std::set<std::string> normalized_;
};

using RecordSink = std::function<void(SourceRecord)>;
using DimensionLookup = std::function<std::optional<ImageSize>(const std::string& image_id)>;

/// COCO-style JSON (also used by Object365). Throws ParseError with the byte
/// offset on a malformed document.
void parse_coco(std::istream& in, const LabelAliasMap& aliases, DatasetOrigin origin, const RecordSink& sink,
                Diagnostics& diag);

struct OidOptions {
    /// When set, rows whose Confidence column is below this value are dropped.
    std::optional<double> min_confidence;
};

/// Open Images box CSV with normalized coordinates.
void parse_oid_csv(std::istream& in, const DimensionLookup& dims, const LabelAliasMap& aliases,
                   const RecordSink& sink, Diagnostics& diag, const OidOptions& options = {});

/// CrowdHuman ODGT: one JSON object per line with gtboxes[].fbox.
void parse_odgt(std::istream& in, const DimensionLookup& dims, const RecordSink& sink, Diagnostics& diag);

inline constexpr double kDefaultDetectionMinConfidence = 0.5;

/// Line-delimited detector output: {image, width, height, boxes: [{x1,y1,x2,y2,conf,cls}]}.
void parse_detection_import(std::istream& in, double min_confidence, const RecordSink& sink, Diagnostics& diag);

/// Convenience: collect a parser's output into a vector.
template <typename Parser>
std::vector<SourceRecord> collect(Parser&& parser) {
    std::vector<SourceRecord> out;
    parser([&out](SourceRecord r) { out.push_back(std::move(r)); });
    return out;
}

}  // namespace hqc
