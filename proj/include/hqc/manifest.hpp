// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hqc/selection.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace hqc {

inline constexpr std::string_view kManifestSchema = "hqc.manifest/1";

/// One JSON object per line, keys in a fixed order, doubles in shortest
/// round-trip form. Identical manifests serialize to identical bytes.
void write_manifest_jsonl(std::ostream& out, const SelectionManifest& manifest);
void save_manifest(const std::filesystem::path& path, const SelectionManifest& manifest);

/// Throws ParseError on malformed JSON and DataError on a schema mismatch.
SelectionManifest read_manifest_jsonl(std::istream& in);
SelectionManifest load_manifest(const std::filesystem::path& path);

/// Count per status name, e.g. {"selected": 3, "suppressed_nms": 1}.
std::map<std::string, std::size_t> status_counts(const SelectionManifest& manifest);

/// Ranked entries by rank, then unranked entries by crop_id.
void sort_manifest(SelectionManifest& manifest);

}  // namespace hqc
