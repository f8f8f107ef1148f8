// SPDX-License-Identifier: Apache-2.0

#include "hqc/error.hpp"
#include "hqc/manifest.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace hqc {
namespace {

SelectionManifest sample() {
    SelectionManifest m;
    ManifestEntry a;
    a.crop_id = "coco:1#0";
    a.source_image_id = "coco:1";
    a.crop = CropRect{3, 4, 400};
    a.hq_path = "crops/coco_1_0.png";
    a.raw_scores = {{"niqe", 3.25}, {"laplacian_variance", 812.5}};
    a.z_scores = {{"niqe", 0.1 + 0.2}};
    a.aggregate = 0.30000000000000004;
    a.rank = 1;
    a.status = CropStatus::selected;
    ManifestEntry b;
    b.crop_id = "coco:2#1";
    b.source_image_id = "coco:2";
    b.status = CropStatus::failed_blur_gate;
    b.raw_scores = {{"laplacian_variance", 12.0}};
    ManifestEntry c = a;
    c.crop_id = "coco:1#1";
    c.rank = 2;
    c.status = CropStatus::failed_threshold;
    c.failed_metric = "niqe";
    m.entries = {b, c, a};
    return m;
}

TEST(Manifest, RoundTripAndStableBytes) {
    auto m = sample();
    std::stringstream s1;
    write_manifest_jsonl(s1, m);
    const auto back = read_manifest_jsonl(s1);
    std::stringstream s2;
    write_manifest_jsonl(s2, back);
    EXPECT_EQ(s1.str(), s2.str());
    ASSERT_EQ(back.entries.size(), 3u);
    EXPECT_EQ(back.entries[2].aggregate, 0.30000000000000004);
    EXPECT_EQ(back.entries[1].failed_metric, "niqe");
    EXPECT_FALSE(back.entries[0].crop.has_value());
    EXPECT_EQ(s1.str().find(R"({"schema":"hqc.manifest/1","crop_id":"coco:2#1")"), 0u);
}

TEST(Manifest, SortRankedThenById) {
    auto m = sample();
    sort_manifest(m);
    EXPECT_EQ(m.entries[0].crop_id, "coco:1#0");
    EXPECT_EQ(m.entries[1].crop_id, "coco:1#1");
    EXPECT_EQ(m.entries[2].crop_id, "coco:2#1");
    const auto counts = status_counts(m);
    EXPECT_EQ(counts.at("selected"), 1u);
    EXPECT_EQ(counts.at("failed_threshold"), 1u);
    EXPECT_EQ(counts.at("failed_blur_gate"), 1u);
}

TEST(Manifest, MalformedInput) {
    std::istringstream bad("{\"schema\":\"hqc.manifest/1\",\n");
    EXPECT_THROW(read_manifest_jsonl(bad), ParseError);
    std::istringstream wrong(R"({"schema":"other/9","crop_id":"x"})");
    EXPECT_THROW(read_manifest_jsonl(wrong), DataError);
}

TEST(Manifest, SaveLoad) {
    test::TempDir tmp;
    save_manifest(tmp / "m.jsonl", sample());
    EXPECT_EQ(load_manifest(tmp / "m.jsonl").entries.size(), 3u);
    EXPECT_THROW(load_manifest(tmp / "none.jsonl"), DataError);
}

}  // namespace
}  // namespace hqc
