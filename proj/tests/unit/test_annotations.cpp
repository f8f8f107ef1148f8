// SPDX-License-Identifier: Apache-2.0

#include "hqc/annotations.hpp"
#include "hqc/error.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

namespace hqc {
namespace {

std::vector<SourceRecord> coco(const std::string& text, Diagnostics& diag,
                               const LabelAliasMap& aliases = LabelAliasMap::defaults()) {
    std::istringstream in(text);
    return collect([&](const RecordSink& sink) { parse_coco(in, aliases, DatasetOrigin::coco, sink, diag); });
}

std::string coco_doc(const std::string& category, const std::string& bbox) {
    return R"({"images":[{"id":7,"file_name":"a.jpg","width":640,"height":480}],
               "annotations":[{"image_id":7,"category_id":1,"bbox":)" +
           bbox + R"(}],
               "categories":[{"id":1,"name":")" +
           category + R"("}]})";
}

DimensionLookup fixed_dims(std::map<std::string, ImageSize> dims) {
    return [dims](const std::string& id) -> std::optional<ImageSize> {
        auto it = dims.find(id);
        if (it == dims.end()) return std::nullopt;
        return it->second;
    };
}

void expect_inside(const std::vector<SourceRecord>& records) {
    for (const auto& r : records) {
        for (const auto& b : r.person_boxes) EXPECT_TRUE(inside_image(b, r.size())) << r.image_id;
    }
}

TEST(LabelAliasMap, CaseInsensitiveAndTrimmed) {
    const auto m = LabelAliasMap::defaults();
    EXPECT_TRUE(m.matches("person"));
    EXPECT_TRUE(m.matches("  Human Body "));
    EXPECT_TRUE(m.matches("/m/01g317"));
    EXPECT_FALSE(m.matches("dog"));
    const LabelAliasMap custom("walker", {"Pedestrian"});
    EXPECT_TRUE(custom.matches("pedestrian"));
    EXPECT_FALSE(custom.matches("walker"));
}

TEST(ParseCoco, SinglePersonBox) {
    Diagnostics diag;
    const auto recs = coco(coco_doc("person", "[10, 20, 100, 200]"), diag);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].image_id, "7");
    EXPECT_EQ(recs[0].image_path, "a.jpg");
    EXPECT_EQ(recs[0].width, 640);
    ASSERT_EQ(recs[0].person_boxes.size(), 1u);
    EXPECT_EQ(recs[0].person_boxes[0], (BBox{10, 20, 100, 200}));
}

TEST(ParseCoco, NonPersonCategoryYieldsNothing) {
    Diagnostics diag;
    EXPECT_TRUE(coco(coco_doc("dog", "[10, 20, 100, 200]"), diag).empty());
}

TEST(ParseCoco, ClampsToImage) {
    Diagnostics diag;
    const auto recs = coco(coco_doc("person", "[600, 400, 100, 200]"), diag);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].person_boxes[0], (BBox{600, 400, 40, 80}));
}

TEST(ParseCoco, MalformedDocumentReportsOffset) {
    Diagnostics diag;
    try {
        coco(R"({"images": [ {"id": 1,, }])", diag);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_GT(e.byte_offset(), 0u);
        EXPECT_LT(e.byte_offset(), 30u);
    }
}

TEST(ParseCoco, UnknownImageAndEmptyBoxesWarn) {
    const std::string doc = R"({"images":[{"id":1,"file_name":"a.jpg","width":100,"height":100}],
        "annotations":[{"image_id":99,"category_id":1,"bbox":[0,0,10,10]},
                       {"image_id":1,"category_id":1,"bbox":[120,0,10,10]},
                       {"image_id":1,"category_id":1,"bbox":[5,5,10,10]}],
        "categories":[{"id":1,"name":"person"}]})";
    Diagnostics diag;
    const auto recs = coco(doc, diag);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].person_boxes.size(), 1u);
    EXPECT_EQ(diag.counter("unknown_image_refs"), 1u);
    EXPECT_EQ(diag.counter("boxes_skipped"), 1u);
    EXPECT_GE(diag.warnings().size(), 2u);
}

TEST(ParseOid, NormalizedToPixels) {
    std::istringstream in(
        "ImageID,Source,LabelName,Confidence,XMin,XMax,YMin,YMax\n"
        "img1,xclick,/m/01g317,1,0.25,0.75,0.0,1.0\n");
    Diagnostics diag;
    const auto recs = collect([&](const RecordSink& s) {
        parse_oid_csv(in, fixed_dims({{"img1", {400, 200}}}), LabelAliasMap::defaults(), s, diag);
    });
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].image_path, "img1.jpg");
    ASSERT_EQ(recs[0].person_boxes.size(), 1u);
    EXPECT_EQ(recs[0].person_boxes[0], (BBox{100, 0, 200, 200}));
}

TEST(ParseOid, FiltersLabelsAndDegenerateRows) {
    std::istringstream in(
        "ImageID,Source,LabelName,Confidence,XMin,XMax,YMin,YMax\n"
        "img1,xclick,/m/0bt9lr,1,0.1,0.5,0.1,0.5\n"
        "img2,xclick,person,1,0.5,0.5,0.1,0.9\n"
        "img3,xclick,Human body,1,-0.1,0.5,0.1,1.2\n");
    Diagnostics diag;
    const auto recs = collect([&](const RecordSink& s) {
        parse_oid_csv(in, fixed_dims({{"img1", {100, 100}}, {"img2", {100, 100}}, {"img3", {100, 100}}}),
                      LabelAliasMap::defaults(), s, diag);
    });
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].image_id, "img3");
    EXPECT_EQ(recs[0].person_boxes[0], (BBox{0, 10, 50, 90}));
    EXPECT_EQ(diag.counter("boxes_skipped"), 1u);
}

TEST(ParseOid, MissingDimsCounted) {
    std::istringstream in(
        "ImageID,Source,LabelName,Confidence,XMin,XMax,YMin,YMax\n"
        "gone,xclick,person,1,0.1,0.5,0.1,0.5\n");
    Diagnostics diag;
    const auto recs = collect(
        [&](const RecordSink& s) { parse_oid_csv(in, fixed_dims({}), LabelAliasMap::defaults(), s, diag); });
    EXPECT_TRUE(recs.empty());
    EXPECT_EQ(diag.counter("rows_missing_dims"), 1u);
}

TEST(ParseOid, OptionalConfidenceFilter) {
    const std::string csv =
        "ImageID,Source,LabelName,Confidence,XMin,XMax,YMin,YMax\n"
        "a,xclick,person,0,0.1,0.5,0.1,0.5\n"
        "a,xclick,person,1,0.2,0.6,0.1,0.5\n";
    Diagnostics diag;
    std::istringstream in1(csv);
    auto all = collect([&](const RecordSink& s) {
        parse_oid_csv(in1, fixed_dims({{"a", {100, 100}}}), LabelAliasMap::defaults(), s, diag);
    });
    ASSERT_EQ(all.size(), 1u);
    EXPECT_EQ(all[0].person_boxes.size(), 2u);
    std::istringstream in2(csv);
    auto filtered = collect([&](const RecordSink& s) {
        parse_oid_csv(in2, fixed_dims({{"a", {100, 100}}}), LabelAliasMap::defaults(), s, diag, {0.5});
    });
    ASSERT_EQ(filtered.size(), 1u);
    EXPECT_EQ(filtered[0].person_boxes.size(), 1u);
}

TEST(ParseOdgt, TwoPersonBoxes) {
    std::istringstream in(
        R"({"ID":"x","gtboxes":[{"tag":"person","fbox":[1,2,30,40]},{"tag":"person","fbox":[50,2,30,40]}]})"
        "\n");
    Diagnostics diag;
    const auto recs =
        collect([&](const RecordSink& s) { parse_odgt(in, fixed_dims({{"x", {200, 100}}}), s, diag); });
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].person_boxes.size(), 2u);
    EXPECT_EQ(recs[0].image_path, "x.jpg");
}

TEST(ParseOdgt, MaskOnlyAndIgnoredOmitted) {
    std::istringstream in(
        R"({"ID":"m","gtboxes":[{"tag":"mask","fbox":[1,2,30,40]}]})"
        "\n"
        R"({"ID":"i","gtboxes":[{"tag":"person","fbox":[1,2,30,40],"extra":{"ignore":1}}]})"
        "\n"
        "not json\n");
    Diagnostics diag;
    const auto recs = collect([&](const RecordSink& s) {
        parse_odgt(in, fixed_dims({{"m", {200, 100}}, {"i", {200, 100}}}), s, diag);
    });
    EXPECT_TRUE(recs.empty());
    EXPECT_EQ(diag.counter("malformed_lines"), 1u);
}

TEST(ParseOdgt, NegativeOriginClamped) {
    std::istringstream in(R"({"ID":"n","gtboxes":[{"tag":"person","fbox":[-5,10,50,60]}]})");
    Diagnostics diag;
    const auto recs =
        collect([&](const RecordSink& s) { parse_odgt(in, fixed_dims({{"n", {200, 100}}}), s, diag); });
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].person_boxes[0], (BBox{0, 10, 45, 60}));
}

TEST(ParseDetectionImport, ConfidenceThreshold) {
    const auto run = [](double conf) {
        std::istringstream in(R"({"image":"p.jpg","width":200,"height":200,"boxes":[{"x1":0,"y1":0,"x2":100,"y2":100,"conf":)" +
                              std::to_string(conf) + R"(,"cls":0}]})");
        Diagnostics diag;
        return collect([&](const RecordSink& s) { parse_detection_import(in, 0.5, s, diag); });
    };
    const auto kept = run(0.9);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].person_boxes[0], (BBox{0, 0, 100, 100}));
    ASSERT_EQ(kept[0].confidences.size(), 1u);
    EXPECT_TRUE(run(0.3).empty());
}

TEST(ParseDetectionImport, DegenerateBoxSkipped) {
    std::istringstream in(
        R"({"image":"p.jpg","width":200,"height":200,"boxes":[{"x1":10,"y1":10,"x2":10,"y2":50,"conf":0.9,"cls":0}]})");
    Diagnostics diag;
    const auto recs = collect([&](const RecordSink& s) { parse_detection_import(in, 0.5, s, diag); });
    EXPECT_TRUE(recs.empty());
    EXPECT_EQ(diag.counter("boxes_skipped"), 1u);
}

// Random COCO documents: every emitted box is inside its image, and shuffling
// annotation order does not change the record set.
TEST(ParserProperties, InsideImageAndOrderIndependent) {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> coord(-50.0, 350.0);
    std::uniform_real_distribution<double> extent(-5.0, 200.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> anns;
        for (int i = 0; i < 30; ++i) {
            const int img = 1 + static_cast<int>(gen() % 5);
            const int cat = 1 + static_cast<int>(gen() % 2);
            std::ostringstream a;
            a << R"({"image_id":)" << img << R"(,"category_id":)" << cat << R"(,"bbox":[)" << coord(gen) << ','
              << coord(gen) << ',' << extent(gen) << ',' << extent(gen) << "]}";
            anns.push_back(a.str());
        }
        const auto doc = [&](const std::vector<std::string>& list) {
            std::string s = R"({"images":[)";
            for (int i = 1; i <= 5; ++i) {
                s += R"({"id":)" + std::to_string(i) + R"(,"file_name":"f)" + std::to_string(i) +
                     R"(.jpg","width":300,"height":250})" + (i < 5 ? "," : "");
            }
            s += R"(],"annotations":[)";
            for (std::size_t i = 0; i < list.size(); ++i) s += list[i] + (i + 1 < list.size() ? "," : "");
            s += R"(],"categories":[{"id":1,"name":"person"},{"id":2,"name":"cat"}]})";
            return s;
        };
        Diagnostics d1, d2;
        auto a = coco(doc(anns), d1);
        std::shuffle(anns.begin(), anns.end(), gen);
        auto b = coco(doc(anns), d2);
        expect_inside(a);
        const auto key = [](std::vector<SourceRecord> v) {
            std::map<std::string, std::vector<std::tuple<double, double, double, double>>> m;
            for (auto& r : v) {
                for (auto& bb : r.person_boxes) m[r.image_id].emplace_back(bb.x, bb.y, bb.w, bb.h);
                std::sort(m[r.image_id].begin(), m[r.image_id].end());
            }
            return m;
        };
        EXPECT_EQ(key(a), key(b));
    }
}

}  // namespace
}  // namespace hqc
