// SPDX-License-Identifier: Apache-2.0

#include "hqc/degrade.hpp"
#include "hqc/error.hpp"
#include "hqc/image_io.hpp"
#include "hqc/manifest.hpp"
#include "hqc/niqe.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace hqc {
namespace {

const ImageBuffer& hq() {
    static const ImageBuffer img = read_image(test::data_dir() / "canonical" / "astronaut.png");
    return img;
}

void expect_in(double v, RealRange r) {
    EXPECT_GE(v, r.min - 1e-12);
    EXPECT_LE(v, r.max + 1e-12);
}

void expect_in(int v, IntRange r) {
    EXPECT_GE(v, r.min);
    EXPECT_LE(v, r.max);
}

TEST(Degrade, IdentityConfigIsIdentity) {
    const auto out = degrade(hq(), DegradationConfig::identity(), "id#0");
    EXPECT_EQ(out.width(), 512);
    EXPECT_LE(max_abs_diff(out, hq()), 1.0);
}

TEST(Degrade, SameKeySameBytesDifferentKeyDifferent) {
    const auto cfg = DegradationConfig::defaults();
    const auto a = degrade(hq(), cfg, "x#0");
    const auto b = degrade(hq(), cfg, "x#0");
    EXPECT_EQ(a, b);
    EXPECT_NE(degrade(hq(), cfg, "x#1"), a);
    auto other = cfg;
    other.seed = 99;
    EXPECT_NE(degrade(hq(), other, "x#0"), a);
}

TEST(Degrade, ReplayFromAuditLogIsExact) {
    const auto cfg = DegradationConfig::defaults();
    for (const char* id : {"r#0", "r#1", "r#2"}) {
        DegradationParams drawn;
        const auto lq = degrade(hq(), cfg, id, &drawn);
        const auto replayed = apply_degradation(hq(), params_from_json(params_to_json(drawn)));
        EXPECT_EQ(replayed, lq) << id;
    }
}

TEST(Degrade, DrawnParametersWithinRanges) {
    const auto cfg = DegradationConfig::defaults();
    for (int i = 0; i < 200; ++i) {
        const auto p = draw_degradation(cfg, "audit#" + std::to_string(i), 512, 512);
        const std::pair<const OrderConfig*, const OrderParams*> orders[] = {{&cfg.first, &p.first},
                                                                            {&cfg.second, &p.second}};
        for (const auto& [oc, op] : orders) {
            if (op->blur.applied) {
                expect_in(op->blur.kernel_size, oc->blur.kernel_size);
                EXPECT_EQ(op->blur.kernel_size % 2, 1);
                expect_in(op->blur.sigma_x, oc->blur.sigma);
                expect_in(op->blur.sigma_y, oc->blur.sigma);
                expect_in(op->blur.rotation, oc->blur.rotation);
            }
            if (op->resize.applied) expect_in(op->resize.scale, oc->resize.scale);
            if (op->noise.applied)
                expect_in(op->noise.strength, op->noise.poisson ? oc->noise.poisson_scale : oc->noise.gaussian_sigma);
            if (op->jpeg.applied) expect_in(op->jpeg.quality, oc->jpeg.quality);
        }
        if (p.sinc.applied) {
            expect_in(p.sinc.kernel_size, cfg.final_stage.sinc_kernel_size);
            expect_in(p.sinc.cutoff, cfg.final_stage.sinc_cutoff);
        }
    }
}

TEST(Degrade, DefaultConfigLowersSharpnessAndRaisesNiqe) {
    const auto model = load_niqe_model(default_niqe_model_path());
    const auto lq = degrade(hq(), DegradationConfig::defaults(), "quality#0");
    EXPECT_LT(laplacian_variance(to_luma(lq)), laplacian_variance(to_luma(hq())));
    EXPECT_GT(niqe_score(lq, model), niqe_score(hq(), model));
}

TEST(Degrade, RejectsWrongInputSize) {
    EXPECT_THROW(degrade(ImageBuffer(256, 256, 3, 1.0), DegradationConfig::defaults(), "a"), std::invalid_argument);
}

TEST(Degrade, X4OutputSize) {
    auto cfg = DegradationConfig::defaults();
    cfg.final_stage.output_size = 128;
    EXPECT_EQ(degrade(hq(), cfg, "q#0").width(), 128);
}

TEST(Kernels, NormalizedAndSymmetric) {
    for (auto k : {gaussian_kernel(9, 1.5, 0.7, 0.3), sinc_kernel(13, 1.2)}) {
        double s = 0.0;
        for (double v : k) s += v;
        EXPECT_NEAR(s, 1.0, 1e-12);
        const int n = static_cast<int>(std::lround(std::sqrt(double(k.size()))));
        for (int i = 0; i < n * n; ++i) EXPECT_NEAR(k[i], k[n * n - 1 - i], 1e-15);
    }
    const auto iso = gaussian_kernel(7, 1.0, 1.0, 0.0);
    EXPECT_NEAR(iso[3 * 7 + 4] / iso[3 * 7 + 3], std::exp(-0.5), 1e-12);
}

TEST(DegradationConfig, JsonRoundTripAndValidation) {
    auto cfg = DegradationConfig::defaults();
    cfg.seed = 1234;
    const auto back = parse_degradation_config(degradation_config_to_json(cfg), DegradationConfig::identity());
    EXPECT_EQ(degradation_config_to_json(back), degradation_config_to_json(cfg));
    EXPECT_THROW(parse_degradation_config(R"({"first":{"blur":{"kernel_size":[8,8]}}})", cfg), ConfigError);
    EXPECT_THROW(parse_degradation_config(R"({"first":{"jpeg":{"quality":[90,30]}}})", cfg), ConfigError);
    EXPECT_THROW(parse_degradation_config(R"({"final":{"sinc_probability":2}})", cfg), ConfigError);
    EXPECT_THROW(parse_degradation_config("[1]", cfg), ConfigError);
    const auto partial = parse_degradation_config(R"({"seed": 5})", cfg);
    EXPECT_EQ(partial.seed, 5u);
    EXPECT_EQ(partial.second.blur.sigma.max, 1.5);
}

TEST(BuildPairs, CardinalityDeterminismAndSkips) {
    test::TempDir tmp;
    SelectionManifest m;
    std::filesystem::create_directories(tmp / "curated");
    for (int i = 0; i < 10; ++i) {
        ManifestEntry e;
        e.crop_id = "toy:" + std::to_string(i) + "#0";
        e.source_image_id = "toy:" + std::to_string(i);
        e.hq_path = "curated/c" + std::to_string(i) + ".png";
        e.status = CropStatus::selected;
        const auto img = quantize_8bit(resize_square(crop(hq(), {i * 10, i * 5, 400}), 512));
        write_image(tmp.path() / e.hq_path, img);
        m.entries.push_back(e);
    }
    auto cfg = DegradationConfig::defaults();
    Diagnostics diag;
    const auto pairs = build_pairs(m, tmp.path(), cfg, tmp / "pairs", 2, diag);
    ASSERT_EQ(pairs.size(), 10u);
    EXPECT_EQ(diag.counter("pairs_written"), 10u);
    const auto loaded = load_pair_manifest(tmp / "pairs/pairs.jsonl");
    ASSERT_EQ(loaded.size(), 10u);
    std::vector<std::string> bytes;
    for (const auto& p : loaded) {
        EXPECT_EQ(p.codec, codec_identity());
        bytes.push_back(test::read_file(tmp.path() / "pairs" / p.lq_path));
        const auto replay = apply_degradation(read_image(tmp.path() / p.hq_path), p.params);
        EXPECT_EQ(replay, read_image(tmp.path() / "pairs" / p.lq_path));
    }
    Diagnostics diag2;
    build_pairs(m, tmp.path(), cfg, tmp / "pairs2", 1, diag2);
    const auto again = load_pair_manifest(tmp / "pairs2/pairs.jsonl");
    for (std::size_t i = 0; i < again.size(); ++i)
        EXPECT_EQ(test::read_file(tmp.path() / "pairs2" / again[i].lq_path), bytes[i]);
    EXPECT_EQ(test::read_file(tmp / "pairs/pairs.jsonl"), test::read_file(tmp / "pairs2/pairs.jsonl"));

    std::filesystem::remove(tmp.path() / m.entries[3].hq_path);
    Diagnostics diag3;
    EXPECT_EQ(build_pairs(m, tmp.path(), cfg, tmp / "pairs3", 1, diag3).size(), 9u);
    EXPECT_EQ(diag3.counter("pairs_skipped"), 1u);
}

}  // namespace
}  // namespace hqc
