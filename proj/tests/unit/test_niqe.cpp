// SPDX-License-Identifier: Apache-2.0

#include "hqc/error.hpp"
#include "hqc/image_io.hpp"
#include "hqc/niqe.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hqc {
namespace {

std::vector<ImageBuffer> pristine_corpus() {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(test::data_dir() / "pristine")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<ImageBuffer> out;
    for (const auto& f : files) out.push_back(to_luma(read_image(f)));
    return out;
}

const NiqeModel& shipped_model() {
    static const NiqeModel m = load_niqe_model(default_niqe_model_path());
    return m;
}

TEST(NiqeModel, ShippedModelValid) {
    const auto& m = shipped_model();
    EXPECT_EQ(m.mean.size(), 36u);
    EXPECT_EQ(m.covariance.size(), 36u * 36u);
    EXPECT_EQ(m.patch_size, 96);
    EXPECT_DOUBLE_EQ(m.sharpness_fraction, 0.75);
    EXPECT_NO_THROW(m.validate());
}

TEST(NiqeModel, TextRoundTripIsExact) {
    std::stringstream ss;
    write_niqe_model(ss, shipped_model());
    const auto back = read_niqe_model(ss);
    EXPECT_EQ(back.mean, shipped_model().mean);
    EXPECT_EQ(back.covariance, shipped_model().covariance);
    EXPECT_EQ(back.patch_size, shipped_model().patch_size);
}

TEST(NiqeModel, ValidationRejectsBadModels) {
    NiqeModel m = shipped_model();
    m.covariance[1] += 1e-3;
    EXPECT_THROW(m.validate(), DataError);
    m = shipped_model();
    for (int i = 0; i < 36; ++i) m.covariance[i * 36 + i] = -1.0;
    EXPECT_THROW(m.validate(), DataError);
    m = shipped_model();
    m.patch_size = 95;
    EXPECT_THROW(m.validate(), DataError);
    std::istringstream bad("format other 1\n");
    EXPECT_THROW(read_niqe_model(bad), DataError);
}

TEST(NiqeScore, ReferenceParityOnCanonicalImages) {
    const auto ref = nlohmann::json::parse(test::read_file(test::data_dir() / "canonical" / "niqe_reference.json"));
    for (const auto& [name, value] : ref.at("scores").items()) {
        const double got = niqe_score(read_image(test::data_dir() / "canonical" / name), shipped_model());
        EXPECT_NEAR(got, value.get<double>(), 0.05) << name;
    }
}

TEST(NiqeScore, BlurredScoresHigher) {
    const auto img = read_image(test::data_dir() / "canonical" / "astronaut.png");
    const double a = niqe_score(img, shipped_model());
    const double b = niqe_score(quantize_8bit(gaussian_blur(img, 3.0)), shipped_model());
    EXPECT_GT(b, a);
}

TEST(NiqeScore, NonNegativeAndTooSmallThrows) {
    EXPECT_GE(niqe_score(test::noise_image(200, 200, 1), shipped_model()), 0.0);
    EXPECT_THROW(niqe_score(test::noise_image(90, 200, 1), shipped_model()), DataError);
}

TEST(NiqeFit, SelfModelScoresZero) {
    const auto img = pristine_corpus().front();
    const std::vector<ImageBuffer> one{img};
    const auto model = niqe_fit(one, 48, 1.0);
    EXPECT_NEAR(niqe_score(img, model), 0.0, 1e-6);
}

TEST(NiqeFit, PristineCorpusModel) {
    const auto corpus = pristine_corpus();
    ASSERT_EQ(corpus.size(), 10u);
    const auto model = niqe_fit(corpus);
    for (double v : model.mean) EXPECT_TRUE(std::isfinite(v));
    for (double v : model.covariance) EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(model.mean[0], 0.2);
    EXPECT_LT(model.mean[0], 5.0);
    EXPECT_NO_THROW(model.validate());
    for (int i = 0; i < 36; ++i)
        for (int j = 0; j < 36; ++j) EXPECT_NEAR(model.covariance[i * 36 + j], model.covariance[j * 36 + i], 1e-9);
    const auto again = niqe_fit(corpus);
    EXPECT_EQ(again.mean, model.mean);
    EXPECT_EQ(again.covariance, model.covariance);
}

TEST(NiqeFit, InsufficientData) {
    const auto corpus = pristine_corpus();
    const std::vector<ImageBuffer> two{corpus[0], corpus[1]};
    EXPECT_THROW(niqe_fit(two, 96, 0.75), DataError);  // 2 * 7 patches
    const std::vector<ImageBuffer> tiny{test::noise_image(100, 300, 1)};
    EXPECT_THROW(niqe_fit(tiny, 96, 0.75), DataError);
}

TEST(NiqePatchFeatures, TileCountAndSharpness) {
    const auto img = test::noise_image(300, 200, 3);
    std::vector<double> sharp;
    const auto rows = niqe_patch_features(img, 96, &sharp);
    EXPECT_EQ(rows.size(), 6u);
    EXPECT_EQ(sharp.size(), 6u);
    for (const auto& r : rows)
        for (double v : r) EXPECT_TRUE(std::isfinite(v));
}

}  // namespace
}  // namespace hqc
