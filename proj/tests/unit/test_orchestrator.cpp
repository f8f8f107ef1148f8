// SPDX-License-Identifier: Apache-2.0

#include "hqc/error.hpp"
#include "hqc/image_io.hpp"
#include "hqc/manifest.hpp"
#include "hqc/orchestrator.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <map>
#include <set>

namespace hqc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

PipelineConfig toy_config(const fs::path& root) {
    auto cfg = load_pipeline_config(test::toy_dir() / "toy_config.json");
    cfg.output_dir = root / "out";
    cfg.checkpoint_dir = root / "ck";
    return cfg;
}

const json& expected() {
    static const json j = json::parse(test::read_file(test::toy_dir() / "expected_funnel.json"));
    return j;
}

class ToyRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        tmp_ = new test::TempDir("toy-run");
        cfg_ = new PipelineConfig(toy_config(tmp_->path()));
        result_ = new RunResult(run_pipeline(*cfg_));
    }
    static void TearDownTestSuite() {
        delete result_;
        delete cfg_;
        delete tmp_;
    }
    static test::TempDir* tmp_;
    static PipelineConfig* cfg_;
    static RunResult* result_;
};

test::TempDir* ToyRun::tmp_ = nullptr;
PipelineConfig* ToyRun::cfg_ = nullptr;
RunResult* ToyRun::result_ = nullptr;

TEST_F(ToyRun, FunnelMatchesGroundTruth) {
    ASSERT_TRUE(result_->completed);
    const auto& f = expected().at("funnel");
    const auto& s = result_->stats;
    EXPECT_EQ(s.collected, f.at("collected").get<std::size_t>());
    EXPECT_EQ(s.person_labeled, f.at("person_labeled").get<std::size_t>());
    EXPECT_EQ(s.passed_blur_gate, f.at("passed_blur_gate").get<std::size_t>());
    EXPECT_EQ(s.boxes_total, f.at("boxes_total").get<std::size_t>());
    EXPECT_EQ(s.boxes_after_size_gate, f.at("boxes_after_size_gate").get<std::size_t>());
    EXPECT_EQ(s.crops_after_nms, f.at("crops_after_nms").get<std::size_t>());
    EXPECT_EQ(s.scored, f.at("scored").get<std::size_t>());
    EXPECT_EQ(s.top_fraction, f.at("top_fraction").get<std::size_t>());
    EXPECT_EQ(s.selected, f.at("selected").get<std::size_t>());
    for (const auto& [k, v] : f.at("reasons").items()) EXPECT_EQ(s.reasons.at(k), v.get<std::size_t>()) << k;
    EXPECT_TRUE(s.monotone());
}

TEST_F(ToyRun, PerBoxStatusesAndRects) {
    std::map<std::string, const ManifestEntry*> by_id;
    for (const auto& e : result_->manifest.entries) {
        EXPECT_TRUE(by_id.emplace(e.crop_id, &e).second) << "duplicate " << e.crop_id;
    }
    std::size_t expected_entries = 0;
    for (const auto& img : expected().at("images")) {
        const auto statuses = img.at("statuses");
        for (std::size_t i = 0; i < statuses.size(); ++i) {
            ++expected_entries;
            const auto id = img.at("image_id").get<std::string>() + "#" + std::to_string(i);
            ASSERT_TRUE(by_id.count(id)) << id;
            const auto& e = *by_id.at(id);
            const auto want = statuses[i].get<std::string>();
            if (want == "scored") {
                EXPECT_TRUE(e.status == CropStatus::selected || e.status == CropStatus::below_top_fraction) << id;
            } else {
                EXPECT_EQ(to_string(e.status), want) << id;
            }
            if (want != "failed_blur_gate") {
                ASSERT_TRUE(e.crop.has_value()) << id;
                const auto sq = img.at("squares")[i];
                EXPECT_EQ(e.crop->x, sq[0].get<int>()) << id;
                EXPECT_EQ(e.crop->y, sq[1].get<int>()) << id;
                EXPECT_EQ(e.crop->side, sq[2].get<int>()) << id;
            }
        }
    }
    EXPECT_EQ(result_->manifest.entries.size(), expected_entries);
}

TEST_F(ToyRun, OutputsWritten) {
    const auto& out = cfg_->output_dir;
    EXPECT_TRUE(fs::exists(out / "manifest.jsonl"));
    EXPECT_TRUE(fs::exists(out / "stats.json"));
    EXPECT_TRUE(fs::exists(out / "funnel.txt"));
    std::size_t curated = 0;
    for (const auto& e : fs::directory_iterator(out / "curated")) {
        const auto img = read_image(e.path());
        EXPECT_EQ(img.width(), 512);
        EXPECT_EQ(img.height(), 512);
        ++curated;
    }
    EXPECT_EQ(curated, result_->stats.selected);
    const auto stats = FunnelStats::from_json(test::read_file(out / "stats.json"));
    EXPECT_EQ(stats.to_json(), result_->stats.to_json());
    EXPECT_EQ(test::read_file(out / "funnel.txt"), result_->stats.to_table());
    const auto tsv = test::read_file(out / "candidates.tsv");
    EXPECT_EQ(static_cast<std::size_t>(std::count(tsv.begin(), tsv.end(), '\n')), result_->stats.scored);
}

TEST_F(ToyRun, SelectedHaveBetterMeanNiqe) {
    double sel = 0, all = 0;
    std::size_t ns = 0, na = 0;
    for (const auto& e : result_->manifest.entries) {
        if (!e.raw_scores.count("niqe")) continue;
        all += e.raw_scores.at("niqe");
        ++na;
        if (e.status == CropStatus::selected) {
            sel += e.raw_scores.at("niqe");
            ++ns;
        }
    }
    ASSERT_GT(ns, 0u);
    EXPECT_LT(sel / ns, all / na);
}

TEST_F(ToyRun, ReselectWithDifferentFractionReusesCheckpoints) {
    auto cfg = *cfg_;
    cfg.fraction = 0.5;
    cfg.output_dir = tmp_->path() / "out-half";
    fs::create_directories(cfg.output_dir);
    fs::copy(cfg_->output_dir / "crops", cfg.output_dir / "crops");
    const auto r = select_from_checkpoints(cfg);
    EXPECT_EQ(r.stats.top_fraction, result_->stats.scored / 2);
    EXPECT_EQ(r.stats.scored, result_->stats.scored);
}

TEST_F(ToyRun, ResumeWithChangedBlurThresholdRefused) {
    auto cfg = *cfg_;
    cfg.blur_variance_threshold = 150.0;
    RunOptions opts;
    opts.resume = true;
    EXPECT_THROW(run_pipeline(cfg, opts), ConfigError);
    EXPECT_THROW(select_from_checkpoints(cfg), ConfigError);
}

TEST_F(ToyRun, ExternalScoresInjectedBetweenRuns) {
    auto cfg = *cfg_;
    cfg.output_dir = tmp_->path() / "out-ext";
    cfg.checkpoint_dir = tmp_->path() / "ck-ext";
    fs::copy(cfg_->checkpoint_dir, cfg.checkpoint_dir, fs::copy_options::recursive);
    fs::create_directories(cfg.output_dir);
    fs::copy(cfg_->output_dir / "crops", cfg.output_dir / "crops");
    cfg.metrics.push_back({"maniqa", Direction::higher_better, 0.955, MetricSource::external});
    EXPECT_THROW(select_from_checkpoints(cfg), DataError);

    // maniqa concordant with NIQE, so the top 11 by aggregate are the 11 best NIQE
    // crops; the threshold keeps only the best 5 of them.
    std::vector<std::pair<double, std::string>> by_niqe;
    for (const auto& e : result_->manifest.entries)
        if (e.raw_scores.count("niqe")) by_niqe.emplace_back(e.raw_scores.at("niqe"), e.crop_id);
    std::sort(by_niqe.begin(), by_niqe.end());
    std::string csv = "crop_id,maniqa\n";
    for (std::size_t i = 0; i < by_niqe.size(); ++i)
        csv += by_niqe[i].second + "," + std::to_string(1.0 - 0.01 * static_cast<double>(i)) + "\n";
    test::write_file(tmp_->path() / "maniqa.csv", csv);
    Diagnostics diag;
    ingest_scores_file(cfg, tmp_->path() / "maniqa.csv", diag);
    const auto r = select_from_checkpoints(cfg);
    EXPECT_EQ(r.stats.top_fraction, 11u);
    EXPECT_EQ(r.stats.selected, 5u);
    EXPECT_EQ(r.stats.reasons.count("failed_threshold") ? r.stats.reasons.at("failed_threshold") : 0u, 6u);
    for (std::size_t i = 0; i < 11; ++i) {
        const auto it = std::find_if(r.manifest.entries.begin(), r.manifest.entries.end(),
                                     [&](const ManifestEntry& e) { return e.crop_id == by_niqe[i].second; });
        ASSERT_NE(it, r.manifest.entries.end());
        EXPECT_EQ(it->status, i < 5 ? CropStatus::selected : CropStatus::failed_threshold) << i;
        if (i >= 5) EXPECT_EQ(it->failed_metric, "maniqa");
        EXPECT_DOUBLE_EQ(it->raw_scores.at("maniqa"), 1.0 - 0.01 * static_cast<double>(i));
    }

    test::write_file(tmp_->path() / "bad.csv", "crop_id,maniqa\nnot-a-crop,0.5\n");
    EXPECT_THROW(ingest_scores_file(cfg, tmp_->path() / "bad.csv", diag), DataError);
}

TEST_F(ToyRun, HoldoutSplitIsSourceDisjoint) {
    const auto split = holdout_split(result_->manifest, {"odgt"}, 0.2, 3);
    EXPECT_EQ(split.train.entries.size() + split.holdout.entries.size(), result_->manifest.entries.size());
    std::set<std::string> train_images;
    for (const auto& e : split.train.entries) {
        EXPECT_NE(e.source_image_id.rfind("odgt:", 0), 0u);
        train_images.insert(e.source_image_id);
    }
    for (const auto& e : split.holdout.entries) EXPECT_FALSE(train_images.count(e.source_image_id));
    const auto again = holdout_split(result_->manifest, {"odgt"}, 0.2, 3);
    EXPECT_EQ(again.holdout.entries.size(), split.holdout.entries.size());
}

TEST(Orchestrator, StopAndResumeMatchesColdRun) {
    test::TempDir a("toy-a"), b("toy-b");
    auto ca = toy_config(a.path());
    auto cb = toy_config(b.path());
    ca.workers = 2;
    const auto cold = run_pipeline(ca);
    RunOptions stop;
    stop.stop_after_shards = 2;
    const auto partial = run_pipeline(cb, stop);
    EXPECT_FALSE(partial.completed);
    EXPECT_FALSE(fs::exists(cb.output_dir / "manifest.jsonl"));
    const auto resumed = resume_pipeline(cb);
    ASSERT_TRUE(resumed.completed);
    EXPECT_EQ(test::read_file(ca.output_dir / "manifest.jsonl"), test::read_file(cb.output_dir / "manifest.jsonl"));
}

TEST(Orchestrator, ResumeWithoutCheckpointsIsARun) {
    test::TempDir a("toy-r");
    auto cfg = toy_config(a.path());
    cfg.sources.resize(1);  // COCO part only, to keep this quick
    cfg.shard_size = 7;
    const auto r = resume_pipeline(cfg);
    EXPECT_TRUE(r.completed);
    EXPECT_EQ(r.stats.collected, 20u);
}

TEST(Orchestrator, UnreadableImagePolicy) {
    test::TempDir tmp("unreadable");
    const auto toy = test::toy_dir();
    test::write_file(tmp / "ann.json", R"({"images":[
        {"id":1,"file_name":"coco_02.jpg","width":480,"height":360},
        {"id":2,"file_name":"coco_04.jpg","width":480,"height":360},
        {"id":3,"file_name":"missing.jpg","width":480,"height":360}],
      "annotations":[{"image_id":1,"category_id":1,"bbox":[10,10,250,250]},
                     {"image_id":2,"category_id":1,"bbox":[200,50,250,300]},
                     {"image_id":3,"category_id":1,"bbox":[10,10,250,250]}],
      "categories":[{"id":1,"name":"person"}]})");
    PipelineConfig cfg;
    cfg.sources.push_back({"t", DatasetOrigin::coco, tmp / "ann.json", toy / "images" / "coco"});
    cfg.min_side = 200;
    cfg.output_dir = tmp / "out";
    cfg.checkpoint_dir = tmp / "ck";
    cfg.fraction = 0.5;
    const auto r = run_pipeline(cfg);
    EXPECT_EQ(r.stats.reasons.at("unreadable_images"), 1u);
    EXPECT_EQ(r.stats.person_labeled, 3u);
    cfg.on_unreadable = UnreadablePolicy::fail;
    EXPECT_THROW(run_pipeline(cfg), DataError);
}

TEST(FunnelStats, JsonRoundTripAndMonotone) {
    FunnelStats s;
    s.collected = 10;
    s.person_labeled = 8;
    s.passed_blur_gate = 6;
    s.boxes_total = 9;
    s.boxes_after_size_gate = 7;
    s.crops_after_nms = 6;
    s.scored = 6;
    s.top_fraction = 2;
    s.selected = 1;
    s.reasons = {{"failed_threshold", 1}};
    EXPECT_TRUE(s.monotone());
    EXPECT_EQ(FunnelStats::from_json(s.to_json()).to_json(), s.to_json());
    s.selected = 3;
    EXPECT_FALSE(s.monotone());
}

TEST(CropFileName, SanitizedAndUnique) {
    const auto a = crop_file_name("coco:12#0");
    const auto b = crop_file_name("coco/12#0");
    EXPECT_NE(a, b);
    EXPECT_EQ(a.find('/'), std::string::npos);
    EXPECT_EQ(a.substr(a.size() - 4), ".png");
}

}  // namespace
}  // namespace hqc
