#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "geoedit/error.hpp"
#include "geoedit/experiment.hpp"
#include "test_support.hpp"

namespace geoedit {
namespace {

using testing::TempDir;
using testing::read_file;

ExperimentConfig tiny_config(const std::filesystem::path& out) {
    ExperimentConfig c = desk_config();
    c.model.vocab_size = 32;
    c.model.embed_dim = 8;
    c.model.hidden_dim = 16;
    c.data = {30, 10, 1};
    c.pretrain.epochs = 20;
    c.pretrain.batch_size = 8;
    c.pretrain.learning_rate = 0.01;
    c.finetune.epochs = 10;
    c.ae.epochs = 3;
    c.ae.probe_size = 8;
    c.tsne.iterations = 100;
    c.strategies = {Strategy::GeoEdit, Strategy::NoOrthogonal, Strategy::FullFt, Strategy::FLearning};
    c.seeds = {1, 2};
    c.output_dir = out;
    return c;
}

int count_lines(const std::string& text) {
    int n = 0;
    for (const char ch : text) n += ch == '\n';
    return n;
}

TEST(Strategy, NamesAcceptDashesAndUnderscores) {
    EXPECT_EQ(strategy_from_string("full_ft"), Strategy::FullFt);
    EXPECT_EQ(strategy_from_string("no-orthogonal"), Strategy::NoOrthogonal);
    EXPECT_THROW(strategy_from_string("rome"), ConfigError);
    EXPECT_TRUE(uses_plan(Strategy::GeoEditMw));
    EXPECT_FALSE(uses_plan(Strategy::NaiveAdd));
    EXPECT_EQ(edit_mode_for(Strategy::NoConflict), EditMode::NoConflict);
}

TEST(Config, DeskJsonMatchesDeskConfig) {
    const auto loaded = ExperimentConfig::load(std::filesystem::path(GEOEDIT_SOURCE_DIR) / "configs" / "desk.json");
    EXPECT_EQ(loaded.to_json(), desk_config().to_json());
}

TEST(Config, JsonRoundTrip) {
    TempDir dir;
    const auto c = tiny_config(dir.path());
    const auto back = ExperimentConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
    EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(Config, MissingSectionIsNamed) {
    auto j = nlohmann::json::parse(desk_config().to_json().dump());
    for (const char* section : {"model", "finetune", "ae", "eval", "seeds", "output_dir"}) {
        auto broken = j;
        broken.erase(section);
        try {
            ExperimentConfig::from_json(broken);
            FAIL() << "expected ConfigError for " << section;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(section), std::string::npos) << e.what();
        }
    }
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
    const auto j = nlohmann::json::parse(desk_config().to_json().dump());
    auto extra = j;
    extra["ae"]["dropout"] = 0.1;
    EXPECT_THROW(ExperimentConfig::from_json(extra), ConfigError);
    auto section = j;
    section["logging"] = nlohmann::json::object();
    EXPECT_THROW(ExperimentConfig::from_json(section), ConfigError);
    auto bad = j;
    bad["edit"]["phi1_deg"] = 100;
    EXPECT_THROW(ExperimentConfig::from_json(bad), ConfigError);
    auto wrong_type = j;
    wrong_type["data"]["n_facts"] = "many";
    EXPECT_THROW(ExperimentConfig::from_json(wrong_type), ConfigError);
    auto partial = j;
    partial["tsne"] = nlohmann::json::object();  // keys inside a section default
    EXPECT_EQ(ExperimentConfig::from_json(partial).tsne.iterations, desk_config().tsne.iterations);
}

TEST(Pipeline, RerunsAreByteIdenticalAndLedgerHasOneRowPerRun) {
    TempDir dir;
    const auto a = tiny_config(dir / "a");
    const auto b = tiny_config(dir / "b");
    const auto ra = cmd_pipeline(a);
    const auto rb = cmd_pipeline(b);
    ASSERT_EQ(ra.size(), 8u);
    ASSERT_EQ(rb.size(), 8u);

    const auto ledger = read_file(a.output_dir / "ledger.csv");
    EXPECT_EQ(ledger, read_file(b.output_dir / "ledger.csv"));
    EXPECT_EQ(count_lines(ledger), 1 + 8);

    int checkpoints = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(a.output_dir)) {
        if (entry.path().extension() != ".ckpt" && entry.path().extension() != ".jsonl") continue;
        const auto twin = b.output_dir / std::filesystem::relative(entry.path(), a.output_dir);
        EXPECT_EQ(read_file(entry.path()), read_file(twin)) << entry.path();
        ++checkpoints;
    }
    EXPECT_GT(checkpoints, 10);

    for (std::size_t i = 0; i < ra.size(); ++i) {
        EXPECT_EQ(ra[i].strategy, rb[i].strategy);
        EXPECT_EQ(ra[i].reliability, rb[i].reliability);
        EXPECT_EQ(ra[i].locality, rb[i].locality);
        EXPECT_EQ(ra[i].class_counts.has_value(), uses_plan(strategy_from_string(ra[i].strategy)));
        for (const auto& [phase, ms] : ra[i].wall_time_ms) EXPECT_GE(ms, 0.0) << phase;
    }
    EXPECT_TRUE(std::filesystem::exists(a.output_dir / "summary.csv"));
    EXPECT_TRUE(std::filesystem::exists(a.output_dir / "timings.csv"));
}

TEST(Pipeline, StagesOnDiskMatchTheInMemoryRun) {
    TempDir dir;
    auto c = tiny_config(dir / "staged");
    c.seeds = {3};
    c.strategies = {Strategy::GeoEdit};
    cmd_gen_data(c, 3);
    cmd_pretrain(c, 3);
    cmd_extract(c, 3);
    cmd_train_ae(c, 3);
    cmd_angles(c, 3, AngleMethod::AeTsne);
    cmd_edit(c, 3, Strategy::GeoEdit, AngleMethod::AeTsne);
    const auto staged = cmd_eval(c, 3, Strategy::GeoEdit);

    auto whole = tiny_config(dir / "whole");
    whole.seeds = {3};
    whole.strategies = {Strategy::GeoEdit};
    const auto reports = cmd_pipeline(whole);
    ASSERT_EQ(reports.size(), 1u);
    EXPECT_EQ(staged.reliability, reports[0].reliability);
    EXPECT_EQ(staged.locality, reports[0].locality);
    EXPECT_EQ(staged.class_counts, reports[0].class_counts);
    EXPECT_EQ(read_file(seed_dir(c, 3) / "edited_geoedit.ckpt"), read_file(seed_dir(whole, 3) / "edited_geoedit.ckpt"));
}

TEST(Pipeline, MissingInputNamesTheStage) {
    TempDir dir;
    const auto c = tiny_config(dir / "empty");
    try {
        cmd_extract(c, 1);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "extract");
    }
    EXPECT_TRUE(std::filesystem::exists(seed_dir(c, 1) / "FAILED"));
}

}  // namespace
}  // namespace geoedit
