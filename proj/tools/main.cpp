// geoedit command-line driver. Every subcommand reads the same JSON
// experiment config; --seed and --out override the config's seeds and
// output_dir. Log verbosity comes from GEOEDIT_LOG (trace..off, default info).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "geoedit/error.hpp"
#include "geoedit/experiment.hpp"

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> strategy;
    std::optional<std::string> method;
    std::optional<std::string> out;
    std::optional<std::string> checkpoint;
};

geoedit::ExperimentConfig load(const Options& o) {
    auto cfg = geoedit::ExperimentConfig::load(o.config);
    if (o.seed) cfg.seeds = {*o.seed};
    if (o.out) cfg.output_dir = *o.out;
    if (o.method) cfg.method = geoedit::angle_method_from_string(*o.method);
    return cfg;
}

geoedit::Strategy strategy(const Options& o) {
    return o.strategy ? geoedit::strategy_from_string(*o.strategy) : geoedit::Strategy::GeoEdit;
}

void configure_logging() {
    const char* level = std::getenv("GEOEDIT_LOG");
    spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::info);
    spdlog::set_pattern("[%l] %v");
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Geometric knowledge editing on a toy fact-lookup model"};
    app.require_subcommand(1);
    Options o;

    auto add = [&](const std::string& name, const std::string& help) {
        auto* cmd = app.add_subcommand(name, help);
        cmd->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", o.seed, "run a single seed instead of the config's list");
        cmd->add_option("--out", o.out, "output directory (overrides output_dir)");
        return cmd;
    };
    const std::vector<std::string> strategies{"geoedit",  "geoedit-mw", "no-synergistic", "no-orthogonal",
                                              "no-conflict", "full-ft", "f-learning",     "naive-add"};
    const std::vector<std::string> methods{"raw", "pca", "tsne", "ae-tsne"};

    auto* gen = add("gen-data", "generate the synthetic fact dataset");
    auto* pre = add("pretrain", "train the original model on old knowledge");
    auto* ext = add("extract", "fine-tune on old/new knowledge and extract task vectors");
    auto* tae = add("train-ae", "train the per-dimension auto-encoders");
    auto* ang = add("angles", "reduce task vectors and classify neurons");
    ang->add_option("--method", o.method, "reduction method")->check(CLI::IsMember(methods));
    auto* edt = add("edit", "apply an editing strategy");
    edt->add_option("--strategy", o.strategy, "editing strategy")->check(CLI::IsMember(strategies));
    edt->add_option("--method", o.method, "reduction method for plan-based strategies")->check(CLI::IsMember(methods));
    auto* evl = add("eval", "evaluate an edited checkpoint");
    evl->add_option("--strategy", o.strategy, "strategy label")->check(CLI::IsMember(strategies));
    evl->add_option("--checkpoint", o.checkpoint, "checkpoint to evaluate (default: the strategy's edit)");
    auto* pip = add("pipeline", "run every stage for every seed and strategy");
    pip->add_option("--method", o.method, "reduction method")->check(CLI::IsMember(methods));

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = load(o);
        auto each_seed = [&](auto&& fn) {
            for (const auto s : cfg.seeds) fn(s);
        };
        if (gen->parsed()) each_seed([&](auto s) { geoedit::cmd_gen_data(cfg, s); });
        else if (pre->parsed()) each_seed([&](auto s) { geoedit::cmd_pretrain(cfg, s); });
        else if (ext->parsed()) each_seed([&](auto s) { geoedit::cmd_extract(cfg, s); });
        else if (tae->parsed()) each_seed([&](auto s) { geoedit::cmd_train_ae(cfg, s); });
        else if (ang->parsed()) each_seed([&](auto s) { geoedit::cmd_angles(cfg, s, cfg.method); });
        else if (edt->parsed()) each_seed([&](auto s) { geoedit::cmd_edit(cfg, s, strategy(o), cfg.method); });
        else if (evl->parsed()) {
            std::optional<std::filesystem::path> ckpt;
            if (o.checkpoint) ckpt = *o.checkpoint;
            each_seed([&](auto s) {
                const auto r = geoedit::cmd_eval(cfg, s, strategy(o), ckpt);
                std::cout << r.to_json().dump(2) << '\n';
            });
        } else if (pip->parsed()) {
            geoedit::cmd_pipeline(cfg);
            std::cout << "summary written to " << (cfg.output_dir / "summary.csv").string() << '\n';
        }
    } catch (const geoedit::Error& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("unexpected failure: {}", e.what());
        return 2;
    }
    return 0;
}
