#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoedit/autoencoder.hpp"
#include "geoedit/editor.hpp"
#include "geoedit/eval.hpp"
#include "geoedit/facts.hpp"
#include "geoedit/geometry.hpp"
#include "geoedit/training.hpp"

namespace geoedit {

enum class Strategy { GeoEdit, GeoEditMw, NoSynergistic, NoOrthogonal, NoConflict, FullFt, FLearning, NaiveAdd };

std::string_view to_string(Strategy s);
/// Accepts dashes or underscores ("full-ft", "full_ft").
Strategy strategy_from_string(std::string_view name);
/// True for strategies that classify neurons and build an edit plan.
bool uses_plan(Strategy s);
EditMode edit_mode_for(Strategy s);

struct DataConfig {
    int n_facts = 200;
    int n_edits = 100;
    int n_rephrases = 3;
};

struct ExperimentConfig {
    ModelConfig model;
    DataConfig data;
    TrainConfig pretrain;
    TrainConfig finetune;
    AEConfig ae;
    TsneConfig tsne;
    EditConfig edit;
    AngleMethod method = AngleMethod::AeTsne;
    double flearning_gamma = 1.0;
    std::vector<Strategy> strategies;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path output_dir = "out";

    /// Every section (model, data, pretrain, finetune, ae, tsne, edit, eval,
    /// seeds, output_dir) must be present; keys missing inside a section take
    /// defaults, unknown keys are rejected.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& path);

    nlohmann::ordered_json to_json() const;
    void validate() const;
};

/// Defaults used by configs/desk.json.
ExperimentConfig desk_config();

// ---- in-memory stages; every random draw comes from derive_seed(seed, <stage>)

FactDataset make_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

/// init_model ("init") then fine-tuning of all tensors on the pretraining corpus ("pretrain").
FinetuneResult pretrain_base(const ExperimentConfig& cfg, const FactDataset& data, std::uint64_t seed);

struct Extraction {
    TaskVectorSet tau_old;
    TaskVectorSet tau_new;
    ImportanceTracker importance_old;
    ImportanceTracker importance_new;
    FusionWeights weights;
    /// Wall time of the two fine-tunes (written to extract.json, not part of
    /// any edit-phase timing).
    double ft_old_ms = 0.0;
    double ft_new_ms = 0.0;
};

/// tau_old from fine-tuning on the edit targets' old answers ("ft_old"),
/// tau_new from fine-tuning on the new answers ("ft_new").
Extraction extract_task_vectors(const ExperimentConfig& cfg, const ModelParams& base, const FactDataset& data,
                                std::uint64_t seed);

AEBank train_autoencoders(const ExperimentConfig& cfg, const ModelParams& base, const FactDataset& data,
                          const Extraction& ex, std::uint64_t seed);

AngleReport compute_angles(const ExperimentConfig& cfg, const Extraction& ex, const AEBank* ae, AngleMethod method,
                           std::uint64_t seed);

struct EditOutcome {
    ModelParams edited;
    std::optional<EditPlan> plan;
    std::vector<std::pair<std::string, double>> wall_time_ms;
};

/// Plan-based strategies given an existing angle report (no timing of the reduction).
EditOutcome apply_plan_strategy(const ExperimentConfig& cfg, const ModelParams& base, const Extraction& ex,
                                const AngleReport& report, Strategy strategy);

/// Full geoedit edit phase: auto-encoder training (for ae-tsne), reduction,
/// plan and apply, each timed.
EditOutcome run_geoedit(const ExperimentConfig& cfg, const ModelParams& base, const FactDataset& data,
                        const Extraction& ex, Strategy strategy, AngleMethod method, std::uint64_t seed);

/// full-ft, f-learning and naive-add, with their fine-tuning timed.
EditOutcome run_baseline(const ExperimentConfig& cfg, const ModelParams& base, const FactDataset& data,
                         const Extraction& ex, Strategy strategy, std::uint64_t seed);

EvalReport evaluate(const ModelParams& edited, const ModelParams& base, const FactDataset& data, Strategy strategy,
                    std::uint64_t seed, const std::optional<EditPlan>& plan,
                    std::vector<std::pair<std::string, double>> wall_time_ms = {});

// ---- on-disk stages under <output_dir>/seed_<seed>/

std::filesystem::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed);

void cmd_gen_data(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_pretrain(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_extract(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_train_ae(const ExperimentConfig& cfg, std::uint64_t seed);
void cmd_angles(const ExperimentConfig& cfg, std::uint64_t seed, AngleMethod method);
void cmd_edit(const ExperimentConfig& cfg, std::uint64_t seed, Strategy strategy, AngleMethod method);
/// Evaluates `checkpoint` (default: the strategy's edited checkpoint), writes
/// eval_<strategy>.json and appends a row to <output_dir>/ledger.csv.
EvalReport cmd_eval(const ExperimentConfig& cfg, std::uint64_t seed, Strategy strategy,
                    const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

/// Every stage for every seed and strategy. Truncates ledger.csv and
/// timings.csv, then writes summary.csv. A failing stage leaves a FAILED
/// marker in its seed directory and is rethrown as StageError.
std::vector<EvalReport> cmd_pipeline(const ExperimentConfig& cfg);

}  // namespace geoedit
