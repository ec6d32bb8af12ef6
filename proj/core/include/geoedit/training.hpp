#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geoedit/optim.hpp"
#include "geoedit/toymodel.hpp"

namespace geoedit {

struct TrainConfig {
    int epochs = 1;
    int batch_size = 16;
    double learning_rate = 0.1;
    OptimizerConfig optimizer;
    double ema_beta = 0.85;
    std::uint64_t seed = 0;
    /// When true only the config's editable matrices are updated; embedding,
    /// biases and non-editable matrices stay frozen.
    bool editable_only = true;

    void validate() const;
};

/// EMA-smoothed |w * dL/dw| for every entry of the editable matrices.
struct ImportanceTracker {
    struct Scores {
        MatrixId matrix;
        Matrix values;

        bool operator==(const Scores&) const = default;
    };

    std::vector<Scores> scores;
    long step_count = 0;

    static ImportanceTracker zeros(const ModelConfig& config);

    const Matrix& scores_for(MatrixId id) const;

    bool operator==(const ImportanceTracker&) const = default;
};

/// s = |w * grad| per editable entry; the first step sets the average to s,
/// later steps blend ema_beta * average + (1 - ema_beta) * s.
ImportanceTracker importance_step(ImportanceTracker tracker, const ModelParams& params, const ModelParams& grads,
                                  double ema_beta);

/// Mean smoothed score over each neuron's d_n parameters.
Vector neuron_importance(const ImportanceTracker& tracker, const NeuronLayout& layout);

struct FinetuneResult {
    ModelParams final_params;
    ImportanceTracker tracker;
    std::vector<double> loss_curve;  // mean per-example loss of each epoch
};

/// Mini-batch fine-tuning with seeded per-epoch shuffling. Every optimiser
/// step also feeds the importance tracker. Throws DivergenceError on a
/// non-finite loss.
FinetuneResult finetune(const ModelParams& start, std::span<const Example> data, const TrainConfig& config);

}  // namespace geoedit
