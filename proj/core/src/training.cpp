#include "geoedit/training.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "geoedit/error.hpp"
#include "geoedit/random.hpp"

namespace geoedit {

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
    if (!(ema_beta > 0.0 && ema_beta < 1.0)) throw ConfigError("ema_beta must lie in (0, 1)");
}

ImportanceTracker ImportanceTracker::zeros(const ModelConfig& config) {
    const ModelParams shapes = ModelParams::zeros(config);
    ImportanceTracker t;
    for (const MatrixId id : config.editable_matrices) t.scores.push_back({id, shapes.matrix(id)});
    return t;
}

const Matrix& ImportanceTracker::scores_for(MatrixId id) const {
    for (const auto& s : scores) {
        if (s.matrix == id) return s.values;
    }
    throw ShapeError("importance tracker has no scores for " + std::string(to_string(id)));
}

ImportanceTracker importance_step(ImportanceTracker tracker, const ModelParams& params, const ModelParams& grads,
                                  double ema_beta) {
    for (auto& s : tracker.scores) {
        const Matrix& w = params.matrix(s.matrix);
        const Matrix& g = grads.matrix(s.matrix);
        if (w.rows() != s.values.rows() || w.cols() != s.values.cols() || g.rows() != w.rows() ||
            g.cols() != w.cols()) {
            throw ShapeError("importance_step: shape mismatch on " + std::string(to_string(s.matrix)));
        }
        if (!g.allFinite()) throw DivergenceError("importance_step: non-finite gradient", tracker.step_count);
        const Matrix instant = (w.array() * g.array()).abs().matrix();
        if (tracker.step_count == 0) {
            s.values = instant;
        } else {
            s.values = ema_beta * s.values + (1.0 - ema_beta) * instant;
        }
    }
    ++tracker.step_count;
    return tracker;
}

Vector neuron_importance(const ImportanceTracker& tracker, const NeuronLayout& layout) {
    Vector out(static_cast<Eigen::Index>(layout.size()));
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& e = layout[i];
        const Matrix& s = tracker.scores_for(e.matrix);
        if (e.column < 0 || e.column >= s.cols() || e.dim != s.rows()) {
            throw ShapeError("neuron_importance: layout entry " + std::to_string(i) + " does not fit the tracker");
        }
        out(static_cast<Eigen::Index>(i)) = s.col(e.column).sum() / static_cast<double>(e.dim);
    }
    return out;
}

namespace {

std::vector<ParamBlock> trainable_blocks(ModelParams& p, const ModelParams& g, bool editable_only) {
    auto block = [](Eigen::MatrixXd& v, const Eigen::MatrixXd& d) {
        return ParamBlock{{v.data(), static_cast<std::size_t>(v.size())}, {d.data(), static_cast<std::size_t>(d.size())}};
    };
    auto vblock = [](Eigen::VectorXd& v, const Eigen::VectorXd& d) {
        return ParamBlock{{v.data(), static_cast<std::size_t>(v.size())}, {d.data(), static_cast<std::size_t>(d.size())}};
    };
    std::vector<ParamBlock> blocks;
    if (editable_only) {
        for (const MatrixId id : p.config.editable_matrices) blocks.push_back(block(p.matrix(id), g.matrix(id)));
    } else {
        blocks.push_back(block(p.embedding, g.embedding));
        blocks.push_back(block(p.w1, g.w1));
        blocks.push_back(vblock(p.b1, g.b1));
        blocks.push_back(block(p.w2, g.w2));
        blocks.push_back(vblock(p.b2, g.b2));
    }
    return blocks;
}

}  // namespace

FinetuneResult finetune(const ModelParams& start, std::span<const Example> data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw InputError("finetune: empty dataset");
    start.check_shapes();

    FinetuneResult result{start, ImportanceTracker::zeros(start.config), {}};
    ModelParams& params = result.final_params;
    Optimizer optimizer(config.optimizer, config.learning_rate);
    Rng rng(config.seed);

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Example> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));
    long step = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t k = begin; k < end; ++k) batch.push_back(data[order[k]]);

            const LossAndGrad lg = loss_and_grad(params, batch);
            if (!std::isfinite(lg.loss)) throw DivergenceError("finetune: non-finite loss", step);
            epoch_loss += lg.loss * static_cast<double>(batch.size());

            result.tracker = importance_step(std::move(result.tracker), params, lg.grads, config.ema_beta);
            const auto blocks = trainable_blocks(params, lg.grads, config.editable_only);
            optimizer.step(blocks);
            ++step;
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(data.size()));
    }
    if (!params.all_finite()) throw DivergenceError("finetune: parameters became non-finite", step);
    return result;
}

}  // namespace geoedit
