#pragma once

#include <span>
#include <vector>

namespace geoedit {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Sgd;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    bool operator==(const OptimizerConfig&) const = default;
};

/// One contiguous parameter tensor and its gradient.
struct ParamBlock {
    std::span<double> values;
    std::span<const double> grads;
};

/// Plain SGD or bias-corrected Adam over a fixed list of parameter blocks.
/// The block list (count and sizes) must be identical on every call.
class Optimizer {
public:
    Optimizer(OptimizerConfig config, double learning_rate);

    void step(std::span<const ParamBlock> blocks);

    long steps_taken() const { return t_; }

private:
    OptimizerConfig config_;
    double lr_;
    long t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace geoedit
