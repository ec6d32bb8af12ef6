#include "geoedit/optim.hpp"

#include <cmath>

#include "geoedit/error.hpp"

namespace geoedit {

Optimizer::Optimizer(OptimizerConfig config, double learning_rate) : config_(config), lr_(learning_rate) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

void Optimizer::step(std::span<const ParamBlock> blocks) {
    ++t_;
    if (config_.kind == OptimizerKind::Sgd) {
        for (const auto& b : blocks) {
            for (std::size_t i = 0; i < b.values.size(); ++i) b.values[i] -= lr_ * b.grads[i];
        }
        return;
    }

    if (m_.empty()) {
        for (const auto& b : blocks) {
            m_.emplace_back(b.values.size(), 0.0);
            v_.emplace_back(b.values.size(), 0.0);
        }
    }
    if (m_.size() != blocks.size()) throw ShapeError("optimizer parameter block list changed between steps");

    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        auto& m = m_[k];
        auto& v = v_[k];
        const auto& b = blocks[k];
        if (m.size() != b.values.size()) throw ShapeError("optimizer parameter block changed size");
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double g = b.grads[i];
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
            b.values[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
        }
    }
}

}  // namespace geoedit
