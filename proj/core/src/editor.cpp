#include "geoedit/editor.hpp"

#include <string>

#include "geoedit/error.hpp"

namespace geoedit {

namespace {

bool unit_interval(double w) { return w >= 0.0 && w <= 1.0; }

}  // namespace

std::string_view to_string(EditMode mode) {
    switch (mode) {
        case EditMode::GeoEdit: return "geoedit";
        case EditMode::GeoEditMw: return "geoedit-mw";
        case EditMode::NoSynergistic: return "no-synergistic";
        case EditMode::NoOrthogonal: return "no-orthogonal";
        case EditMode::NoConflict: return "no-conflict";
    }
    return "geoedit";
}

EditMode edit_mode_from_string(std::string_view name) {
    if (name == "geoedit") return EditMode::GeoEdit;
    if (name == "geoedit-mw") return EditMode::GeoEditMw;
    if (name == "no-synergistic") return EditMode::NoSynergistic;
    if (name == "no-orthogonal") return EditMode::NoOrthogonal;
    if (name == "no-conflict") return EditMode::NoConflict;
    throw ConfigError("unknown edit mode '" + std::string(name) + "'");
}

void EditConfig::validate() const {
    if (!(0.0 <= phi1_deg && phi1_deg <= phi2_deg && phi2_deg <= 180.0)) {
        throw ConfigError("edit: thresholds must satisfy 0 <= phi1 <= phi2 <= 180");
    }
    if (!unit_interval(manual_alpha) || !unit_interval(manual_beta)) {
        throw ConfigError("edit: manual weights must lie in [0, 1]");
    }
}

Vector fuse(const Vector& tau_old, const Vector& tau_new, double alpha, double beta, EditClass cls) {
    if (tau_old.size() != tau_new.size()) throw ShapeError("fuse: vector lengths differ");
    if (!unit_interval(alpha) || !unit_interval(beta)) throw InputError("fuse: weights must lie in [0, 1]");
    switch (cls) {
        case EditClass::Synergistic: return alpha * tau_old + beta * tau_new;
        case EditClass::Orthogonal: return Vector::Zero(tau_old.size());
        case EditClass::Conflict: return -alpha * tau_old + beta * tau_new;
    }
    return Vector::Zero(tau_old.size());
}

EditPlan build_plan(const TaskVectorSet& tau_old, const TaskVectorSet& tau_new, const AngleReport& report,
                    const FusionWeights& weights, const EditConfig& config) {
    config.validate();
    tau_old.validate();
    tau_new.validate();
    const std::size_t n = tau_old.size();
    if (!(tau_old.layout == tau_new.layout) || !(report.layout == tau_old.layout) || report.classes.size() != n ||
        static_cast<std::size_t>(weights.alpha.size()) != n || static_cast<std::size_t>(weights.beta.size()) != n) {
        throw ShapeError("build_plan: inputs are not aligned over the same neurons");
    }

    const EditClass disabled = config.mode == EditMode::NoSynergistic  ? EditClass::Synergistic
                               : config.mode == EditMode::NoOrthogonal ? EditClass::Orthogonal
                                                                       : EditClass::Conflict;
    const bool ablation = config.mode == EditMode::NoSynergistic || config.mode == EditMode::NoOrthogonal ||
                          config.mode == EditMode::NoConflict;

    EditPlan plan;
    plan.tau_edit = TaskVectorSet::zeros(tau_old.layout, TaskVectorSource::Edited);
    plan.classes = report.classes;
    plan.alpha.resize(static_cast<Eigen::Index>(n));
    plan.beta.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const EditClass cls = report.classes[i];
        double a = config.mode == EditMode::GeoEditMw ? config.manual_alpha : weights.alpha(k);
        double b = config.mode == EditMode::GeoEditMw ? config.manual_beta : weights.beta(k);
        if (ablation && cls == disabled) {
            plan.tau_edit.vectors[i] = tau_new.vectors[i];
            a = 0.0;
            b = 1.0;
        } else {
            plan.tau_edit.vectors[i] = fuse(tau_old.vectors[i], tau_new.vectors[i], a, b, cls);
        }
        plan.alpha(k) = a;
        plan.beta(k) = b;
        if (cls == EditClass::Synergistic) ++plan.counts.synergistic;
        else if (cls == EditClass::Orthogonal) ++plan.counts.orthogonal;
        else ++plan.counts.conflict;
    }
    return plan;
}

ModelParams edit_geoedit(const ModelParams& base, const EditPlan& plan) {
    return apply_delta(base, plan.tau_edit, 1.0);
}

ModelParams baseline_full_ft(const ModelParams& base, std::span<const Example> d_new, const TrainConfig& config) {
    return finetune(base, d_new, config).final_params;
}

ModelParams baseline_flearning(const ModelParams& base, const TaskVectorSet& tau_old, std::span<const Example> d_new,
                               double gamma, const TrainConfig& config) {
    if (!(gamma >= 0.0)) throw ConfigError("f-learning: gamma must be >= 0");
    if (gamma == 0.0) return baseline_full_ft(base, d_new, config);
    return finetune(apply_delta(base, tau_old, -gamma), d_new, config).final_params;
}

ModelParams baseline_naive_add(const ModelParams& base, const TaskVectorSet& tau_new) {
    return apply_delta(base, tau_new, 1.0);
}

}  // namespace geoedit
