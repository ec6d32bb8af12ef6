#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "geoedit/geometry.hpp"
#include "geoedit/taskvec.hpp"
#include "geoedit/training.hpp"

namespace geoedit {

enum class EditMode { GeoEdit, GeoEditMw, NoSynergistic, NoOrthogonal, NoConflict };

std::string_view to_string(EditMode mode);
EditMode edit_mode_from_string(std::string_view name);

struct EditConfig {
    double phi1_deg = 85.0;
    double phi2_deg = 95.0;
    EditMode mode = EditMode::GeoEdit;
    double manual_alpha = 0.3;
    double manual_beta = 1.0;

    /// 0 <= phi1 <= phi2 <= 180 and manual weights in [0, 1].
    void validate() const;
};

/// synergistic: alpha * old + beta * new
/// orthogonal:  0
/// conflict:   -alpha * old + beta * new
Vector fuse(const Vector& tau_old, const Vector& tau_new, double alpha, double beta, EditClass cls);

struct EditPlan {
    TaskVectorSet tau_edit;
    std::vector<EditClass> classes;
    /// Weights actually used per neuron (0 and 1 where an ablation substituted tau_new).
    Vector alpha;
    Vector beta;
    ClassCounts counts;
};

/// Neuron classes come from `report`. Ablation modes give the disabled class
/// tau_new unchanged; geoedit-mw uses the manual weights for every neuron.
EditPlan build_plan(const TaskVectorSet& tau_old, const TaskVectorSet& tau_new, const AngleReport& report,
                    const FusionWeights& weights, const EditConfig& config);

ModelParams edit_geoedit(const ModelParams& base, const EditPlan& plan);

ModelParams baseline_full_ft(const ModelParams& base, std::span<const Example> d_new, const TrainConfig& config);

/// Subtracts gamma * tau_old, then fine-tunes on d_new. Throws ConfigError for gamma < 0.
ModelParams baseline_flearning(const ModelParams& base, const TaskVectorSet& tau_old, std::span<const Example> d_new,
                               double gamma, const TrainConfig& config);

ModelParams baseline_naive_add(const ModelParams& base, const TaskVectorSet& tau_new);

}  // namespace geoedit
