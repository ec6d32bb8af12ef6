#pragma once

#include <string_view>
#include <vector>

#include "geoedit/toymodel.hpp"

namespace geoedit {

enum class TaskVectorSource { Old, New, Edited, Reconstructed };

std::string_view to_string(TaskVectorSource source);
TaskVectorSource task_vector_source_from_string(std::string_view name);

/// Per-neuron parameter deltas, one vector per layout entry.
struct TaskVectorSet {
    NeuronLayout layout;
    std::vector<Vector> vectors;
    TaskVectorSource source = TaskVectorSource::Old;

    std::size_t size() const { return vectors.size(); }

    static TaskVectorSet zeros(const NeuronLayout& layout, TaskVectorSource source);

    /// Throws ShapeError on count/length mismatch, InputError on non-finite entries.
    void validate() const;

    bool operator==(const TaskVectorSet&) const = default;
};

/// tau[i] = column_i(after) - column_i(before).
TaskVectorSet extract(const ModelParams& before, const ModelParams& after, const NeuronLayout& layout,
                      TaskVectorSource source = TaskVectorSource::Old);

struct FusionWeights {
    Vector alpha;
    Vector beta;
};

/// Min-max map onto [0, 1]. A constant vector maps to all ones.
Vector minmax_normalize(const Vector& values);

/// alpha = minmax(imp_old), beta = minmax(imp_new), each normalised across
/// all neurons independently.
FusionWeights fusion_weights(const Vector& imp_old, const Vector& imp_new);

}  // namespace geoedit
