#include "geoedit/taskvec.hpp"

#include <cmath>
#include <string>

#include "geoedit/error.hpp"

namespace geoedit {

std::string_view to_string(TaskVectorSource source) {
    switch (source) {
        case TaskVectorSource::Old: return "old";
        case TaskVectorSource::New: return "new";
        case TaskVectorSource::Edited: return "edited";
        case TaskVectorSource::Reconstructed: return "reconstructed";
    }
    return "old";
}

TaskVectorSource task_vector_source_from_string(std::string_view name) {
    if (name == "old") return TaskVectorSource::Old;
    if (name == "new") return TaskVectorSource::New;
    if (name == "edited") return TaskVectorSource::Edited;
    if (name == "reconstructed") return TaskVectorSource::Reconstructed;
    throw InputError("unknown task vector source '" + std::string(name) + "'");
}

TaskVectorSet TaskVectorSet::zeros(const NeuronLayout& layout, TaskVectorSource source) {
    TaskVectorSet set{layout, {}, source};
    set.vectors.reserve(layout.size());
    for (const auto& entry : layout.entries) set.vectors.push_back(Vector::Zero(entry.dim));
    return set;
}

void TaskVectorSet::validate() const {
    if (vectors.size() != layout.size()) {
        throw ShapeError("task vector count " + std::to_string(vectors.size()) +
                         " does not match layout size " + std::to_string(layout.size()));
    }
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != layout[i].dim) {
            throw ShapeError("task vector " + std::to_string(i) + " has length " +
                             std::to_string(vectors[i].size()) + ", expected " +
                             std::to_string(layout[i].dim));
        }
        if (!vectors[i].allFinite()) throw InputError("task vector " + std::to_string(i) + " is not finite");
    }
}

namespace {

// b - a rounded can miss b by an ulp when added back to a. Step the delta
// towards b until a + d == b, so extract followed by apply_delta(.., 1.0) is
// exact. Gives up after a few ulps (|b| << |a| with a sign change can make b
// unreachable) and keeps the closest value found.
double round_trip_delta(double a, double b, double d) {
    for (int step = 0; step < 8 && a + d != b; ++step) d = std::nextafter(d, (a + d < b) ? INFINITY : -INFINITY);
    return a + d == b ? d : b - a;
}

}  // namespace

TaskVectorSet extract(const ModelParams& before, const ModelParams& after, const NeuronLayout& layout,
                      TaskVectorSource source) {
    if (!(before.config == after.config)) throw ShapeError("extract: parameter sets have different configs");
    before.check_shapes();
    after.check_shapes();
    layout.check_against(before);

    TaskVectorSet set{layout, {}, source};
    set.vectors.reserve(layout.size());
    for (const auto& entry : layout.entries) {
        const auto a = before.matrix(entry.matrix).col(entry.column);
        const auto b = after.matrix(entry.matrix).col(entry.column);
        Vector d = b - a;
        for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = round_trip_delta(a(i), b(i), d(i));
        set.vectors.push_back(std::move(d));
    }
    return set;
}

Vector minmax_normalize(const Vector& values) {
    if (values.size() == 0) return values;
    const double lo = values.minCoeff();
    const double hi = values.maxCoeff();
    if (!(hi > lo)) return Vector::Ones(values.size());
    Vector out = (values.array() - lo) / (hi - lo);
    return out.cwiseMax(0.0).cwiseMin(1.0);
}

FusionWeights fusion_weights(const Vector& imp_old, const Vector& imp_new) {
    if (imp_old.size() != imp_new.size()) throw ShapeError("fusion_weights: importance vectors differ in length");
    for (const Vector* v : {&imp_old, &imp_new}) {
        if (!v->allFinite()) throw InputError("fusion_weights: importance is not finite");
        if (v->size() > 0 && v->minCoeff() < 0.0) throw InputError("fusion_weights: negative importance");
    }
    return {minmax_normalize(imp_old), minmax_normalize(imp_new)};
}

}  // namespace geoedit
