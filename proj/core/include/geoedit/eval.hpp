#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoedit/geometry.hpp"
#include "geoedit/toymodel.hpp"

namespace geoedit {

/// 100 * fraction of examples whose greedy prediction equals the answer.
/// Throws InputError for an empty set.
double reliability(const ModelParams& model, std::span<const Example> d_new);

/// Same measure over rephrased edit-target questions.
double generality(const ModelParams& model, std::span<const Example> rephrases);

/// 100 * fraction of questions where `edited` and `base` predict the same
/// token. Answers in `out_of_scope` are ignored. Throws InputError if empty.
double locality(const ModelParams& edited, const ModelParams& base, std::span<const Example> out_of_scope);

struct EvalReport {
    std::string strategy;
    std::uint64_t seed = 0;
    double reliability = 0.0;
    double generality = 0.0;
    double locality = 0.0;
    std::optional<ClassCounts> class_counts;
    /// (phase, milliseconds) in execution order.
    std::vector<std::pair<std::string, double>> wall_time_ms;

    double total_time_ms() const;
    nlohmann::ordered_json to_json() const;
    static EvalReport from_json(const nlohmann::ordered_json& j);
};

/// Monotonic wall time of one call, in milliseconds.
template <class F>
double benchmark_edit_time(F&& edit_phase) {
    const auto start = std::chrono::steady_clock::now();
    std::forward<F>(edit_phase)();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

}  // namespace geoedit
