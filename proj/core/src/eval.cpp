#include "geoedit/eval.hpp"

#include "geoedit/error.hpp"

namespace geoedit {

namespace {

double exact_match(const ModelParams& model, std::span<const Example> set, const char* what) {
    if (set.empty()) throw InputError(std::string(what) + ": evaluation set is empty");
    long hits = 0;
    for (const auto& ex : set) {
        if (predict(model, ex.question) == ex.answer) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(set.size());
}

}  // namespace

double reliability(const ModelParams& model, std::span<const Example> d_new) {
    return exact_match(model, d_new, "reliability");
}

double generality(const ModelParams& model, std::span<const Example> rephrases) {
    return exact_match(model, rephrases, "generality");
}

double locality(const ModelParams& edited, const ModelParams& base, std::span<const Example> out_of_scope) {
    if (out_of_scope.empty()) throw InputError("locality: evaluation set is empty");
    long agree = 0;
    for (const auto& ex : out_of_scope) {
        if (predict(edited, ex.question) == predict(base, ex.question)) ++agree;
    }
    return 100.0 * static_cast<double>(agree) / static_cast<double>(out_of_scope.size());
}

double EvalReport::total_time_ms() const {
    double t = 0.0;
    for (const auto& [phase, ms] : wall_time_ms) t += ms;
    return t;
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["strategy"] = strategy;
    j["seed"] = seed;
    j["reliability"] = reliability;
    j["generality"] = generality;
    j["locality"] = locality;
    if (class_counts) {
        j["class_counts"] = {{"synergistic", class_counts->synergistic},
                             {"orthogonal", class_counts->orthogonal},
                             {"conflict", class_counts->conflict}};
    } else {
        j["class_counts"] = nullptr;
    }
    nlohmann::ordered_json times = nlohmann::ordered_json::object();
    for (const auto& [phase, ms] : wall_time_ms) times[phase] = ms;
    j["wall_time_ms"] = times;
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::ordered_json& j) {
    try {
        EvalReport r;
        r.strategy = j.at("strategy").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.reliability = j.at("reliability").get<double>();
        r.generality = j.at("generality").get<double>();
        r.locality = j.at("locality").get<double>();
        if (const auto& c = j.at("class_counts"); !c.is_null()) {
            r.class_counts = ClassCounts{c.at("synergistic").get<int>(), c.at("orthogonal").get<int>(),
                                         c.at("conflict").get<int>()};
        }
        for (const auto& [phase, ms] : j.at("wall_time_ms").items()) r.wall_time_ms.emplace_back(phase, ms.get<double>());
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("eval report: ") + e.what());
    }
}

}  // namespace geoedit
