#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoedit/autoencoder.hpp"
#include "geoedit/taskvec.hpp"
#include "geoedit/toymodel.hpp"
#include "geoedit/training.hpp"

namespace geoedit {

/// Checkpoint layout (all integers little-endian):
///
///   8 bytes   magic "GEOEDIT\0"
///   u32       format version (1)
///   u64       header length H
///   H bytes   UTF-8 JSON header: {"kind", "meta", "arrays": [{"name","rows","cols"}...]}
///   ...       every array in header order as rows*cols float64, row-major
struct NamedArray {
    std::string name;
    Matrix values;

    bool operator==(const NamedArray&) const = default;
};

struct Archive {
    std::string kind;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();
    std::vector<NamedArray> arrays;

    const Matrix& array(std::string_view name) const;
};

void write_archive(const std::filesystem::path& path, const Archive& archive);

/// Throws IoError on unreadable or truncated files, InputError on a kind mismatch.
Archive read_archive(const std::filesystem::path& path, std::string_view expected_kind);

nlohmann::ordered_json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

void save_task_vectors(const TaskVectorSet& set, const std::filesystem::path& path);
TaskVectorSet load_task_vectors(const std::filesystem::path& path);

void save_ae_bank(const AEBank& bank, const std::filesystem::path& path);
AEBank load_ae_bank(const std::filesystem::path& path);

void save_importance(const ImportanceTracker& tracker, const std::filesystem::path& path);
ImportanceTracker load_importance(const std::filesystem::path& path);

}  // namespace geoedit
