#include "geoedit/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "geoedit/error.hpp"

namespace geoedit {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'O', 'E', 'D', 'I', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        std::memcpy(&v, bytes, sizeof(T));
    }
    return v;
}

template <class T>
void put(std::ostream& out, T v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated checkpoint " + path.string());
    return to_little(v);
}

Matrix vector_as_column(const Vector& v) { return Matrix(v); }

Vector column_as_vector(const Matrix& m, const char* name) {
    if (m.cols() != 1) throw InputError(std::string("checkpoint array '") + name + "' is not a column");
    return m.col(0);
}

}  // namespace

const Matrix& Archive::array(std::string_view name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return a.values;
    }
    throw InputError("checkpoint has no array '" + std::string(name) + "'");
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
    nlohmann::ordered_json header;
    header["kind"] = archive.kind;
    header["meta"] = archive.meta;
    header["arrays"] = nlohmann::ordered_json::array();
    for (const auto& a : archive.arrays) {
        header["arrays"].push_back({{"name", a.name}, {"rows", a.values.rows()}, {"cols", a.values.cols()}});
    }
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& a : archive.arrays) {
        for (Eigen::Index r = 0; r < a.values.rows(); ++r) {
            for (Eigen::Index c = 0; c < a.values.cols(); ++c) put<double>(out, a.values(r, c));
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

Archive read_archive(const std::filesystem::path& path, std::string_view expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw IoError(path.string() + " is not a geoedit checkpoint");
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto length = get<std::uint64_t>(in, path);
    std::string text(length, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(length))) throw IoError("truncated checkpoint " + path.string());

    Archive archive;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
        archive.kind = header.at("kind").get<std::string>();
        archive.meta = header.at("meta");
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }
    if (archive.kind != expected_kind) {
        throw InputError(path.string() + " holds '" + archive.kind + "', expected '" + std::string(expected_kind) + "'");
    }
    for (const auto& entry : header.at("arrays")) {
        NamedArray a;
        a.name = entry.at("name").get<std::string>();
        const auto rows = entry.at("rows").get<Eigen::Index>();
        const auto cols = entry.at("cols").get<Eigen::Index>();
        a.values.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) a.values(r, c) = get<double>(in, path);
        }
        archive.arrays.push_back(std::move(a));
    }
    return archive;
}

nlohmann::ordered_json to_json(const ModelConfig& config) {
    nlohmann::ordered_json j;
    j["vocab_size"] = config.vocab_size;
    j["seq_len"] = config.seq_len;
    j["embed_dim"] = config.embed_dim;
    j["hidden_dim"] = config.hidden_dim;
    j["editable_matrices"] = nlohmann::ordered_json::array();
    for (const auto m : config.editable_matrices) j["editable_matrices"].push_back(std::string(to_string(m)));
    j["seed"] = config.seed;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.vocab_size = j.value("vocab_size", c.vocab_size);
        c.seq_len = j.value("seq_len", c.seq_len);
        c.embed_dim = j.value("embed_dim", c.embed_dim);
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        if (j.contains("editable_matrices")) {
            c.editable_matrices.clear();
            for (const auto& m : j.at("editable_matrices")) c.editable_matrices.push_back(matrix_id_from_string(m.get<std::string>()));
        }
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
    params.check_shapes();
    Archive a;
    a.kind = "model";
    a.meta["config"] = to_json(params.config);
    a.arrays = {{"embedding", params.embedding},
                {"w1", params.w1},
                {"b1", vector_as_column(params.b1)},
                {"w2", params.w2},
                {"b2", vector_as_column(params.b2)}};
    write_archive(path, a);
}

ModelParams load_model(const std::filesystem::path& path) {
    const Archive a = read_archive(path, "model");
    ModelParams p = ModelParams::zeros(model_config_from_json(a.meta.at("config")));
    p.embedding = a.array("embedding");
    p.w1 = a.array("w1");
    p.b1 = column_as_vector(a.array("b1"), "b1");
    p.w2 = a.array("w2");
    p.b2 = column_as_vector(a.array("b2"), "b2");
    p.check_shapes();
    return p;
}

void save_task_vectors(const TaskVectorSet& set, const std::filesystem::path& path) {
    set.validate();
    Archive a;
    a.kind = "task_vectors";
    a.meta["source"] = std::string(to_string(set.source));
    a.meta["neurons"] = nlohmann::ordered_json::array();
    for (const auto& e : set.layout.entries) {
        a.meta["neurons"].push_back({{"matrix", std::string(to_string(e.matrix))}, {"column", e.column}, {"dim", e.dim}});
    }
    // Vectors of equal dimension are packed as the columns of one array per group.
    std::vector<int> dims;
    for (const auto& e : set.layout.entries) {
        if (std::find(dims.begin(), dims.end(), e.dim) == dims.end()) dims.push_back(e.dim);
    }
    for (const int d : dims) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < set.size(); ++i) {
            if (set.layout[i].dim == d) members.push_back(i);
        }
        Matrix m(d, static_cast<Eigen::Index>(members.size()));
        for (std::size_t k = 0; k < members.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = set.vectors[members[k]];
        a.arrays.push_back({"d_n=" + std::to_string(d), std::move(m)});
    }
    write_archive(path, a);
}

TaskVectorSet load_task_vectors(const std::filesystem::path& path) {
    const Archive a = read_archive(path, "task_vectors");
    TaskVectorSet set;
    try {
        set.source = task_vector_source_from_string(a.meta.at("source").get<std::string>());
        for (const auto& e : a.meta.at("neurons")) {
            set.layout.entries.push_back(
                {matrix_id_from_string(e.at("matrix").get<std::string>()), e.at("column").get<int>(), e.at("dim").get<int>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt task-vector header in " + path.string() + ": " + e.what());
    }
    set.vectors.resize(set.layout.size());
    std::vector<int> dims;
    for (const auto& e : set.layout.entries) {
        if (std::find(dims.begin(), dims.end(), e.dim) == dims.end()) dims.push_back(e.dim);
    }
    for (const int d : dims) {
        const Matrix& m = a.array("d_n=" + std::to_string(d));
        Eigen::Index k = 0;
        for (std::size_t i = 0; i < set.size(); ++i) {
            if (set.layout[i].dim != d) continue;
            if (k >= m.cols() || m.rows() != d) throw InputError("task-vector array shape mismatch in " + path.string());
            set.vectors[i] = m.col(k++);
        }
        if (k != m.cols()) throw InputError("task-vector array shape mismatch in " + path.string());
    }
    set.validate();
    return set;
}

void save_ae_bank(const AEBank& bank, const std::filesystem::path& path) {
    Archive a;
    a.kind = "ae_bank";
    a.meta["dims"] = nlohmann::ordered_json::array();
    for (const auto& m : bank.models) {
        const std::string p = "d_n=" + std::to_string(m.input_dim()) + "/";
        a.meta["dims"].push_back(m.input_dim());
        Matrix curve(static_cast<Eigen::Index>(m.loss_curve.size()), 4);
        for (std::size_t r = 0; r < m.loss_curve.size(); ++r) {
            const auto& pt = m.loss_curve[r];
            curve.row(static_cast<Eigen::Index>(r)) << pt.epoch, pt.mse, pt.kl, pt.total;
        }
        Matrix scale(1, 1);
        scale(0, 0) = m.input_scale;
        a.arrays.push_back({p + "enc1", m.enc1});
        a.arrays.push_back({p + "enc1_bias", vector_as_column(m.enc1_bias)});
        a.arrays.push_back({p + "enc2", m.enc2});
        a.arrays.push_back({p + "enc2_bias", vector_as_column(m.enc2_bias)});
        a.arrays.push_back({p + "dec1", m.dec1});
        a.arrays.push_back({p + "dec1_bias", vector_as_column(m.dec1_bias)});
        a.arrays.push_back({p + "dec2", m.dec2});
        a.arrays.push_back({p + "dec2_bias", vector_as_column(m.dec2_bias)});
        a.arrays.push_back({p + "input_scale", scale});
        a.arrays.push_back({p + "loss_curve", curve});
    }
    write_archive(path, a);
}

AEBank load_ae_bank(const std::filesystem::path& path) {
    const Archive a = read_archive(path, "ae_bank");
    AEBank bank;
    for (const auto& d : a.meta.at("dims")) {
        const std::string p = "d_n=" + std::to_string(d.get<int>()) + "/";
        AEParams m;
        m.enc1 = a.array(p + "enc1");
        m.enc1_bias = column_as_vector(a.array(p + "enc1_bias"), "enc1_bias");
        m.enc2 = a.array(p + "enc2");
        m.enc2_bias = column_as_vector(a.array(p + "enc2_bias"), "enc2_bias");
        m.dec1 = a.array(p + "dec1");
        m.dec1_bias = column_as_vector(a.array(p + "dec1_bias"), "dec1_bias");
        m.dec2 = a.array(p + "dec2");
        m.dec2_bias = column_as_vector(a.array(p + "dec2_bias"), "dec2_bias");
        m.input_scale = a.array(p + "input_scale")(0, 0);
        const Matrix& curve = a.array(p + "loss_curve");
        for (Eigen::Index r = 0; r < curve.rows(); ++r) {
            m.loss_curve.push_back({static_cast<int>(curve(r, 0)), curve(r, 1), curve(r, 2), curve(r, 3)});
        }
        bank.models.push_back(std::move(m));
    }
    return bank;
}

void save_importance(const ImportanceTracker& tracker, const std::filesystem::path& path) {
    Archive a;
    a.kind = "importance";
    a.meta["step_count"] = tracker.step_count;
    for (const auto& s : tracker.scores) a.arrays.push_back({std::string(to_string(s.matrix)), s.values});
    write_archive(path, a);
}

ImportanceTracker load_importance(const std::filesystem::path& path) {
    const Archive a = read_archive(path, "importance");
    ImportanceTracker t;
    t.step_count = a.meta.at("step_count").get<long>();
    for (const auto& arr : a.arrays) t.scores.push_back({matrix_id_from_string(arr.name), arr.values});
    return t;
}

}  // namespace geoedit
