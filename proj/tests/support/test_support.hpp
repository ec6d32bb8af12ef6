#pragma once

// Shared generators and oracles for the unit and acceptance tests. Nothing
// here calls into the code under test except to build inputs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "geoedit/random.hpp"
#include "geoedit/taskvec.hpp"
#include "geoedit/toymodel.hpp"

namespace geoedit::testing {

inline Vector random_vector(Rng& rng, Eigen::Index n, double scale = 1.0) {
    Vector v(n);
    for (auto& x : v) x = scale * rng.normal();
    return v;
}

inline Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

inline ModelConfig small_config(int vocab = 6, int seq_len = 2, int embed = 3, int hidden = 4) {
    ModelConfig c;
    c.vocab_size = vocab;
    c.seq_len = seq_len;
    c.embed_dim = embed;
    c.hidden_dim = hidden;
    return c;
}

/// Every tensor filled with scaled normals (biases non-zero too).
inline ModelParams random_model(Rng& rng, const ModelConfig& config, double scale = 0.5) {
    ModelParams p = ModelParams::zeros(config);
    p.embedding = random_matrix(rng, p.embedding.rows(), p.embedding.cols(), scale);
    p.w1 = random_matrix(rng, p.w1.rows(), p.w1.cols(), scale);
    p.b1 = random_vector(rng, p.b1.size(), scale);
    p.w2 = random_matrix(rng, p.w2.rows(), p.w2.cols(), scale);
    p.b2 = random_vector(rng, p.b2.size(), scale);
    return p;
}

inline TokenSeq random_question(Rng& rng, const ModelConfig& config) {
    TokenSeq q(static_cast<std::size_t>(config.seq_len));
    for (auto& t : q) t = static_cast<Token>(rng.below(static_cast<std::uint64_t>(config.vocab_size)));
    return q;
}

inline std::vector<Example> random_batch(Rng& rng, const ModelConfig& config, int size) {
    std::vector<Example> batch;
    for (int i = 0; i < size; ++i) {
        batch.push_back({random_question(rng, config),
                         static_cast<Token>(rng.below(static_cast<std::uint64_t>(config.vocab_size)))});
    }
    return batch;
}

inline TaskVectorSet random_task_vectors(Rng& rng, const NeuronLayout& layout, TaskVectorSource source,
                                         double scale = 1.0) {
    TaskVectorSet s = TaskVectorSet::zeros(layout, source);
    for (auto& v : s.vectors) v = random_vector(rng, v.size(), scale);
    return s;
}

/// Scalar-loop forward pass written from the model definition, independent
/// of the library's Eigen code: logits = W2^T tanh(W1^T concat(E[t]) + b1) + b2.
inline std::vector<double> oracle_logits(const ModelParams& p, const TokenSeq& q) {
    const auto& c = p.config;
    std::vector<double> x;
    for (const Token t : q) {
        for (int k = 0; k < c.embed_dim; ++k) x.push_back(p.embedding(t, k));
    }
    std::vector<double> h(static_cast<std::size_t>(c.hidden_dim));
    for (int j = 0; j < c.hidden_dim; ++j) {
        double a = p.b1(j);
        for (std::size_t i = 0; i < x.size(); ++i) a += p.w1(static_cast<Eigen::Index>(i), j) * x[i];
        h[static_cast<std::size_t>(j)] = std::tanh(a);
    }
    std::vector<double> z(static_cast<std::size_t>(c.vocab_size));
    for (int v = 0; v < c.vocab_size; ++v) {
        double s = p.b2(v);
        for (int j = 0; j < c.hidden_dim; ++j) s += p.w2(j, v) * h[static_cast<std::size_t>(j)];
        z[static_cast<std::size_t>(v)] = s;
    }
    return z;
}

/// Mean cross-entropy from oracle_logits.
inline double oracle_loss(const ModelParams& p, const std::vector<Example>& batch) {
    double total = 0.0;
    for (const auto& e : batch) {
        const auto z = oracle_logits(p, e.question);
        const double m = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (const double v : z) s += std::exp(v - m);
        total += m + std::log(s) - z[static_cast<std::size_t>(e.answer)];
    }
    return total / static_cast<double>(batch.size());
}

/// (f(x + h) - f(x - h)) / 2h for a parameter x that f reads; x is restored.
inline double central_difference(const std::function<double()>& f, double& x, double h) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

/// |a - b| / max(|a| + |b|, floor): symmetric relative error that tolerates
/// entries that are zero in both.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
    return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

/// True if some double d within `radius` ulps of fl(b - a) gives a + d == b.
inline bool delta_can_reach(double a, double b, int radius = 64) {
    double lo = b - a;
    double hi = lo;
    for (int i = 0; i <= radius; ++i) {
        if (a + lo == b || a + hi == b) return true;
        lo = std::nextafter(lo, -INFINITY);
        hi = std::nextafter(hi, INFINITY);
    }
    return false;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("geoedit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace geoedit::testing
