#pragma once

// Small fact-lookup network used as the editable model:
//
//   x      = concat(E[t_0], ..., E[t_{L-1}])          (L * embed_dim)
//   a      = W1^T x + b1,  h = tanh(a)                (hidden_dim)
//   logits = W2^T h + b2                              (vocab_size)
//
// A "neuron" is one column of an editable weight matrix. W1 holds hidden_dim
// neurons of dimension L * embed_dim; W2 holds vocab_size neurons of
// dimension hidden_dim.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace geoedit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Token = std::int32_t;
using TokenSeq = std::vector<Token>;

enum class MatrixId { W1, W2 };

std::string_view to_string(MatrixId id);
MatrixId matrix_id_from_string(std::string_view name);

struct ModelConfig {
    int vocab_size = 64;
    int seq_len = 2;
    int embed_dim = 16;
    int hidden_dim = 64;
    std::vector<MatrixId> editable_matrices{MatrixId::W1, MatrixId::W2};
    std::uint64_t seed = 0;

    int input_dim() const { return seq_len * embed_dim; }

    /// Throws ConfigError when a dimension or the editable set is invalid.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

struct ModelParams {
    ModelConfig config;
    Matrix embedding;  // vocab_size x embed_dim
    Matrix w1;         // input_dim x hidden_dim
    Vector b1;         // hidden_dim
    Matrix w2;         // hidden_dim x vocab_size
    Vector b2;         // vocab_size

    /// All-zero parameters with shapes taken from the config.
    static ModelParams zeros(const ModelConfig& config);

    const Matrix& matrix(MatrixId id) const { return id == MatrixId::W1 ? w1 : w2; }
    Matrix& matrix(MatrixId id) { return id == MatrixId::W1 ? w1 : w2; }

    bool all_finite() const;

    /// Throws ShapeError if any tensor disagrees with the config.
    void check_shapes() const;

    bool operator==(const ModelParams& other) const;
};

struct NeuronEntry {
    MatrixId matrix = MatrixId::W1;
    int column = 0;
    int dim = 0;

    bool operator==(const NeuronEntry&) const = default;
};

struct NeuronLayout {
    std::vector<NeuronEntry> entries;

    std::size_t size() const { return entries.size(); }
    const NeuronEntry& operator[](std::size_t i) const { return entries[i]; }

    /// Every column of every editable matrix, in editable_matrices order.
    static NeuronLayout for_config(const ModelConfig& config);

    /// Throws ShapeError unless every entry addresses a column of `params`
    /// with the right row count.
    void check_against(const ModelParams& params) const;

    bool operator==(const NeuronLayout&) const = default;
};

struct Example {
    TokenSeq question;
    Token answer = 0;
};

ModelParams init_model(const ModelConfig& config);

/// Concatenated embeddings for one question. Throws InputError on bad tokens.
Vector embed_question(const ModelParams& params, std::span<const Token> question);

Vector forward(const ModelParams& params, std::span<const Token> question);

struct LossAndGrad {
    double loss = 0.0;
    ModelParams grads;
};

/// Mean cross-entropy over the batch and its exact gradient w.r.t. every
/// parameter tensor.
LossAndGrad loss_and_grad(const ModelParams& params, std::span<const Example> batch);

/// Index of the largest entry; ties go to the lowest index.
Token argmax(const Vector& logits);

Token predict(const ModelParams& params, std::span<const Token> question);

struct TaskVectorSet;

/// params with every layout column c replaced by c + scale * delta[i].
ModelParams apply_delta(const ModelParams& params, const TaskVectorSet& delta, double scale);

/// Cached activations of the base model on a fixed probe set, used to
/// evaluate the model with exactly one neuron column perturbed. Perturbing a
/// W1 column only changes one hidden unit, and perturbing a W2 column only
/// changes one logit, so both cases are O(d_n + vocab_size).
class NeuronProbe {
public:
    NeuronProbe(const ModelParams& base, std::span<const TokenSeq> probes);

    std::size_t probe_count() const { return static_cast<std::size_t>(inputs_.cols()); }

    Vector base_logits(std::size_t probe) const { return logits_.col(static_cast<Eigen::Index>(probe)); }

    /// vocab x probes and hidden x probes.
    const Matrix& base_logits_all() const { return logits_; }
    const Matrix& hidden_all() const { return hidden_; }

    /// Logits of the base model with column `neuron` shifted by `delta`.
    Vector perturbed_logits(std::size_t probe, const NeuronEntry& neuron, const Vector& delta) const;

    /// Vector-Jacobian product: d(upstream . logits) / d(delta).
    Vector perturbed_logits_vjp(std::size_t probe, const NeuronEntry& neuron, const Vector& delta,
                                const Vector& upstream) const;

    /// All probes at once: column p holds perturbed_logits(p, neuron, delta).
    Matrix perturbed_logits_all(const NeuronEntry& neuron, const Vector& delta) const;

    /// Sum over probes of perturbed_logits_vjp(p, neuron, delta, upstream.col(p)).
    Vector perturbed_logits_vjp_all(const NeuronEntry& neuron, const Vector& delta, const Matrix& upstream) const;

private:
    Matrix w2t_;     // vocab x hidden
    Matrix inputs_;  // input_dim x probes
    Matrix preact_;  // hidden x probes
    Matrix hidden_;  // hidden x probes
    Matrix logits_;  // vocab x probes
};

}  // namespace geoedit
