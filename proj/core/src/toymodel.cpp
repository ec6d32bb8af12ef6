#include "geoedit/toymodel.hpp"

#include <cmath>
#include <string>

#include "geoedit/error.hpp"
#include "geoedit/random.hpp"
#include "geoedit/taskvec.hpp"

namespace geoedit {

namespace {

bool same(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same(const Vector& a, const Vector& b) { return a.size() == b.size() && a == b; }

void fill_uniform(Rng& rng, double* data, Eigen::Index count, double bound) {
    for (Eigen::Index i = 0; i < count; ++i) data[i] = rng.uniform(-bound, bound);
}

// log(sum(exp(z))) without overflow.
double log_sum_exp(const Vector& z) {
    const double m = z.maxCoeff();
    return m + std::log((z.array() - m).exp().sum());
}

}  // namespace

std::string_view to_string(MatrixId id) { return id == MatrixId::W1 ? "W1" : "W2"; }

MatrixId matrix_id_from_string(std::string_view name) {
    if (name == "W1") return MatrixId::W1;
    if (name == "W2") return MatrixId::W2;
    throw ConfigError("unknown matrix id '" + std::string(name) + "' (expected W1 or W2)");
}

void ModelConfig::validate() const {
    if (vocab_size < 4) throw ConfigError("model.vocab_size must be >= 4, got " + std::to_string(vocab_size));
    if (seq_len < 1) throw ConfigError("model.seq_len must be positive, got " + std::to_string(seq_len));
    if (embed_dim < 2) throw ConfigError("model.embed_dim must be >= 2, got " + std::to_string(embed_dim));
    if (hidden_dim < 2) throw ConfigError("model.hidden_dim must be >= 2, got " + std::to_string(hidden_dim));
    if (editable_matrices.empty()) throw ConfigError("model.editable_matrices must not be empty");
    for (std::size_t i = 0; i < editable_matrices.size(); ++i) {
        for (std::size_t j = i + 1; j < editable_matrices.size(); ++j) {
            if (editable_matrices[i] == editable_matrices[j]) {
                throw ConfigError("model.editable_matrices lists " +
                                  std::string(to_string(editable_matrices[i])) + " twice");
            }
        }
    }
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    p.config = config;
    p.embedding = Matrix::Zero(config.vocab_size, config.embed_dim);
    p.w1 = Matrix::Zero(config.input_dim(), config.hidden_dim);
    p.b1 = Vector::Zero(config.hidden_dim);
    p.w2 = Matrix::Zero(config.hidden_dim, config.vocab_size);
    p.b2 = Vector::Zero(config.vocab_size);
    return p;
}

bool ModelParams::all_finite() const {
    return embedding.allFinite() && w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

void ModelParams::check_shapes() const {
    const auto& c = config;
    const bool ok = embedding.rows() == c.vocab_size && embedding.cols() == c.embed_dim &&
                    w1.rows() == c.input_dim() && w1.cols() == c.hidden_dim && b1.size() == c.hidden_dim &&
                    w2.rows() == c.hidden_dim && w2.cols() == c.vocab_size && b2.size() == c.vocab_size;
    if (!ok) throw ShapeError("model parameters do not match their config");
}

bool ModelParams::operator==(const ModelParams& other) const {
    return config == other.config && same(embedding, other.embedding) && same(w1, other.w1) &&
           same(b1, other.b1) && same(w2, other.w2) && same(b2, other.b2);
}

NeuronLayout NeuronLayout::for_config(const ModelConfig& config) {
    config.validate();
    NeuronLayout layout;
    for (const MatrixId id : config.editable_matrices) {
        const int rows = id == MatrixId::W1 ? config.input_dim() : config.hidden_dim;
        const int cols = id == MatrixId::W1 ? config.hidden_dim : config.vocab_size;
        for (int c = 0; c < cols; ++c) layout.entries.push_back({id, c, rows});
    }
    return layout;
}

void NeuronLayout::check_against(const ModelParams& params) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const Matrix& m = params.matrix(e.matrix);
        if (e.column < 0 || e.column >= m.cols() || e.dim != m.rows()) {
            throw ShapeError("layout entry " + std::to_string(i) + " (" + std::string(to_string(e.matrix)) +
                             " column " + std::to_string(e.column) + ") does not fit the model");
        }
    }
}

ModelParams init_model(const ModelConfig& config) {
    ModelParams p = ModelParams::zeros(config);
    Rng rng(config.seed);
    fill_uniform(rng, p.embedding.data(), p.embedding.size(), 1.0);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(config.input_dim()));
    fill_uniform(rng, p.w1.data(), p.w1.size(), bound1);
    fill_uniform(rng, p.b1.data(), p.b1.size(), bound1);
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
    fill_uniform(rng, p.w2.data(), p.w2.size(), bound2);
    fill_uniform(rng, p.b2.data(), p.b2.size(), bound2);
    return p;
}

Vector embed_question(const ModelParams& params, std::span<const Token> question) {
    const auto& c = params.config;
    if (static_cast<int>(question.size()) != c.seq_len) {
        throw InputError("question has " + std::to_string(question.size()) + " tokens, expected " +
                         std::to_string(c.seq_len));
    }
    Vector x(c.input_dim());
    for (int k = 0; k < c.seq_len; ++k) {
        const Token t = question[k];
        if (t < 0 || t >= c.vocab_size) {
            throw InputError("token " + std::to_string(t) + " out of range [0, " + std::to_string(c.vocab_size) + ")");
        }
        x.segment(k * c.embed_dim, c.embed_dim) = params.embedding.row(t).transpose();
    }
    return x;
}

Vector forward(const ModelParams& params, std::span<const Token> question) {
    const Vector x = embed_question(params, question);
    const Vector h = (params.w1.transpose() * x + params.b1).array().tanh().matrix();
    return params.w2.transpose() * h + params.b2;
}

LossAndGrad loss_and_grad(const ModelParams& params, std::span<const Example> batch) {
    if (batch.empty()) throw InputError("loss_and_grad: empty batch");
    const auto& c = params.config;
    LossAndGrad out{0.0, ModelParams::zeros(c)};
    auto& g = out.grads;
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    for (const Example& ex : batch) {
        if (ex.answer < 0 || ex.answer >= c.vocab_size) {
            throw InputError("answer token " + std::to_string(ex.answer) + " out of range");
        }
        const Vector x = embed_question(params, ex.question);
        const Vector h = (params.w1.transpose() * x + params.b1).array().tanh().matrix();
        const Vector z = params.w2.transpose() * h + params.b2;

        const double lse = log_sum_exp(z);
        out.loss += (lse - z(ex.answer)) * inv_b;

        Vector dz = (z.array() - lse).exp().matrix();
        dz(ex.answer) -= 1.0;
        dz *= inv_b;

        g.w2.noalias() += h * dz.transpose();
        g.b2 += dz;
        const Vector da = ((params.w2 * dz).array() * (1.0 - h.array().square())).matrix();
        g.w1.noalias() += x * da.transpose();
        g.b1 += da;
        const Vector dx = params.w1 * da;
        for (int k = 0; k < c.seq_len; ++k) {
            g.embedding.row(ex.question[k]) += dx.segment(k * c.embed_dim, c.embed_dim).transpose();
        }
    }
    return out;
}

Token argmax(const Vector& logits) {
    Token best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i) {
        if (logits(i) > logits(best)) best = static_cast<Token>(i);
    }
    return best;
}

Token predict(const ModelParams& params, std::span<const Token> question) {
    return argmax(forward(params, question));
}

ModelParams apply_delta(const ModelParams& params, const TaskVectorSet& delta, double scale) {
    delta.validate();
    params.check_shapes();
    delta.layout.check_against(params);
    ModelParams out = params;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const auto& e = delta.layout[i];
        out.matrix(e.matrix).col(e.column) += scale * delta.vectors[i];
    }
    return out;
}

NeuronProbe::NeuronProbe(const ModelParams& base, std::span<const TokenSeq> probes) : w2t_(base.w2.transpose()) {
    const auto n = static_cast<Eigen::Index>(probes.size());
    inputs_.resize(base.w1.rows(), n);
    for (Eigen::Index p = 0; p < n; ++p) inputs_.col(p) = embed_question(base, probes[static_cast<std::size_t>(p)]);
    preact_ = (base.w1.transpose() * inputs_).colwise() + base.b1;
    hidden_ = preact_.array().tanh().matrix();
    logits_ = (w2t_ * hidden_).colwise() + base.b2;
}

Vector NeuronProbe::perturbed_logits(std::size_t probe, const NeuronEntry& neuron, const Vector& delta) const {
    const auto p = static_cast<Eigen::Index>(probe);
    Vector z = logits_.col(p);
    if (neuron.matrix == MatrixId::W2) {
        z(neuron.column) += hidden_.col(p).dot(delta);
    } else {
        const int j = neuron.column;
        const double h_new = std::tanh(preact_(j, p) + inputs_.col(p).dot(delta));
        z += (h_new - hidden_(j, p)) * w2t_.col(j);
    }
    return z;
}

Vector NeuronProbe::perturbed_logits_vjp(std::size_t probe, const NeuronEntry& neuron, const Vector& delta,
                                         const Vector& upstream) const {
    const auto p = static_cast<Eigen::Index>(probe);
    if (neuron.matrix == MatrixId::W2) return upstream(neuron.column) * hidden_.col(p);
    const int j = neuron.column;
    const double h_new = std::tanh(preact_(j, p) + inputs_.col(p).dot(delta));
    const double dh = w2t_.col(j).dot(upstream);
    return (dh * (1.0 - h_new * h_new)) * inputs_.col(p);
}

Matrix NeuronProbe::perturbed_logits_all(const NeuronEntry& neuron, const Vector& delta) const {
    Matrix z = logits_;
    if (neuron.matrix == MatrixId::W2) {
        z.row(neuron.column) += delta.transpose() * hidden_;
    } else {
        const int j = neuron.column;
        const Eigen::RowVectorXd h_new = (preact_.row(j) + delta.transpose() * inputs_).array().tanh().matrix();
        z.noalias() += w2t_.col(j) * (h_new - hidden_.row(j));
    }
    return z;
}

Vector NeuronProbe::perturbed_logits_vjp_all(const NeuronEntry& neuron, const Vector& delta,
                                             const Matrix& upstream) const {
    if (neuron.matrix == MatrixId::W2) return hidden_ * upstream.row(neuron.column).transpose();
    const int j = neuron.column;
    const Eigen::RowVectorXd h_new = (preact_.row(j) + delta.transpose() * inputs_).array().tanh().matrix();
    const Eigen::RowVectorXd dh = w2t_.col(j).transpose() * upstream;
    return inputs_ * (dh.array() * (1.0 - h_new.array().square())).matrix().transpose();
}

}  // namespace geoedit
