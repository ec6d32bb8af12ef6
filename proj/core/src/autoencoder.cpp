#include "geoedit/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>

#include "geoedit/error.hpp"
#include "geoedit/optim.hpp"
#include "geoedit/random.hpp"

namespace geoedit {

AEConfig AEConfig::for_input_dim(int d_n) {
    AEConfig c;
    c.d_n = d_n;
    c.d_hidden = std::max(2, d_n / 2);
    c.d_latent = std::max(2, d_n / 8);
    return c;
}

void AEConfig::validate() const {
    if (d_n < 1 || d_hidden < 1 || d_latent < 1) throw ConfigError("ae: layer widths must be positive");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("ae.lambda must be a non-negative number");
    if (probe_size < 1) throw ConfigError("ae.probe_size must be positive");
    if (neurons_per_kl_step < 1) throw ConfigError("ae.neurons_per_kl_step must be positive");
    if (epochs < 0) throw ConfigError("ae.epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("ae.batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("ae.learning_rate must be positive");
}

AEParams AEParams::zeros(int d_n, int d_hidden, int d_latent) {
    AEParams ae;
    ae.enc1 = Matrix::Zero(d_hidden, d_n);
    ae.enc1_bias = Vector::Zero(d_hidden);
    ae.enc2 = Matrix::Zero(d_latent, d_hidden);
    ae.enc2_bias = Vector::Zero(d_latent);
    ae.dec1 = Matrix::Zero(d_hidden, d_latent);
    ae.dec1_bias = Vector::Zero(d_hidden);
    ae.dec2 = Matrix::Zero(d_n, d_hidden);
    ae.dec2_bias = Vector::Zero(d_n);
    return ae;
}

AEParams AEParams::init(const AEConfig& config) {
    config.validate();
    AEParams ae = zeros(config.d_n, config.d_hidden, config.d_latent);
    Rng rng(config.seed);
    for (Matrix* m : {&ae.enc1, &ae.enc2, &ae.dec1, &ae.dec2}) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m->cols()));
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-bound, bound);
    }
    return ae;
}

bool AEParams::all_finite() const {
    return enc1.allFinite() && enc1_bias.allFinite() && enc2.allFinite() && enc2_bias.allFinite() &&
           dec1.allFinite() && dec1_bias.allFinite() && dec2.allFinite() && dec2_bias.allFinite() &&
           std::isfinite(input_scale);
}

namespace {

void check_input(const AEParams& ae, Eigen::Index n, const char* what) {
    if (n != ae.input_dim()) {
        throw ShapeError(std::string(what) + ": expected length " + std::to_string(ae.input_dim()) + ", got " +
                         std::to_string(n));
    }
}

// Activations of a batch, one column per sample.
struct Forward {
    Matrix u;     // scaled input
    Matrix z1;    // encoder hidden
    Matrix h;     // latent
    Matrix z2;    // decoder hidden
    Matrix out;   // reconstruction in original units
};

Forward run(const AEParams& ae, const Matrix& taus) {
    Forward f;
    f.u = taus / ae.input_scale;
    f.z1 = ((ae.enc1 * f.u).colwise() + ae.enc1_bias).array().tanh().matrix();
    f.h = (ae.enc2 * f.z1).colwise() + ae.enc2_bias;
    f.z2 = ((ae.dec1 * f.h).colwise() + ae.dec1_bias).array().tanh().matrix();
    f.out = ae.input_scale * ((ae.dec2 * f.z2).colwise() + ae.dec2_bias);
    return f;
}

// Accumulates d(loss)/d(weights) given d(loss)/d(out) for every column.
void backward(const AEParams& ae, const Forward& f, const Matrix& g_out, AEParams& grads) {
    const Matrix g_o = ae.input_scale * g_out;
    grads.dec2.noalias() += g_o * f.z2.transpose();
    grads.dec2_bias += g_o.rowwise().sum();
    const Matrix g_a2 = ((ae.dec2.transpose() * g_o).array() * (1.0 - f.z2.array().square())).matrix();
    grads.dec1.noalias() += g_a2 * f.h.transpose();
    grads.dec1_bias += g_a2.rowwise().sum();
    const Matrix g_h = ae.dec1.transpose() * g_a2;
    grads.enc2.noalias() += g_h * f.z1.transpose();
    grads.enc2_bias += g_h.rowwise().sum();
    const Matrix g_a1 = ((ae.enc2.transpose() * g_h).array() * (1.0 - f.z1.array().square())).matrix();
    grads.enc1.noalias() += g_a1 * f.u.transpose();
    grads.enc1_bias += g_a1.rowwise().sum();
}

Matrix stack(const AEParams& ae, std::span<const TauSample> batch, const char* what) {
    Matrix m(ae.input_dim(), static_cast<Eigen::Index>(batch.size()));
    for (std::size_t i = 0; i < batch.size(); ++i) {
        check_input(ae, batch[i].tau.size(), what);
        m.col(static_cast<Eigen::Index>(i)) = batch[i].tau;
    }
    return m;
}

Matrix log_softmax_cols(const Matrix& z) {
    const Eigen::RowVectorXd m = z.colwise().maxCoeff();
    Matrix shifted = z.rowwise() - m;
    const Eigen::RowVectorXd lse = shifted.array().exp().colwise().sum().log().matrix();
    shifted.rowwise() -= lse;
    return shifted;
}

Vector log_softmax(const Vector& z) {
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    return (z.array() - lse).matrix();
}

void zero_like(const AEParams& ae, AEParams& grads) {
    if (grads.enc1.rows() == ae.enc1.rows() && grads.enc1.cols() == ae.enc1.cols() &&
        grads.enc2.rows() == ae.enc2.rows()) {
        for (Matrix* m : {&grads.enc1, &grads.enc2, &grads.dec1, &grads.dec2}) m->setZero();
        for (Vector* v : {&grads.enc1_bias, &grads.enc2_bias, &grads.dec1_bias, &grads.dec2_bias}) v->setZero();
    } else {
        grads = AEParams::zeros(ae.input_dim(), ae.hidden_dim(), ae.latent_dim());
    }
    grads.input_scale = ae.input_scale;
}

}  // namespace

Vector encode(const AEParams& ae, const Vector& tau) {
    check_input(ae, tau.size(), "encode");
    const Vector z1 = (ae.enc1 * (tau / ae.input_scale) + ae.enc1_bias).array().tanh().matrix();
    return ae.enc2 * z1 + ae.enc2_bias;
}

Vector decode(const AEParams& ae, const Vector& latent) {
    if (latent.size() != ae.latent_dim()) {
        throw ShapeError("decode: expected latent length " + std::to_string(ae.latent_dim()) + ", got " +
                         std::to_string(latent.size()));
    }
    const Vector z2 = (ae.dec1 * latent + ae.dec1_bias).array().tanh().matrix();
    return ae.input_scale * (ae.dec2 * z2 + ae.dec2_bias);
}

double kl_from_logits(const Vector& p_logits, const Vector& q_logits) {
    if (p_logits.size() != q_logits.size()) throw ShapeError("kl_from_logits: length mismatch");
    const Vector log_p = log_softmax(p_logits);
    const Vector log_q = log_softmax(q_logits);
    return (log_p.array().exp() * (log_p - log_q).array()).sum();
}

namespace {

// Softmax of the true-edit logits over the probe set, fixed for a sample.
struct KlTarget {
    Matrix p;
    double neg_entropy = 0.0;  // sum of p * log p
    // W2 neurons only move logit row c: p(c, .) and sum_{v != c} p(v, .) * z_base(v, .)
    Eigen::RowVectorXd p_row;
    Eigen::RowVectorXd pz_rest;
};

KlTarget kl_target(const NeuronProbe& probe, const TauSample& sample) {
    const Matrix log_p = log_softmax_cols(probe.perturbed_logits_all(sample.neuron, sample.tau));
    KlTarget t;
    t.p = log_p.array().exp().matrix();
    t.neg_entropy = (t.p.array() * log_p.array()).sum();
    if (sample.neuron.matrix == MatrixId::W2) {
        const Eigen::Index c = sample.neuron.column;
        const Matrix& z = probe.base_logits_all();
        t.p_row = t.p.row(c);
        t.pz_rest = (t.p.array() * z.array()).colwise().sum().matrix() - t.p_row.cwiseProduct(z.row(c));
    }
    return t;
}

// rest(c, p) = log sum_{v != c} exp(z(v, p)). Prefix and suffix sums avoid
// the cancellation of subtracting exp(z(c, p)) from the full sum.
Matrix leave_one_out_lse(const Matrix& z) {
    const Eigen::Index v_count = z.rows();
    Matrix rest(v_count, z.cols());
    Vector e(v_count);
    Vector prefix(v_count + 1);
    Vector suffix(v_count + 1);
    for (Eigen::Index p = 0; p < z.cols(); ++p) {
        const double m = z.col(p).maxCoeff();
        e = (z.col(p).array() - m).exp().matrix();
        prefix(0) = 0.0;
        for (Eigen::Index v = 0; v < v_count; ++v) prefix(v + 1) = prefix(v) + e(v);
        suffix(v_count) = 0.0;
        for (Eigen::Index v = v_count; v-- > 0;) suffix(v) = suffix(v + 1) + e(v);
        for (Eigen::Index c = 0; c < v_count; ++c) rest(c, p) = m + std::log(prefix(c) + suffix(c + 1));
    }
    return rest;
}

// log(exp(a) + exp(b)) for a possibly -inf.
double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// `mse_taus` holds one sample per column; `targets` is empty or aligned with `kl_batch`.
// `lse_rest` is leave_one_out_lse of the probe's base logits (needed when lambda > 0).
AELoss loss_and_grad_impl(const AEParams& ae, const Matrix& mse_taus, std::span<const TauSample* const> kl_batch,
                          const NeuronProbe* probe, const Matrix* lse_rest, double lambda, AEParams& grads,
                          std::span<const KlTarget* const> targets) {
    zero_like(ae, grads);
    AELoss loss;

    if (mse_taus.cols() > 0) {
        const Matrix& taus = mse_taus;
        const Forward f = run(ae, taus);
        const Matrix diff = f.out - taus;
        const double count = static_cast<double>(diff.size());
        loss.mse = diff.squaredNorm() / count;
        backward(ae, f, (2.0 / count) * diff, grads);
    }

    if (lambda > 0.0 && !kl_batch.empty()) {
        if (probe == nullptr || probe->probe_count() == 0) {
            throw InputError("ae_loss: a non-empty probe set is required when lambda > 0");
        }
        Matrix taus(ae.input_dim(), static_cast<Eigen::Index>(kl_batch.size()));
        for (std::size_t s = 0; s < kl_batch.size(); ++s) {
            check_input(ae, kl_batch[s]->tau.size(), "ae_loss");
            taus.col(static_cast<Eigen::Index>(s)) = kl_batch[s]->tau;
        }
        const Forward f = run(ae, taus);
        const double norm = 1.0 / static_cast<double>(kl_batch.size() * probe->probe_count());
        Matrix g_out = Matrix::Zero(taus.rows(), taus.cols());
        double kl_sum = 0.0;
        for (std::size_t s = 0; s < kl_batch.size(); ++s) {
            const auto col = static_cast<Eigen::Index>(s);
            const NeuronEntry& neuron = kl_batch[s]->neuron;
            const Vector tau_hat = f.out.col(col);
            KlTarget local;
            const KlTarget* target = targets.empty() ? nullptr : targets[s];
            if (target == nullptr) {
                local = kl_target(*probe, *kl_batch[s]);
                target = &local;
            }
            if (neuron.matrix == MatrixId::W2) {
                // Only logit row c moves, so log q(v) = z(v) - lse for v != c
                // and the KL needs O(probes) work.
                const Eigen::Index c = neuron.column;
                const Eigen::RowVectorXd zc =
                    probe->base_logits_all().row(c) + tau_hat.transpose() * probe->hidden_all();
                Eigen::RowVectorXd q_c(zc.size());
                double cross = 0.0;  // sum of p * log q
                for (Eigen::Index p = 0; p < zc.size(); ++p) {
                    const double lse = log_add_exp((*lse_rest)(c, p), zc(p));
                    cross += target->pz_rest(p) + target->p_row(p) * zc(p) - lse;
                    q_c(p) = std::exp(zc(p) - lse);
                }
                kl_sum += target->neg_entropy - cross;
                g_out.col(col) = norm * (probe->hidden_all() * (q_c - target->p_row).transpose());
                continue;
            }
            // One exp pass gives both log q and q.
            Matrix z = probe->perturbed_logits_all(neuron, tau_hat);
            z.rowwise() -= z.colwise().maxCoeff();
            Matrix q = z.array().exp().matrix();
            const Eigen::RowVectorXd sums = q.colwise().sum();
            z.rowwise() -= sums.array().log().matrix();
            q.array().rowwise() /= sums.array();
            kl_sum += target->neg_entropy - (target->p.array() * z.array()).sum();
            // dKL/dz_hat = softmax(z_hat) - p, per probe column
            g_out.col(col) = norm * probe->perturbed_logits_vjp_all(neuron, tau_hat, q - target->p);
        }
        // KL is non-negative; cancellation can leave a value a few ulps below zero.
        loss.kl = std::max(0.0, kl_sum * norm);
        if (!std::isfinite(loss.kl)) throw DivergenceError("ae_loss: non-finite KL term", 0);
        backward(ae, f, lambda * g_out, grads);
    }

    loss.total = loss.mse + lambda * loss.kl;
    return loss;
}

}  // namespace

AELoss ae_loss_and_grad(const AEParams& ae, std::span<const TauSample> mse_batch,
                        std::span<const TauSample> kl_batch, const NeuronProbe* probe, double lambda,
                        AEParams& grads) {
    std::vector<const TauSample*> kl;
    for (const auto& s : kl_batch) kl.push_back(&s);
    Matrix rest;
    if (lambda > 0.0 && probe != nullptr) rest = leave_one_out_lse(probe->base_logits_all());
    return loss_and_grad_impl(ae, stack(ae, mse_batch, "ae_loss"), kl, probe, &rest, lambda, grads, {});
}

AELoss ae_loss(const AEParams& ae, std::span<const TauSample> batch, const NeuronProbe& probe, double lambda) {
    AEParams grads;
    return ae_loss_and_grad(ae, batch, batch, &probe, lambda, grads);
}

AELoss ae_loss(const AEParams& ae, std::span<const TauSample> batch, const ModelParams& base,
               std::span<const TokenSeq> probe, double lambda) {
    if (lambda > 0.0 && probe.empty()) throw InputError("ae_loss: a non-empty probe set is required when lambda > 0");
    const NeuronProbe cache(base, probe);
    return ae_loss(ae, batch, cache, lambda);
}

std::vector<TokenSeq> select_probe(const FactDataset& dataset, int size, std::uint64_t seed) {
    std::vector<TokenSeq> questions;
    for (const auto& r : dataset.records()) questions.push_back(r.question);
    Rng rng(seed);
    rng.shuffle(std::span<TokenSeq>(questions));
    if (static_cast<int>(questions.size()) > size) questions.resize(static_cast<std::size_t>(size));
    return questions;
}

AEParams train_ae(std::span<const TauSample> corpus, const ModelParams& base, const FactDataset& dataset,
                  const AEConfig& config) {
    const auto probe = select_probe(dataset, config.probe_size, derive_seed(config.seed, "probe"));
    return train_ae(corpus, base, probe, config);
}

AEParams train_ae(std::span<const TauSample> corpus, const ModelParams& base, std::span<const TokenSeq> probe,
                  const AEConfig& config) {
    config.validate();
    if (corpus.empty()) throw InputError("train_ae: empty task vector corpus");
    if (config.lambda > 0.0 && probe.empty()) throw InputError("train_ae: empty probe set with lambda > 0");

    AEParams ae = AEParams::init(config);
    double sq = 0.0;
    Eigen::Index count = 0;
    for (const auto& s : corpus) {
        if (s.tau.size() != config.d_n) throw ShapeError("train_ae: task vector length differs from ae.d_n");
        sq += s.tau.squaredNorm();
        count += s.tau.size();
    }
    const double rms = std::sqrt(sq / static_cast<double>(count));
    ae.input_scale = rms > 0.0 && std::isfinite(rms) ? rms : 1.0;

    std::optional<NeuronProbe> cache;
    std::vector<KlTarget> targets;
    Matrix lse_rest;
    if (config.lambda > 0.0) {
        cache.emplace(base, probe);
        lse_rest = leave_one_out_lse(cache->base_logits_all());
        targets.reserve(corpus.size());
        for (const auto& s : corpus) targets.push_back(kl_target(*cache, s));
    }
    std::vector<const KlTarget*> kl_targets;

    OptimizerConfig adam;
    adam.kind = OptimizerKind::Adam;
    Optimizer optimizer(adam, config.learning_rate);
    Rng rng(config.seed);

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::size_t> pool = order;
    Matrix corpus_taus(config.d_n, static_cast<Eigen::Index>(corpus.size()));
    for (std::size_t i = 0; i < corpus.size(); ++i) corpus_taus.col(static_cast<Eigen::Index>(i)) = corpus[i].tau;
    Matrix batch;
    std::vector<const TauSample*> kl_batch;
    AEParams grads;
    long step = 0;
    const std::size_t kl_count = std::min<std::size_t>(static_cast<std::size_t>(config.neurons_per_kl_step), corpus.size());

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        AELossPoint point{epoch + 1, 0.0, 0.0, 0.0};
        int steps = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
            batch.resize(config.d_n, static_cast<Eigen::Index>(end - begin));
            for (std::size_t k = begin; k < end; ++k) {
                batch.col(static_cast<Eigen::Index>(k - begin)) = corpus_taus.col(static_cast<Eigen::Index>(order[k]));
            }

            kl_batch.clear();
            kl_targets.clear();
            if (config.lambda > 0.0) {
                // Partial Fisher-Yates: the first kl_count slots become the sample.
                for (std::size_t k = 0; k < kl_count; ++k) {
                    const std::size_t j = k + static_cast<std::size_t>(rng.below(pool.size() - k));
                    std::swap(pool[k], pool[j]);
                    kl_batch.push_back(&corpus[pool[k]]);
                    kl_targets.push_back(&targets[pool[k]]);
                }
            }

            const AELoss loss =
                loss_and_grad_impl(ae, batch, kl_batch, cache ? &*cache : nullptr, &lse_rest, config.lambda, grads, kl_targets);
            if (!std::isfinite(loss.total)) throw DivergenceError("train_ae: non-finite loss", step);
            if (loss.kl < -1e-12) throw DivergenceError("train_ae: negative KL term", step);

            std::vector<ParamBlock> blocks;
            auto add = [&blocks](auto& v, const auto& g) {
                blocks.push_back({{v.data(), static_cast<std::size_t>(v.size())},
                                  {g.data(), static_cast<std::size_t>(g.size())}});
            };
            add(ae.enc1, grads.enc1);
            add(ae.enc1_bias, grads.enc1_bias);
            add(ae.enc2, grads.enc2);
            add(ae.enc2_bias, grads.enc2_bias);
            add(ae.dec1, grads.dec1);
            add(ae.dec1_bias, grads.dec1_bias);
            add(ae.dec2, grads.dec2);
            add(ae.dec2_bias, grads.dec2_bias);
            optimizer.step(blocks);

            point.mse += loss.mse;
            point.kl += loss.kl;
            point.total += loss.total;
            ++steps;
            ++step;
        }
        point.mse /= steps;
        point.kl /= steps;
        point.total /= steps;
        ae.loss_curve.push_back(point);
    }
    if (!ae.all_finite()) throw DivergenceError("train_ae: weights became non-finite", step);
    return ae;
}

const AEParams& AEBank::for_dim(int d_n) const {
    for (const auto& m : models) {
        if (m.input_dim() == d_n) return m;
    }
    throw ConfigError("no auto-encoder trained for neuron dimension " + std::to_string(d_n));
}

bool AEBank::has_dim(int d_n) const {
    return std::any_of(models.begin(), models.end(), [d_n](const AEParams& m) { return m.input_dim() == d_n; });
}

std::vector<TauSample> pooled_samples(const TaskVectorSet& tau_old, const TaskVectorSet& tau_new, int d_n) {
    std::vector<TauSample> out;
    for (const TaskVectorSet* set : {&tau_old, &tau_new}) {
        for (std::size_t i = 0; i < set->size(); ++i) {
            if (set->layout[i].dim == d_n) out.push_back({set->layout[i], set->vectors[i]});
        }
    }
    return out;
}

AEBank train_ae_bank(const TaskVectorSet& tau_old, const TaskVectorSet& tau_new, const ModelParams& base,
                     const FactDataset& dataset, const AEConfig& shared) {
    if (!(tau_old.layout == tau_new.layout)) throw ShapeError("train_ae_bank: task vector layouts differ");
    std::vector<int> dims;
    for (const auto& e : tau_old.layout.entries) {
        if (std::find(dims.begin(), dims.end(), e.dim) == dims.end()) dims.push_back(e.dim);
    }
    const auto probe = select_probe(dataset, shared.probe_size, derive_seed(shared.seed, "probe"));
    AEBank bank;
    for (const int d : dims) {
        AEConfig cfg = AEConfig::for_input_dim(d);
        cfg.lambda = shared.lambda;
        cfg.probe_size = shared.probe_size;
        cfg.neurons_per_kl_step = shared.neurons_per_kl_step;
        cfg.epochs = shared.epochs;
        cfg.batch_size = shared.batch_size;
        cfg.learning_rate = shared.learning_rate;
        cfg.seed = derive_seed(shared.seed, "d_n=" + std::to_string(d));
        const auto corpus = pooled_samples(tau_old, tau_new, d);
        bank.models.push_back(train_ae(corpus, base, probe, cfg));
    }
    return bank;
}

}  // namespace geoedit
