#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geoedit/facts.hpp"
#include "geoedit/taskvec.hpp"
#include "geoedit/toymodel.hpp"

namespace geoedit {

struct AEConfig {
    int d_n = 0;
    int d_hidden = 0;
    int d_latent = 0;
    double lambda = 0.5;
    int probe_size = 32;
    int neurons_per_kl_step = 8;
    int epochs = 150;
    int batch_size = 32;
    double learning_rate = 3e-3;
    std::uint64_t seed = 0;

    /// d_n -> d_n/2 -> d_n/8 (each at least 2), other fields at defaults.
    static AEConfig for_input_dim(int d_n);

    void validate() const;
};

struct AELossPoint {
    int epoch = 0;
    double mse = 0.0;
    double kl = 0.0;
    double total = 0.0;

    bool operator==(const AELossPoint&) const = default;
};

/// Encoder  d_n -> d_hidden (tanh) -> d_latent
/// Decoder  d_latent -> d_hidden (tanh) -> d_n
/// Inputs are divided by input_scale before encoding and outputs multiplied
/// by it after decoding; input_scale is the RMS entry of the training corpus.
struct AEParams {
    Matrix enc1;  // d_hidden x d_n
    Vector enc1_bias;
    Matrix enc2;  // d_latent x d_hidden
    Vector enc2_bias;
    Matrix dec1;  // d_hidden x d_latent
    Vector dec1_bias;
    Matrix dec2;  // d_n x d_hidden
    Vector dec2_bias;
    double input_scale = 1.0;
    std::vector<AELossPoint> loss_curve;

    int input_dim() const { return static_cast<int>(enc1.cols()); }
    int hidden_dim() const { return static_cast<int>(enc1.rows()); }
    int latent_dim() const { return static_cast<int>(enc2.rows()); }

    static AEParams zeros(int d_n, int d_hidden, int d_latent);

    /// Weights uniform in +-1/sqrt(fan_in), zero biases.
    static AEParams init(const AEConfig& config);

    bool all_finite() const;

    bool operator==(const AEParams&) const = default;
};

Vector encode(const AEParams& ae, const Vector& tau);
Vector decode(const AEParams& ae, const Vector& latent);

/// A task vector together with the neuron it belongs to.
struct TauSample {
    NeuronEntry neuron;
    Vector tau;
};

struct AELoss {
    double total = 0.0;
    double mse = 0.0;
    double kl = 0.0;
};

/// KL(p || q) for two logit vectors, computed through log-softmax.
double kl_from_logits(const Vector& p_logits, const Vector& q_logits);

/// total = mse + lambda * kl, where mse is the mean squared entry error of
/// the reconstructions and kl the mean over (sample, probe) of
/// KL(softmax(f_{base + tau}(x)) || softmax(f_{base + tau_hat}(x))), each
/// perturbing only the sample's own neuron column.
AELoss ae_loss(const AEParams& ae, std::span<const TauSample> batch, const NeuronProbe& probe, double lambda);

AELoss ae_loss(const AEParams& ae, std::span<const TauSample> batch, const ModelParams& base,
               std::span<const TokenSeq> probe, double lambda);

/// Loss with mse taken over `mse_batch` and kl over `kl_batch`, plus the
/// exact gradient w.r.t. every AE weight (written to `grads`, same shapes as
/// `ae`). `probe` may be null when lambda == 0.
AELoss ae_loss_and_grad(const AEParams& ae, std::span<const TauSample> mse_batch,
                        std::span<const TauSample> kl_batch, const NeuronProbe* probe, double lambda,
                        AEParams& grads);

/// Up to `size` distinct questions drawn uniformly from the dataset's
/// old/new knowledge (both share the same question set).
std::vector<TokenSeq> select_probe(const FactDataset& dataset, int size, std::uint64_t seed);

/// Adam training on the composite loss. The kl term of every step uses
/// neurons_per_kl_step neurons sampled without replacement.
AEParams train_ae(std::span<const TauSample> corpus, const ModelParams& base, const FactDataset& dataset,
                  const AEConfig& config);

AEParams train_ae(std::span<const TauSample> corpus, const ModelParams& base, std::span<const TokenSeq> probe,
                  const AEConfig& config);

/// One auto-encoder per distinct neuron dimension.
struct AEBank {
    std::vector<AEParams> models;

    const AEParams& for_dim(int d_n) const;
    bool has_dim(int d_n) const;

    bool operator==(const AEBank&) const = default;
};

/// Pools tau_old and tau_new and trains one auto-encoder per d_n group.
/// `shared` supplies every hyper-parameter except the layer widths.
AEBank train_ae_bank(const TaskVectorSet& tau_old, const TaskVectorSet& tau_new, const ModelParams& base,
                     const FactDataset& dataset, const AEConfig& shared);

std::vector<TauSample> pooled_samples(const TaskVectorSet& tau_old, const TaskVectorSet& tau_new, int d_n);

}  // namespace geoedit
