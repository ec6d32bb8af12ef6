#include <benchmark/benchmark.h>

#include "geoedit/autoencoder.hpp"
#include "geoedit/experiment.hpp"
#include "geoedit/geometry.hpp"
#include "geoedit/random.hpp"
#include "geoedit/toymodel.hpp"

namespace {

using namespace geoedit;

std::vector<Example> random_batch(const ModelConfig& c, int n, Rng& rng) {
    std::vector<Example> batch;
    for (int i = 0; i < n; ++i) {
        Example ex;
        for (int t = 0; t < c.seq_len; ++t) ex.question.push_back(static_cast<Token>(rng.below(c.vocab_size)));
        ex.answer = static_cast<Token>(rng.below(c.vocab_size));
        batch.push_back(std::move(ex));
    }
    return batch;
}

void BM_Forward(benchmark::State& state) {
    ModelConfig c;
    const ModelParams p = init_model(c);
    const TokenSeq q{3, 17};
    for (auto _ : state) benchmark::DoNotOptimize(forward(p, q));
}
BENCHMARK(BM_Forward);

void BM_LossAndGrad(benchmark::State& state) {
    ModelConfig c;
    const ModelParams p = init_model(c);
    Rng rng(7);
    const auto batch = random_batch(c, static_cast<int>(state.range(0)), rng);
    for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(p, batch));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGrad)->Arg(16)->Arg(128);

void BM_Tsne(benchmark::State& state) {
    Rng rng(11);
    std::vector<Vector> pts;
    for (int i = 0; i < state.range(0); ++i) {
        Vector v(16);
        for (auto& x : v) x = rng.normal();
        pts.push_back(v);
    }
    TsneConfig cfg;
    cfg.iterations = 300;
    for (auto _ : state) benchmark::DoNotOptimize(run_tsne(pts, cfg));
}
BENCHMARK(BM_Tsne)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Pca2(benchmark::State& state) {
    Rng rng(13);
    std::vector<Vector> pts;
    for (int i = 0; i < 128; ++i) {
        Vector v(64);
        for (auto& x : v) x = rng.normal();
        pts.push_back(v);
    }
    for (auto _ : state) benchmark::DoNotOptimize(pca2(pts));
}
BENCHMARK(BM_Pca2)->Unit(benchmark::kMicrosecond);

void BM_AeLossAndGrad(benchmark::State& state) {
    ModelConfig c;
    const ModelParams base = init_model(c);
    Rng rng(17);
    std::vector<TauSample> samples;
    for (int i = 0; i < 32; ++i) {
        Vector tau(c.hidden_dim);
        for (auto& x : tau) x = 0.01 * rng.normal();
        samples.push_back({{MatrixId::W2, i, c.hidden_dim}, tau});
    }
    std::vector<TokenSeq> probe;
    for (int i = 0; i < 32; ++i) probe.push_back({static_cast<Token>(rng.below(64)), static_cast<Token>(rng.below(64))});
    const NeuronProbe np(base, probe);
    const AEParams ae = AEParams::init(AEConfig::for_input_dim(c.hidden_dim));
    AEParams grads = ae;
    const std::span<const TauSample> kl(samples.data(), 8);
    const double lambda = static_cast<double>(state.range(0)) / 10.0;
    for (auto _ : state) benchmark::DoNotOptimize(ae_loss_and_grad(ae, samples, kl, &np, lambda, grads));
}
BENCHMARK(BM_AeLossAndGrad)->Arg(0)->Arg(5)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
