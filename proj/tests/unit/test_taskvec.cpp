#include <gtest/gtest.h>

#include <cmath>

#include "geoedit/error.hpp"
#include "geoedit/taskvec.hpp"
#include "test_support.hpp"

namespace geoedit {
namespace {

using testing::random_matrix;
using testing::random_model;
using testing::random_vector;
using testing::small_config;

ModelParams perturbed(Rng& rng, const ModelParams& p, double scale) {
    ModelParams q = p;
    q.w1 += random_matrix(rng, q.w1.rows(), q.w1.cols(), scale);
    q.w2 += random_matrix(rng, q.w2.rows(), q.w2.cols(), scale);
    return q;
}

TEST(Extract, IdenticalParamsGiveZeroVectors) {
    Rng rng(1);
    const auto c = small_config();
    const auto p = random_model(rng, c);
    const auto tau = extract(p, p, NeuronLayout::for_config(c));
    ASSERT_EQ(tau.size(), 10u);
    for (const auto& v : tau.vectors) EXPECT_EQ(v.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Extract, ColumnsMatchTheDifference) {
    Rng rng(2);
    const auto c = small_config();
    const auto before = random_model(rng, c);
    const auto after = perturbed(rng, before, 1.0);
    const auto layout = NeuronLayout::for_config(c);
    const auto tau = extract(before, after, layout, TaskVectorSource::New);
    EXPECT_EQ(tau.source, TaskVectorSource::New);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& e = layout[i];
        const Vector expected = after.matrix(e.matrix).col(e.column) - before.matrix(e.matrix).col(e.column);
        EXPECT_EQ(tau.vectors[i], expected);
    }
}

TEST(Extract, ApplyingTheDeltaReproducesTheTarget) {
    Rng rng(3);
    const auto c = small_config();
    for (int trial = 0; trial < 20; ++trial) {
        const auto before = random_model(rng, c);
        const auto after = perturbed(rng, before, 0.3);
        const auto tau = extract(before, after, NeuronLayout::for_config(c));
        const auto rebuilt = apply_delta(before, tau, 1.0);
        EXPECT_LT((rebuilt.w1 - after.w1).cwiseAbs().maxCoeff(), 1e-14);
        EXPECT_LT((rebuilt.w2 - after.w2).cwiseAbs().maxCoeff(), 1e-14);
    }
}

TEST(Extract, RoundTripIsExactWheneverSomeDeltaIs) {
    Rng rng(31);
    ModelConfig c = small_config(6, 2, 3, 40);
    c.editable_matrices = {MatrixId::W1};
    const auto layout = NeuronLayout::for_config(c);
    ModelParams before = ModelParams::zeros(c);
    ModelParams after = ModelParams::zeros(c);
    // Mixed magnitudes and sign changes, the cases where b - a rounds badly.
    for (Eigen::Index i = 0; i < before.w1.size(); ++i) {
        before.w1.data()[i] = rng.normal() * std::pow(10.0, rng.uniform(-3.0, 1.0));
        after.w1.data()[i] = rng.normal() * std::pow(10.0, rng.uniform(-3.0, 1.0));
    }
    const auto rebuilt = apply_delta(before, extract(before, after, layout), 1.0);
    int exact = 0;
    for (Eigen::Index i = 0; i < before.w1.size(); ++i) {
        const double a = before.w1.data()[i];
        const double b = after.w1.data()[i];
        if (testing::delta_can_reach(a, b)) {
            EXPECT_EQ(rebuilt.w1.data()[i], b) << a << " -> " << b;
            ++exact;
        }
    }
    EXPECT_GT(exact, before.w1.size() / 2);
}

TEST(Extract, AntisymmetricAndLinear) {
    Rng rng(4);
    const auto c = small_config();
    const auto layout = NeuronLayout::for_config(c);
    for (int trial = 0; trial < 20; ++trial) {
        const auto base = random_model(rng, c);
        const auto a = perturbed(rng, base, 1.0);
        const auto forward_tau = extract(base, a, layout);
        const auto backward_tau = extract(a, base, layout);
        for (std::size_t i = 0; i < layout.size(); ++i) EXPECT_EQ(forward_tau.vectors[i], -backward_tau.vectors[i]);

        ModelParams d1 = ModelParams::zeros(c);
        ModelParams d2 = ModelParams::zeros(c);
        d1.w1 = random_matrix(rng, c.input_dim(), c.hidden_dim);
        d2.w1 = random_matrix(rng, c.input_dim(), c.hidden_dim);
        d1.w2 = random_matrix(rng, c.hidden_dim, c.vocab_size);
        d2.w2 = random_matrix(rng, c.hidden_dim, c.vocab_size);
        auto plus = [&](const ModelParams& d) {
            ModelParams q = base;
            q.w1 += d.w1;
            q.w2 += d.w2;
            return q;
        };
        ModelParams both = base;
        both.w1 += d1.w1 + d2.w1;
        both.w2 += d1.w2 + d2.w2;
        const auto t12 = extract(base, both, layout);
        const auto t1 = extract(base, plus(d1), layout);
        const auto t2 = extract(base, plus(d2), layout);
        for (std::size_t i = 0; i < layout.size(); ++i) {
            EXPECT_LT((t12.vectors[i] - t1.vectors[i] - t2.vectors[i]).cwiseAbs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Extract, ConfigMismatchIsAShapeError) {
    const auto a = ModelParams::zeros(small_config());
    const auto b = ModelParams::zeros(small_config(6, 2, 3, 5));
    EXPECT_THROW(extract(a, b, NeuronLayout::for_config(a.config)), ShapeError);
}

TEST(TaskVectorSet, ValidateCatchesBadShapesAndValues) {
    const auto layout = NeuronLayout::for_config(small_config());
    auto s = TaskVectorSet::zeros(layout, TaskVectorSource::Old);
    EXPECT_NO_THROW(s.validate());
    s.vectors[0](0) = std::nan("");
    EXPECT_THROW(s.validate(), InputError);
    s = TaskVectorSet::zeros(layout, TaskVectorSource::Old);
    s.vectors.pop_back();
    EXPECT_THROW(s.validate(), ShapeError);
    s = TaskVectorSet::zeros(layout, TaskVectorSource::Old);
    s.vectors[1] = Vector::Zero(2);
    EXPECT_THROW(s.validate(), ShapeError);
}

TEST(TaskVectorSource, NamesRoundTrip) {
    for (const auto s : {TaskVectorSource::Old, TaskVectorSource::New, TaskVectorSource::Edited,
                         TaskVectorSource::Reconstructed}) {
        EXPECT_EQ(task_vector_source_from_string(to_string(s)), s);
    }
}

TEST(FusionWeights, MinMaxExamples) {
    Vector imp_old(3);
    imp_old << 0.0, 5.0, 10.0;
    const Vector imp_new = Vector::Constant(3, 3.0);
    const auto w = fusion_weights(imp_old, imp_new);
    EXPECT_DOUBLE_EQ(w.alpha(0), 0.0);
    EXPECT_DOUBLE_EQ(w.alpha(1), 0.5);
    EXPECT_DOUBLE_EQ(w.alpha(2), 1.0);
    EXPECT_EQ(w.beta, Vector::Ones(3));
}

TEST(FusionWeights, ScaleInvariantBoundedAndOrderPreserving) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(40));
        const Vector imp_old = random_vector(rng, n).cwiseAbs();
        const Vector imp_new = random_vector(rng, n).cwiseAbs();
        const auto w = fusion_weights(imp_old, imp_new);
        ASSERT_TRUE((w.alpha.array() >= 0.0).all() && (w.alpha.array() <= 1.0).all());
        ASSERT_TRUE((w.beta.array() >= 0.0).all() && (w.beta.array() <= 1.0).all());
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (imp_old(i) <= imp_old(j)) {
                    ASSERT_LE(w.alpha(i), w.alpha(j));
                }
            }
        }
        const double k = 0.01 + 100.0 * rng.uniform();
        const auto scaled = fusion_weights(k * imp_old, imp_new);
        EXPECT_LT((scaled.alpha - w.alpha).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_EQ(scaled.beta, w.beta);
    }
}

TEST(FusionWeights, RejectsNegativeAndMismatchedInput) {
    Vector neg(2);
    neg << 1.0, -0.5;
    EXPECT_THROW(fusion_weights(neg, Vector::Ones(2)), InputError);
    EXPECT_THROW(fusion_weights(Vector::Ones(2), neg), InputError);
    EXPECT_ANY_THROW(fusion_weights(Vector::Ones(2), Vector::Ones(3)));
}

}  // namespace
}  // namespace geoedit
