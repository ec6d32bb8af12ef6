#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "geoedit/autoencoder.hpp"
#include "geoedit/error.hpp"
#include "geoedit/geometry.hpp"
#include "test_support.hpp"

namespace geoedit {
namespace {

using testing::random_task_vectors;
using testing::random_vector;
using testing::small_config;
using Big = boost::multiprecision::cpp_bin_float_50;

// 50-digit arccos of the cosine, in degrees.
double oracle_angle(const Vector& u, const Vector& v) {
    Big dot = 0;
    Big uu = 0;
    Big vv = 0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        dot += Big(u(i)) * Big(v(i));
        uu += Big(u(i)) * Big(u(i));
        vv += Big(v(i)) * Big(v(i));
    }
    Big c = dot / (sqrt(uu) * sqrt(vv));
    if (c > 1) c = 1;
    if (c < -1) c = -1;
    return static_cast<double>(acos(c) * 180 / boost::math::constants::pi<Big>());
}

Vector vec2(double x, double y) {
    Vector v(2);
    v << x, y;
    return v;
}

TEST(AngleDeg, KnownAngles) {
    EXPECT_DOUBLE_EQ(angle_deg(Point2(1, 0), Point2(0, 1)), 90.0);
    EXPECT_DOUBLE_EQ(angle_deg(Point2(1, 0), Point2(-1, 0)), 180.0);
    EXPECT_NEAR(angle_deg(Point2(1, 0), Point2(1, 1)), 45.0, 1e-9);
    EXPECT_EQ(angle_deg(Point2(2, 3), Point2(4, 6)), 0.0);
    EXPECT_NEAR(angle_deg(vec2(1, 0), vec2(1, 1)), 45.0, 1e-9);
}

TEST(AngleDeg, MatchesHighPrecisionOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.below(60));
        const Vector u = random_vector(rng, d);
        Vector v = random_vector(rng, d);
        // Every third pair nearly parallel or antiparallel, where a plain
        // acos loses digits.
        if (trial % 3 == 1) v = u + 1e-7 * v;
        if (trial % 3 == 2) v = -u + 1e-7 * v;
        EXPECT_NEAR(angle_deg(u, v), oracle_angle(u, v), 1e-9) << "d=" << d;
        if (d == 2) {
            EXPECT_NEAR(angle_deg(Point2(u(0), u(1)), Point2(v(0), v(1))), oracle_angle(u, v), 1e-9);
        }
    }
}

TEST(AngleDeg, SymmetricScaleInvariantAndBounded) {
    Rng rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.below(20));
        const Vector u = random_vector(rng, d);
        const Vector v = random_vector(rng, d);
        const double a = angle_deg(u, v);
        ASSERT_GE(a, 0.0);
        ASSERT_LE(a, 180.0);
        EXPECT_EQ(a, angle_deg(v, u));
        const double s = 1e-3 + 1e3 * rng.uniform();
        const double t = 1e-3 + 1e3 * rng.uniform();
        EXPECT_NEAR(angle_deg(Vector(s * u), Vector(t * v)), a, 1e-9);
    }
}

TEST(AngleDeg, ShortVectorsAreDegenerate) {
    EXPECT_THROW(angle_deg(Point2(0, 0), Point2(1, 0)), DegenerateAngleError);
    EXPECT_THROW(angle_deg(vec2(1, 0), vec2(1e-13, 0)), DegenerateAngleError);
    EXPECT_ANY_THROW(angle_deg(Vector(Vector::Ones(3)), Vector(Vector::Ones(4))));
}

TEST(Classify, ThresholdExamples) {
    EXPECT_EQ(classify(90, 85, 95), EditClass::Orthogonal);
    EXPECT_EQ(classify(85, 85, 95), EditClass::Orthogonal);
    EXPECT_EQ(classify(95, 85, 95), EditClass::Orthogonal);
    EXPECT_EQ(classify(30, 85, 95), EditClass::Synergistic);
    EXPECT_EQ(classify(170, 85, 95), EditClass::Conflict);
    EXPECT_EQ(classify(0, 85, 95), EditClass::Synergistic);
    EXPECT_EQ(classify(180, 85, 95), EditClass::Conflict);
    EXPECT_EQ(classify(0, 0, 0), EditClass::Synergistic);
    EXPECT_EQ(classify(1e-9, 0, 0), EditClass::Conflict);
}

TEST(Classify, TotalAndConsistentWithThresholds) {
    Rng rng(3);
    for (int trial = 0; trial < 2000; ++trial) {
        double a = 180.0 * rng.uniform();
        double b = 180.0 * rng.uniform();
        if (a > b) std::swap(a, b);
        const double phi = 180.0 * rng.uniform();
        const EditClass c = classify(phi, a, b);
        const EditClass expected = phi < a ? EditClass::Synergistic
                                   : phi <= b ? EditClass::Orthogonal
                                              : EditClass::Conflict;
        EXPECT_EQ(c, expected);
    }
    EXPECT_ANY_THROW(classify(10, 95, 85));
    EXPECT_ANY_THROW(classify(-1, 85, 95));
}

TEST(Names, EnumsRoundTrip) {
    for (const auto c : {EditClass::Synergistic, EditClass::Orthogonal, EditClass::Conflict}) {
        EXPECT_EQ(edit_class_from_string(to_string(c)), c);
    }
    for (const auto m : {AngleMethod::Raw, AngleMethod::Pca, AngleMethod::Tsne, AngleMethod::AeTsne}) {
        EXPECT_EQ(angle_method_from_string(to_string(m)), m);
    }
}

TEST(Histogram, EighteenTenDegreeBins) {
    const auto h = angle_histogram({0.0, 9.99, 10.0, 90.0, 179.0, 180.0});
    EXPECT_EQ(h[0], 2);
    EXPECT_EQ(h[1], 1);
    EXPECT_EQ(h[9], 1);
    EXPECT_EQ(h[17], 2);
    int total = 0;
    for (const int c : h) total += c;
    EXPECT_EQ(total, 6);
}

TEST(Pca2, RecoversTwoDimensionalDataIsometrically) {
    Rng rng(4);
    std::vector<Vector> pts;
    for (int i = 0; i < 30; ++i) pts.push_back(vec2(3.0 * rng.normal(), rng.normal()));
    Vector mean = Vector::Zero(2);
    for (const auto& p : pts) mean += p / 30.0;
    for (auto& p : pts) p -= mean;
    const auto e = pca2(pts);
    ASSERT_EQ(e.points.size(), pts.size());
    double var1 = 0.0;
    double var2 = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        var1 += e.points[i](0) * e.points[i](0);
        var2 += e.points[i](1) * e.points[i](1);
        for (std::size_t j = 0; j < pts.size(); ++j) {
            EXPECT_NEAR((e.points[i] - e.points[j]).norm(), (pts[i] - pts[j]).norm(), 1e-9);
        }
    }
    EXPECT_GE(var1, var2);
}

TEST(Pca2, ProjectsHigherDimensionalData) {
    Rng rng(5);
    std::vector<Vector> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(random_vector(rng, 10));
    const auto e = pca2(pts);
    Point2 centroid = Point2::Zero();
    double var1 = 0.0;
    double var2 = 0.0;
    for (const auto& p : e.points) {
        centroid += p;
        var1 += p(0) * p(0);
        var2 += p(1) * p(1);
    }
    EXPECT_LT(centroid.norm(), 1e-9);
    EXPECT_GE(var1, var2);
    EXPECT_EQ(e.points.size(), pts.size());
}

TEST(Pca2, DegenerateInputs) {
    const std::vector<Vector> same(5, vec2(1.0, 2.0));
    EXPECT_THROW(pca2(same), DegenerateDataError);
    EXPECT_THROW(pca2({vec2(1.0, 2.0)}), DegenerateDataError);
}

TEST(Center, IdempotentAndDistancePreserving) {
    Rng rng(6);
    Embedding2D e;
    for (int i = 0; i < 20; ++i) e.points.emplace_back(5.0 + rng.normal(), -3.0 + rng.normal());
    const auto once = center(e);
    const auto twice = center(once);
    EXPECT_TRUE(once.centered);
    Point2 sum = Point2::Zero();
    for (std::size_t i = 0; i < e.points.size(); ++i) {
        sum += once.points[i];
        EXPECT_NEAR((once.points[i] - twice.points[i]).norm(), 0.0, 1e-12);
        for (std::size_t j = 0; j < e.points.size(); ++j) {
            EXPECT_NEAR((once.points[i] - once.points[j]).norm(), (e.points[i] - e.points[j]).norm(), 1e-12);
        }
    }
    EXPECT_LT(sum.norm() / 20.0, 1e-12);
}

std::vector<Vector> three_clusters(Rng& rng, std::vector<int>& labels) {
    std::vector<Vector> centers;
    for (int c = 0; c < 3; ++c) {
        Vector m = Vector::Zero(5);
        m(c) = 10.0 / std::numbers::sqrt2;  // pairwise centre distance 10
        centers.push_back(m);
    }
    std::vector<Vector> pts;
    labels.clear();
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < 10; ++i) {
            pts.push_back(centers[c] + random_vector(rng, 5, 0.01));
            labels.push_back(c);
        }
    }
    return pts;
}

TEST(Tsne, SeparatesWellSeparatedClusters) {
    Rng rng(7);
    std::vector<int> labels;
    const auto pts = three_clusters(rng, labels);
    const auto e = tsne(pts, 5.0, 1000, 3);
    ASSERT_EQ(e.points.size(), pts.size());
    int good = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::size_t best = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (j != i && (e.points[j] - e.points[i]).norm() < (e.points[best] - e.points[i]).norm()) best = j;
        }
        good += labels[best] == labels[i];
    }
    EXPECT_GE(good, 27);
}

TEST(Tsne, ObjectiveIsNonNegativeAndDecreasesAfterIteration300) {
    Rng rng(8);
    std::vector<Vector> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(random_vector(rng, 6));
    TsneConfig cfg;
    cfg.perplexity = 8.0;
    cfg.iterations = 1000;
    cfg.seed = 2;
    const auto r = run_tsne(pts, cfg);
    double at300 = -1.0;
    for (const auto& [it, kl] : r.objective) {
        EXPECT_GE(kl, 0.0);
        if (it == 300) at300 = kl;
    }
    ASSERT_GE(at300, 0.0);
    ASSERT_EQ(r.objective.back().first, 1000);
    EXPECT_LT(r.objective.back().second, at300);
    EXPECT_EQ(r.perplexity, 8.0);
}

TEST(Tsne, SameSeedSameEmbedding) {
    Rng rng(9);
    std::vector<Vector> pts;
    for (int i = 0; i < 25; ++i) pts.push_back(random_vector(rng, 4));
    const auto a = tsne(pts, 5.0, 200, 1);
    const auto b = tsne(pts, 5.0, 200, 1);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i], b.points[i]);
    EXPECT_FALSE(a.centered);
}

TEST(Tsne, InfeasiblePerplexityIsAConfigError) {
    std::vector<Vector> pts;
    for (int i = 0; i < 9; ++i) pts.push_back(vec2(i, i * i));
    EXPECT_THROW(tsne(pts, 3.0, 10, 0), ConfigError);
    EXPECT_EQ(default_perplexity(91), 30.0);
    EXPECT_EQ(default_perplexity(31), 10.0);
}

TEST(AnglePipeline, RawIndependentGaussiansConcentrateAtNinety) {
    // 500 neurons with d_n = 256: W1 of a model with embed 128, seq 2.
    ModelConfig c;
    c.vocab_size = 4;
    c.seq_len = 2;
    c.embed_dim = 128;
    c.hidden_dim = 500;
    c.editable_matrices = {MatrixId::W1};
    const auto layout = NeuronLayout::for_config(c);
    Rng rng(10);
    const auto old_tau = random_task_vectors(rng, layout, TaskVectorSource::Old);
    const auto new_tau = random_task_vectors(rng, layout, TaskVectorSource::New);
    const auto report = angle_pipeline(old_tau, new_tau, nullptr, AngleMethod::Raw, {});
    ASSERT_EQ(report.angles_deg.size(), 500u);
    EXPECT_GE(report.mean_angle(), 88.0);
    EXPECT_LE(report.mean_angle(), 92.0);
    EXPECT_LT(report.std_angle(), 6.0);
    int total = 0;
    for (const int h : report.histogram) total += h;
    EXPECT_EQ(total, 500);
    for (std::size_t i = 0; i < report.classes.size(); ++i) {
        EXPECT_EQ(report.classes[i], classify(report.angles_deg[i], 85.0, 95.0));
    }
}

TEST(AnglePipeline, RawParallelAndAntiparallel) {
    const auto layout = NeuronLayout::for_config(small_config());
    Rng rng(11);
    const auto tau = random_task_vectors(rng, layout, TaskVectorSource::Old);
    TaskVectorSet neg = tau;
    for (auto& v : neg.vectors) v = -v;
    const auto same = angle_pipeline(tau, tau, nullptr, AngleMethod::Raw, {});
    const auto opposite = angle_pipeline(tau, neg, nullptr, AngleMethod::Raw, {});
    for (std::size_t i = 0; i < layout.size(); ++i) {
        EXPECT_EQ(same.angles_deg[i], 0.0);
        EXPECT_EQ(opposite.angles_deg[i], 180.0);
    }
    EXPECT_EQ(same.counts().synergistic, static_cast<int>(layout.size()));
    EXPECT_EQ(opposite.counts().conflict, static_cast<int>(layout.size()));
}

TEST(AnglePipeline, ZeroVectorsAreFlaggedOrthogonal) {
    const auto layout = NeuronLayout::for_config(small_config());
    Rng rng(12);
    auto tau = random_task_vectors(rng, layout, TaskVectorSource::Old);
    const auto other = random_task_vectors(rng, layout, TaskVectorSource::New);
    tau.vectors[2].setZero();
    const auto r = angle_pipeline(tau, other, nullptr, AngleMethod::Raw, {});
    EXPECT_EQ(r.degenerate[2], 1);
    EXPECT_EQ(r.angles_deg[2], 90.0);
    EXPECT_EQ(r.classes[2], EditClass::Orthogonal);
    EXPECT_EQ(r.degenerate[3], 0);
}

TEST(AnglePipeline, ReducedMethodsProduceConsistentReports) {
    // Enough neurons per group for the default perplexity.
    ModelConfig c;
    c.vocab_size = 24;
    c.seq_len = 2;
    c.embed_dim = 4;
    c.hidden_dim = 24;
    const auto layout = NeuronLayout::for_config(c);
    Rng rng(13);
    const auto old_tau = random_task_vectors(rng, layout, TaskVectorSource::Old);
    const auto new_tau = random_task_vectors(rng, layout, TaskVectorSource::New);
    TsneConfig tc;
    tc.iterations = 300;
    tc.seed = 4;
    for (const auto m : {AngleMethod::Pca, AngleMethod::Tsne}) {
        const auto r = angle_pipeline(old_tau, new_tau, nullptr, m, tc);
        ASSERT_EQ(r.angles_deg.size(), layout.size());
        for (std::size_t i = 0; i < layout.size(); ++i) {
            ASSERT_GE(r.angles_deg[i], 0.0);
            ASSERT_LE(r.angles_deg[i], 180.0);
            EXPECT_EQ(r.classes[i], classify(r.angles_deg[i], 85.0, 95.0));
        }
        const auto again = angle_pipeline(old_tau, new_tau, nullptr, m, tc);
        EXPECT_EQ(r.angles_deg, again.angles_deg);
    }
    EXPECT_THROW(angle_pipeline(old_tau, new_tau, nullptr, AngleMethod::AeTsne, tc), ConfigError);
}

TEST(AnglePipeline, LayoutMismatchIsRejected) {
    Rng rng(14);
    const auto a = random_task_vectors(rng, NeuronLayout::for_config(small_config()), TaskVectorSource::Old);
    const auto b = random_task_vectors(rng, NeuronLayout::for_config(small_config(6, 2, 3, 5)), TaskVectorSource::New);
    EXPECT_ANY_THROW(angle_pipeline(a, b, nullptr, AngleMethod::Raw, {}));
}

}  // namespace
}  // namespace geoedit
