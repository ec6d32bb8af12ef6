#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geoedit/taskvec.hpp"

namespace geoedit {

struct AEBank;

using Point2 = Eigen::Vector2d;

struct Embedding2D {
    std::vector<Point2> points;
    bool centered = false;
};

struct TsneConfig {
    /// <= 0 selects min(30, (n - 1) / 3).
    double perplexity = 0.0;
    int iterations = 1000;
    std::uint64_t seed = 0;
    double exaggeration = 12.0;
    int exaggeration_iters = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
    /// <= 0 selects max(50, n / 12).
    double learning_rate = 0.0;
    /// The objective KL(P || Q) is recorded every this many iterations and
    /// at the final one.
    int objective_every = 50;
};

struct TsneResult {
    Embedding2D embedding;
    /// (iteration, KL(P || Q)), iterations counted from 1.
    std::vector<std::pair<int, double>> objective;
    double perplexity = 0.0;
};

double default_perplexity(std::size_t n);

/// Exact O(n^2) t-SNE to two dimensions. The output is not centred.
/// Throws ConfigError when 3 * perplexity >= n.
TsneResult run_tsne(const std::vector<Vector>& inputs, const TsneConfig& config);

Embedding2D tsne(const std::vector<Vector>& inputs, double perplexity, int iterations, std::uint64_t seed);

/// Projection on the top two principal components of the centred data,
/// each component signed so that its largest-magnitude loading is positive.
/// Throws DegenerateDataError for fewer than two points or zero spread.
Embedding2D pca2(const std::vector<Vector>& inputs);

/// Subtracts the centroid of all points.
Embedding2D center(Embedding2D embedding);

/// Angle between two vectors in degrees, in [0, 180]. Numerically this is
/// arccos(u.v / |u||v|) evaluated through atan2 so that nearly parallel
/// vectors keep full precision. Throws DegenerateAngleError if either norm
/// is <= 1e-12.
double angle_deg(const Point2& u, const Point2& v);
double angle_deg(const Vector& u, const Vector& v);

enum class EditClass { Synergistic, Orthogonal, Conflict };

std::string_view to_string(EditClass c);
EditClass edit_class_from_string(std::string_view name);

/// Orthogonal on [phi1, phi2], synergistic below, conflict above; exactly
/// 0 is synergistic and exactly 180 is conflict. Requires
/// 0 <= phi1 <= phi2 <= 180.
EditClass classify(double phi_deg, double phi1_deg, double phi2_deg);

enum class AngleMethod { Raw, Pca, Tsne, AeTsne };

std::string_view to_string(AngleMethod m);
AngleMethod angle_method_from_string(std::string_view name);

struct ClassCounts {
    int synergistic = 0;
    int orthogonal = 0;
    int conflict = 0;

    int total() const { return synergistic + orthogonal + conflict; }
    bool operator==(const ClassCounts&) const = default;
};

struct AngleReport {
    NeuronLayout layout;
    std::vector<double> angles_deg;
    std::vector<EditClass> classes;
    /// Neurons whose reduced old/new vectors were too short for an angle;
    /// they are reported at 90 degrees and classed orthogonal.
    std::vector<std::uint8_t> degenerate;
    double phi1 = 85.0;
    double phi2 = 95.0;
    std::array<int, 18> histogram{};

    ClassCounts counts() const;
    double mean_angle() const;
    double std_angle() const;
};

std::array<int, 18> angle_histogram(const std::vector<double>& angles_deg);

/// raw:     angles in the original d_n-dimensional space
/// pca:     joint 2D PCA of all old and new vectors
/// tsne:    joint t-SNE of all old and new vectors, then centring
/// ae_tsne: encode with the auto-encoder, then as tsne
/// Reduction is done separately for every group of neurons sharing a d_n.
AngleReport angle_pipeline(const TaskVectorSet& tau_old, const TaskVectorSet& tau_new, const AEBank* ae,
                           AngleMethod method, const TsneConfig& tsne_config, double phi1 = 85.0,
                           double phi2 = 95.0);

}  // namespace geoedit
