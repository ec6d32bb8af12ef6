#include "geoedit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "geoedit/autoencoder.hpp"
#include "geoedit/error.hpp"
#include "geoedit/random.hpp"

namespace geoedit {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kMinNorm = 1e-12;

Matrix stack_rows(const std::vector<Vector>& inputs) {
    const auto d = inputs.front().size();
    Matrix x(static_cast<Eigen::Index>(inputs.size()), d);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].size() != d) throw ShapeError("inputs do not share one dimension");
        x.row(static_cast<Eigen::Index>(i)) = inputs[i].transpose();
    }
    return x;
}

// Row i of P: Gaussian affinities with bandwidth chosen so that the entropy
// matches log(perplexity).
void calibrate_row(const Matrix& sq_dist, Eigen::Index i, double target_entropy, Matrix& p) {
    const Eigen::Index n = sq_dist.rows();
    double beta = 1.0;
    double beta_lo = -std::numeric_limits<double>::infinity();
    double beta_hi = std::numeric_limits<double>::infinity();
    Vector row(n);
    for (int step = 0; step < 50; ++step) {
        // Shift by the nearest distance so exp() cannot underflow to all zeros.
        double d_min = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) d_min = std::min(d_min, sq_dist(i, j));
        }
        double sum = 0.0;
        double weighted = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            row(j) = j == i ? 0.0 : std::exp(-beta * (sq_dist(i, j) - d_min));
            sum += row(j);
            weighted += row(j) * (sq_dist(i, j) - d_min);
        }
        const double entropy = std::log(sum) + beta * weighted / sum;
        row /= sum;
        const double diff = entropy - target_entropy;
        if (std::abs(diff) < 1e-5) break;
        if (diff > 0.0) {
            beta_lo = beta;
            beta = std::isinf(beta_hi) ? beta * 2.0 : (beta + beta_hi) / 2.0;
        } else {
            beta_hi = beta;
            beta = std::isinf(beta_lo) ? beta / 2.0 : (beta + beta_lo) / 2.0;
        }
    }
    p.row(i) = row.transpose();
}

// num_ij = 1 / (1 + |y_i - y_j|^2) off the diagonal, 0 on it; returns the sum.
double student_kernel(const Matrix& y, Matrix& num) {
    const Eigen::Index n = y.rows();
    for (Eigen::Index j = 0; j < n; ++j) {
        num.col(j) =
            ((y.col(0).array() - y(j, 0)).square() + (y.col(1).array() - y(j, 1)).square() + 1.0).inverse().matrix();
        num(j, j) = 0.0;
    }
    return num.sum();
}

double tsne_objective(const Matrix& p, const Matrix& num, double num_sum) {
    double kl = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            if (i == j) continue;
            const double q = std::max(num(i, j) / num_sum, 1e-12);
            kl += p(i, j) * std::log(p(i, j) / q);
        }
    }
    return kl;
}

}  // namespace

double default_perplexity(std::size_t n) {
    return std::min(30.0, (static_cast<double>(n) - 1.0) / 3.0);
}

TsneResult run_tsne(const std::vector<Vector>& inputs, const TsneConfig& config) {
    const auto n = static_cast<Eigen::Index>(inputs.size());
    if (n < 2) throw ConfigError("tsne: need at least two points");
    const double perplexity = config.perplexity > 0.0 ? config.perplexity : default_perplexity(inputs.size());
    if (!(perplexity > 0.0) || 3.0 * perplexity >= static_cast<double>(n)) {
        throw ConfigError("tsne: perplexity " + std::to_string(perplexity) + " infeasible for " +
                          std::to_string(n) + " points (need 3 * perplexity < n)");
    }
    if (config.iterations < 1) throw ConfigError("tsne: iterations must be positive");

    // Normalise the data (centre, divide by max |entry|) so the bandwidth
    // search starts at a sensible scale.
    Matrix x = stack_rows(inputs);
    x.rowwise() -= x.colwise().mean();
    const double max_abs = x.cwiseAbs().maxCoeff();
    if (max_abs > 0.0) x /= max_abs;

    const Vector sq_norm = x.rowwise().squaredNorm();
    Matrix sq_dist = (-2.0 * x * x.transpose()).colwise() + sq_norm;
    sq_dist.rowwise() += sq_norm.transpose();
    sq_dist = sq_dist.cwiseMax(0.0);

    Matrix p = Matrix::Zero(n, n);
    const double target_entropy = std::log(perplexity);
    for (Eigen::Index i = 0; i < n; ++i) calibrate_row(sq_dist, i, target_entropy, p);
    p = (p + p.transpose()).eval();
    p /= p.sum();
    p = p.cwiseMax(1e-12);
    p.diagonal().setZero();

    // Deterministic start: leading principal components scaled to std 1e-4.
    Matrix y(n, 2);
    bool pca_ok = true;
    try {
        const Embedding2D init = pca2(inputs);
        for (Eigen::Index i = 0; i < n; ++i) y.row(i) = init.points[static_cast<std::size_t>(i)].transpose();
    } catch (const DegenerateDataError&) {
        pca_ok = false;
    }
    double sd = 0.0;
    if (pca_ok) {
        const double mean0 = y.col(0).mean();
        sd = std::sqrt((y.col(0).array() - mean0).square().sum() / static_cast<double>(n));
    }
    if (!pca_ok || !(sd > 0.0)) {
        Rng rng(config.seed);
        for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
        sd = std::sqrt(y.col(0).squaredNorm() / static_cast<double>(n));
    }
    y *= 1e-4 / sd;

    const double lr = config.learning_rate > 0.0 ? config.learning_rate
                                                 : std::max(50.0, static_cast<double>(n) / 12.0);
    Matrix update = Matrix::Zero(n, 2);
    Matrix gains = Matrix::Ones(n, 2);
    Matrix num(n, n);
    Matrix grad(n, 2);
    TsneResult result;
    result.perplexity = perplexity;

    for (int iter = 0; iter < config.iterations; ++iter) {
        const bool exaggerating = iter < config.exaggeration_iters;
        const double exaggeration = exaggerating ? config.exaggeration : 1.0;
        const double momentum = iter < config.momentum_switch_iter ? config.initial_momentum : config.final_momentum;

        const double num_sum = student_kernel(y, num);
        // w_ij = (exaggeration * p_ij - q_ij) * num_ij; the diagonal is zero
        // because both p and num vanish there.
        const Matrix w =
            ((exaggeration * p.array() - (num.array() * (1.0 / num_sum)).max(1e-12)) * num.array()).matrix();
        // Two matrix-vector products; a 2-column gemm spends most of its time packing.
        const Vector w_sum = w.rowwise().sum();
        for (Eigen::Index k = 0; k < 2; ++k) {
            grad.col(k).noalias() = w * y.col(k);
            grad.col(k) = 4.0 * (w_sum.cwiseProduct(y.col(k)) - grad.col(k));
        }

        for (Eigen::Index k = 0; k < grad.size(); ++k) {
            double& g = gains.data()[k];
            const bool same_sign = (grad.data()[k] > 0.0) == (update.data()[k] > 0.0);
            g = same_sign ? g * 0.8 : g + 0.2;
            g = std::max(g, 0.01);
            update.data()[k] = momentum * update.data()[k] - lr * g * grad.data()[k];
        }
        y += update;

        const int done = iter + 1;
        if (done % std::max(1, config.objective_every) == 0 || done == config.iterations) {
            // Recompute Q at the updated positions for the recorded value.
            const double s = student_kernel(y, num);
            result.objective.emplace_back(done, tsne_objective(p, num, s));
        }
    }

    if (!y.allFinite()) throw DivergenceError("tsne: embedding became non-finite", config.iterations);
    result.embedding.points.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) result.embedding.points.emplace_back(y(i, 0), y(i, 1));
    return result;
}

Embedding2D tsne(const std::vector<Vector>& inputs, double perplexity, int iterations, std::uint64_t seed) {
    TsneConfig config;
    config.perplexity = perplexity;
    config.iterations = iterations;
    config.seed = seed;
    config.objective_every = std::max(1, iterations);
    return run_tsne(inputs, config).embedding;
}

Embedding2D pca2(const std::vector<Vector>& inputs) {
    if (inputs.size() < 2) throw DegenerateDataError("pca2: need at least two points");
    Matrix x = stack_rows(inputs);
    x.rowwise() -= x.colwise().mean();
    if (x.cwiseAbs().maxCoeff() == 0.0) throw DegenerateDataError("pca2: all points are identical");

    const Matrix cov = x.transpose() * x / static_cast<double>(inputs.size() - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success) throw DegenerateDataError("pca2: eigen decomposition failed");
    const Eigen::Index d = cov.rows();

    Matrix components = Matrix::Zero(d, 2);
    for (int k = 0; k < 2 && k < d; ++k) {
        Vector c = eig.eigenvectors().col(d - 1 - k);
        Eigen::Index arg = 0;
        c.cwiseAbs().maxCoeff(&arg);
        if (c(arg) < 0.0) c = -c;
        components.col(k) = c;
    }
    const Matrix proj = x * components;

    Embedding2D out;
    out.centered = true;
    out.points.reserve(inputs.size());
    for (Eigen::Index i = 0; i < proj.rows(); ++i) out.points.emplace_back(proj(i, 0), proj(i, 1));
    return out;
}

Embedding2D center(Embedding2D embedding) {
    if (embedding.points.empty()) {
        embedding.centered = true;
        return embedding;
    }
    Point2 centroid = Point2::Zero();
    for (const auto& p : embedding.points) centroid += p;
    centroid /= static_cast<double>(embedding.points.size());
    for (auto& p : embedding.points) p -= centroid;
    embedding.centered = true;
    return embedding;
}

double angle_deg(const Point2& u, const Point2& v) {
    if (u.norm() <= kMinNorm || v.norm() <= kMinNorm) throw DegenerateAngleError("angle_deg: near-zero vector");
    const double cross = u.x() * v.y() - u.y() * v.x();
    return std::atan2(std::abs(cross), u.dot(v)) * kRadToDeg;
}

double angle_deg(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw ShapeError("angle_deg: dimension mismatch");
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu <= kMinNorm || nv <= kMinNorm) throw DegenerateAngleError("angle_deg: near-zero vector");
    // 2 * atan2(| |v|u - |u|v |, | |v|u + |u|v |) is arccos of the cosine
    // without its loss of precision near 0 and 180 degrees.
    const Vector a = nv * u;
    const Vector b = nu * v;
    return 2.0 * std::atan2((a - b).norm(), (a + b).norm()) * kRadToDeg;
}

std::string_view to_string(EditClass c) {
    switch (c) {
        case EditClass::Synergistic: return "synergistic";
        case EditClass::Orthogonal: return "orthogonal";
        case EditClass::Conflict: return "conflict";
    }
    return "orthogonal";
}

EditClass edit_class_from_string(std::string_view name) {
    if (name == "synergistic") return EditClass::Synergistic;
    if (name == "orthogonal") return EditClass::Orthogonal;
    if (name == "conflict") return EditClass::Conflict;
    throw InputError("unknown edit class '" + std::string(name) + "'");
}

EditClass classify(double phi_deg, double phi1_deg, double phi2_deg) {
    if (!(0.0 <= phi1_deg && phi1_deg <= phi2_deg && phi2_deg <= 180.0)) {
        throw ConfigError("classify: thresholds must satisfy 0 <= phi1 <= phi2 <= 180");
    }
    if (!(phi_deg >= 0.0 && phi_deg <= 180.0)) throw InputError("classify: angle outside [0, 180]");
    if (phi_deg == 0.0) return EditClass::Synergistic;
    if (phi_deg == 180.0) return EditClass::Conflict;
    if (phi_deg < phi1_deg) return EditClass::Synergistic;
    if (phi_deg <= phi2_deg) return EditClass::Orthogonal;
    return EditClass::Conflict;
}

std::string_view to_string(AngleMethod m) {
    switch (m) {
        case AngleMethod::Raw: return "raw";
        case AngleMethod::Pca: return "pca";
        case AngleMethod::Tsne: return "tsne";
        case AngleMethod::AeTsne: return "ae-tsne";
    }
    return "raw";
}

AngleMethod angle_method_from_string(std::string_view name) {
    if (name == "raw") return AngleMethod::Raw;
    if (name == "pca") return AngleMethod::Pca;
    if (name == "tsne") return AngleMethod::Tsne;
    if (name == "ae-tsne" || name == "ae_tsne") return AngleMethod::AeTsne;
    throw ConfigError("unknown angle method '" + std::string(name) + "' (raw|pca|tsne|ae-tsne)");
}

ClassCounts AngleReport::counts() const {
    ClassCounts c;
    for (const auto k : classes) {
        if (k == EditClass::Synergistic) ++c.synergistic;
        else if (k == EditClass::Orthogonal) ++c.orthogonal;
        else ++c.conflict;
    }
    return c;
}

double AngleReport::mean_angle() const {
    if (angles_deg.empty()) return 0.0;
    double s = 0.0;
    for (const double a : angles_deg) s += a;
    return s / static_cast<double>(angles_deg.size());
}

double AngleReport::std_angle() const {
    if (angles_deg.empty()) return 0.0;
    const double m = mean_angle();
    double s = 0.0;
    for (const double a : angles_deg) s += (a - m) * (a - m);
    return std::sqrt(s / static_cast<double>(angles_deg.size()));
}

std::array<int, 18> angle_histogram(const std::vector<double>& angles_deg) {
    std::array<int, 18> h{};
    for (const double a : angles_deg) {
        const int bin = std::clamp(static_cast<int>(std::floor(a / 10.0)), 0, 17);
        ++h[static_cast<std::size_t>(bin)];
    }
    return h;
}

AngleReport angle_pipeline(const TaskVectorSet& tau_old, const TaskVectorSet& tau_new, const AEBank* ae,
                           AngleMethod method, const TsneConfig& tsne_config, double phi1, double phi2) {
    if (!(tau_old.layout == tau_new.layout)) throw ShapeError("angle_pipeline: task vector layouts differ");
    tau_old.validate();
    tau_new.validate();
    if (method == AngleMethod::AeTsne && ae == nullptr) {
        throw ConfigError("angle_pipeline: method ae-tsne requires a trained auto-encoder");
    }
    // Validates the thresholds once, up front.
    (void)classify(90.0, phi1, phi2);

    const std::size_t n = tau_old.size();
    AngleReport report;
    report.layout = tau_old.layout;
    report.phi1 = phi1;
    report.phi2 = phi2;
    report.angles_deg.assign(n, 90.0);
    report.classes.assign(n, EditClass::Orthogonal);
    report.degenerate.assign(n, 0);

    auto record = [&](std::size_t i, auto compute) {
        try {
            report.angles_deg[i] = compute();
            report.classes[i] = classify(report.angles_deg[i], phi1, phi2);
        } catch (const DegenerateAngleError&) {
            report.angles_deg[i] = 90.0;
            report.classes[i] = EditClass::Orthogonal;
            report.degenerate[i] = 1;
        }
    };

    if (method == AngleMethod::Raw) {
        for (std::size_t i = 0; i < n; ++i) {
            record(i, [&] { return angle_deg(tau_old.vectors[i], tau_new.vectors[i]); });
        }
    } else {
        std::vector<int> dims;
        for (const auto& e : tau_old.layout.entries) {
            if (std::find(dims.begin(), dims.end(), e.dim) == dims.end()) dims.push_back(e.dim);
        }
        for (const int d : dims) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i) {
                if (tau_old.layout[i].dim == d) members.push_back(i);
            }
            // Rows 0..m-1 are old vectors, rows m..2m-1 the matching new ones.
            std::vector<Vector> joint;
            joint.reserve(2 * members.size());
            for (const TaskVectorSet* set : {&tau_old, &tau_new}) {
                for (const std::size_t i : members) {
                    joint.push_back(method == AngleMethod::AeTsne ? encode(ae->for_dim(d), set->vectors[i])
                                                                  : set->vectors[i]);
                }
            }
            Embedding2D emb;
            if (method == AngleMethod::Pca) {
                try {
                    emb = pca2(joint);
                } catch (const DegenerateDataError&) {
                    for (const std::size_t i : members) report.degenerate[i] = 1;
                    continue;
                }
            } else {
                TsneConfig cfg = tsne_config;
                cfg.seed = derive_seed(tsne_config.seed, "d_n=" + std::to_string(d));
                emb = center(run_tsne(joint, cfg).embedding);
            }
            const std::size_t m = members.size();
            for (std::size_t k = 0; k < m; ++k) {
                record(members[k], [&] { return angle_deg(emb.points[k], emb.points[m + k]); });
            }
        }
    }
    report.histogram = angle_histogram(report.angles_deg);
    return report;
}

}  // namespace geoedit
