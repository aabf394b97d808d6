#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gwselect/embed_io.hpp"
#include "gwselect/error.hpp"
#include "gwselect/mmspace.hpp"
#include "gwselect/parallel.hpp"

namespace gwselect {

enum class MetricKind { gw, rsa, cca, mutual_nn, accuracy_external };
enum class Direction { lower_better, higher_better };

inline const char* to_string(MetricKind m) {
    switch (m) {
        case MetricKind::gw: return "gw";
        case MetricKind::rsa: return "rsa";
        case MetricKind::cca: return "cca";
        case MetricKind::mutual_nn: return "mutualnn";
        case MetricKind::accuracy_external: return "accuracy";
    }
    return "?";
}

inline const char* to_string(Direction d) { return d == Direction::lower_better ? "lower_better" : "higher_better"; }

inline Direction direction_of(MetricKind m) {
    return m == MetricKind::gw ? Direction::lower_better : Direction::higher_better;
}

inline MetricKind parse_metric(const std::string& name) {
    if (name == "gw") return MetricKind::gw;
    if (name == "rsa") return MetricKind::rsa;
    if (name == "cca") return MetricKind::cca;
    if (name == "mutualnn" || name == "mutual_nn") return MetricKind::mutual_nn;
    if (name == "accuracy" || name == "accuracy_external") return MetricKind::accuracy_external;
    throw Error(ErrorKind::parameter, "unknown metric '" + name + "'");
}

struct MetricScore {
    MetricKind metric = MetricKind::gw;
    double value = 0.0;
    Direction direction = Direction::lower_better;
};

// Product-moment correlation, two-pass. Both inputs must vary.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error(ErrorKind::shape, "pearson inputs differ in length");
    if (x.size() < 3) throw Error(ErrorKind::size, "pearson needs at least 3 points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::degenerate, "pearson input has zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace detail {

inline std::vector<double> upper_triangle(const Matrix& m) {
    std::vector<double> out;
    const auto n = m.rows();
    out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) out.push_back(m(i, j));
    return out;
}

inline Matrix cosine_similarity(const Matrix& x) {
    Eigen::VectorXd inv(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double norm = x.row(i).norm();
        if (norm == 0.0) throw Error(ErrorKind::degenerate, "row " + std::to_string(i) + ": zero-norm vector");
        inv(i) = 1.0 / norm;
    }
    const Matrix unit = inv.asDiagonal() * x;
    return unit * unit.transpose();
}

inline void check_pair_shapes(const Matrix& vision, const Matrix& text) {
    if (vision.rows() != text.rows()) {
        throw Error(ErrorKind::pairing, "vision has " + std::to_string(vision.rows()) + " samples, text has " +
                                            std::to_string(text.rows()));
    }
}

}  // namespace detail

// Pearson correlation between the flattened strict upper triangles of the
// within-modality cosine similarity matrices.
inline MetricScore rsa_score(const Matrix& vision, const Matrix& text) {
    detail::check_pair_shapes(vision, text);
    if (vision.rows() < 3) throw Error(ErrorKind::size, "RSA needs at least 3 samples");
    const auto sv = detail::upper_triangle(detail::cosine_similarity(vision));
    const auto st = detail::upper_triangle(detail::cosine_similarity(text));
    return {MetricKind::rsa, pearson(sv, st), Direction::higher_better};
}

constexpr double kCcaRidge = 1e-6;

// Canonical correlations, descending. Covariances get a ridge of
// kCcaRidge * trace / d on the diagonal before whitening by the symmetric
// inverse square root; the singular values of the whitened cross-covariance
// are the correlations.
inline std::vector<double> canonical_correlations(const Matrix& vision, const Matrix& text) {
    detail::check_pair_shapes(vision, text);
    const auto n = vision.rows();
    if (n < 2) throw Error(ErrorKind::size, "CCA needs at least 2 samples");
    const Eigen::MatrixXd x = vision.rowwise() - vision.colwise().mean();
    const Eigen::MatrixXd y = text.rowwise() - text.colwise().mean();
    const double denom = static_cast<double>(n - 1);

    auto inv_sqrt = [](Eigen::MatrixXd cov) {
        const double ridge = kCcaRidge * cov.trace() / static_cast<double>(cov.rows());
        cov.diagonal().array() += ridge;
        if (!cov.allFinite()) throw Error(ErrorKind::validation, "covariance has non-finite entries");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        const Eigen::VectorXd lambda = eig.eigenvalues();
        if (!(lambda.minCoeff() > 0.0)) throw Error(ErrorKind::degenerate, "covariance is singular (constant features)");
        return Eigen::MatrixXd(eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
                               eig.eigenvectors().transpose());
    };
    const Eigen::MatrixXd wx = inv_sqrt(x.transpose() * x / denom);
    const Eigen::MatrixXd wy = inv_sqrt(y.transpose() * y / denom);
    const Eigen::MatrixXd cross = wx * (x.transpose() * y / denom) * wy;
    if (!cross.allFinite()) throw Error(ErrorKind::validation, "cross-covariance has non-finite entries");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
    const Eigen::VectorXd s = svd.singularValues();
    return std::vector<double>(s.data(), s.data() + s.size());
}

// Mean of the top `components` canonical correlations, clamped to [0, 1].
// When either modality has fewer dimensions than `components`, all available
// correlations are averaged.
inline MetricScore cca_score(const Matrix& vision, const Matrix& text, std::size_t components = 10) {
    detail::check_pair_shapes(vision, text);
    if (components < 1) throw Error(ErrorKind::parameter, "CCA needs at least one component");
    if (static_cast<std::size_t>(vision.rows()) <= components) {
        throw Error(ErrorKind::rank, "CCA with " + std::to_string(components) + " components needs more than " +
                                         std::to_string(components) + " samples, got " +
                                         std::to_string(vision.rows()));
    }
    const auto corr = canonical_correlations(vision, text);
    const std::size_t k = std::min(components, corr.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += corr[i];
    return {MetricKind::cca, std::clamp(sum / static_cast<double>(k), 0.0, 1.0), Direction::higher_better};
}

// k nearest neighbours of every sample under angular distance, self
// excluded, ties broken by smaller index. Row i is sorted nearest first.
inline std::vector<std::vector<std::size_t>> angular_knn(const DistanceMatrix& dist, std::size_t k) {
    const auto n = dist.size();
    if (k >= n) throw Error(ErrorKind::parameter, "k = " + std::to_string(k) + " must be below n = " + std::to_string(n));
    std::vector<std::vector<std::size_t>> out(n);
    parallel_for(0, n, [&](std::size_t i) {
        std::vector<std::size_t> order;
        order.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) order.push_back(j);
        auto closer = [&](std::size_t l, std::size_t r) {
            const double dl = dist(i, l), dr = dist(i, r);
            return dl < dr || (dl == dr && l < r);
        };
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);
        order.resize(k);
        out[i] = std::move(order);
    });
    return out;
}

// Average fraction of shared k-nearest neighbours. Vision is the source
// modality; the intersection itself is symmetric.
inline MetricScore mutual_nn_score(const Matrix& vision, const Matrix& text, std::size_t k = 10) {
    detail::check_pair_shapes(vision, text);
    if (k < 1) throw Error(ErrorKind::parameter, "k must be >= 1");
    const auto n = static_cast<std::size_t>(vision.rows());
    if (k >= n) throw Error(ErrorKind::parameter, "k = " + std::to_string(k) + " must be below n = " + std::to_string(n));
    const auto nv = angular_knn(pairwise_distances(vision), k);
    const auto nt = angular_knn(pairwise_distances(text), k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto a = nv[i], b = nt[i];
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        std::vector<std::size_t> common;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
        total += static_cast<double>(common.size()) / static_cast<double>(k);
    }
    return {MetricKind::mutual_nn, total / static_cast<double>(n), Direction::higher_better};
}

inline MetricScore rsa_score(const EmbeddingSet& vision, const EmbeddingSet& text) {
    check_paired(vision, text);
    return rsa_score(Matrix(vision.data.cast<double>()), Matrix(text.data.cast<double>()));
}

inline MetricScore cca_score(const EmbeddingSet& vision, const EmbeddingSet& text, std::size_t components = 10) {
    check_paired(vision, text);
    return cca_score(Matrix(vision.data.cast<double>()), Matrix(text.data.cast<double>()), components);
}

inline MetricScore mutual_nn_score(const EmbeddingSet& vision, const EmbeddingSet& text, std::size_t k = 10) {
    check_paired(vision, text);
    return mutual_nn_score(Matrix(vision.data.cast<double>()), Matrix(text.data.cast<double>()), k);
}

}  // namespace gwselect
