#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gwselect/embed_io.hpp"
#include "gwselect/error.hpp"
#include "gwselect/parallel.hpp"

namespace gwselect {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Pairwise distances over one sample set: a realized metric-measure space with
// uniform weights. Symmetric, zero diagonal, finite and nonnegative.
struct DistanceMatrix {
    Matrix values;
    std::string label;

    std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
    double operator()(std::size_t i, std::size_t j) const {
        return values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
};

struct ScaleMatchResult {
    double scale = 1.0;
    DistanceMatrix scaled;
    double target_median = 0.0;
    double source_median = 0.0;
};

namespace detail {

// Fixed summation order (four interleaved partial sums), independent of
// address alignment, so dot(u, u) and dot(u, u') agree bitwise when u == u'.
inline double dot(const double* a, const double* b, std::size_t d) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t k = 0;
    for (; k + 4 <= d; k += 4) {
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    for (; k < d; ++k) s0 += a[k] * b[k];
    return (s0 + s1) + (s2 + s3);
}

// cos = <u,v> / sqrt(|u|^2 |v|^2). For u == v the quotient is exactly 1, so
// duplicated points sit at distance 0.
inline double angle_from_dots(double uv, double uu, double vv) {
    const double c = std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
    return std::acos(c);
}

}  // namespace detail

template <typename A, typename B>
double angular_distance(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) {
    if (u.size() != v.size()) {
        throw Error(ErrorKind::shape, "dimension mismatch " + std::to_string(u.size()) + " vs " +
                                          std::to_string(v.size()));
    }
    if (!u.allFinite() || !v.allFinite()) throw Error(ErrorKind::input, "non-finite vector entry");
    const Eigen::VectorXd uc = u.template cast<double>().reshaped();
    const Eigen::VectorXd vc = v.template cast<double>().reshaped();
    const auto d = static_cast<std::size_t>(uc.size());
    const double uu = detail::dot(uc.data(), uc.data(), d);
    const double vv = detail::dot(vc.data(), vc.data(), d);
    if (uu == 0.0 || vv == 0.0) throw Error(ErrorKind::degenerate, "zero-norm vector has no direction");
    return detail::angle_from_dots(detail::dot(uc.data(), vc.data(), d), uu, vv);
}

// Angular distances between the rows of `points`.
inline DistanceMatrix pairwise_distances(const Matrix& points, std::string label = {}) {
    const auto n = static_cast<std::size_t>(points.rows());
    const auto d = static_cast<std::size_t>(points.cols());
    auto row_ptr = [&](std::size_t i) { return points.data() + i * d; };
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!points.row(static_cast<Eigen::Index>(i)).allFinite()) {
            throw Error(ErrorKind::input, "row " + std::to_string(i) + ": non-finite entry");
        }
        sq[i] = detail::dot(row_ptr(i), row_ptr(i), d);
        if (sq[i] == 0.0) throw Error(ErrorKind::degenerate, "row " + std::to_string(i) + ": zero-norm vector");
    }
    DistanceMatrix out{Matrix::Zero(points.rows(), points.rows()), std::move(label)};
    parallel_for(0, n, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                detail::angle_from_dots(detail::dot(row_ptr(i), row_ptr(j), d), sq[i], sq[j]);
        }
    });
    for (Eigen::Index i = 0; i < points.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j) out.values(i, j) = out.values(j, i);
    return out;
}

inline DistanceMatrix pairwise_distances(const EmbeddingSet& set) {
    return pairwise_distances(Matrix(set.data.cast<double>()), set.source);
}

// Median of the strict upper triangle; even counts average the two middle
// order statistics.
inline double offdiag_median(const DistanceMatrix& m) {
    const auto n = m.size();
    if (n < 2) throw Error(ErrorKind::size, "median needs at least a 2x2 matrix");
    std::vector<double> vals;
    vals.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) vals.push_back(m(i, j));
    const std::size_t mid = vals.size() / 2;
    std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
    const double upper = vals[mid];
    if (vals.size() % 2 == 1) return upper;
    const double lower = *std::max_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

// Rescales `source` so its off-diagonal median equals that of `target`.
// The pipeline always scales vision toward text.
inline ScaleMatchResult median_scale_match(const DistanceMatrix& source, const DistanceMatrix& target) {
    ScaleMatchResult r;
    r.source_median = offdiag_median(source);
    r.target_median = offdiag_median(target);
    if (!(r.source_median > 0.0)) {
        throw Error(ErrorKind::degenerate, "source off-diagonal median is zero (points coincide in angle)");
    }
    if (!(r.target_median > 0.0)) {
        throw Error(ErrorKind::degenerate, "target off-diagonal median is zero (points coincide in angle)");
    }
    r.scale = r.target_median / r.source_median;
    r.scaled.values = r.scale * source.values;
    r.scaled.values.diagonal().setZero();
    r.scaled.label = source.label;
    return r;
}

// "DST1" debug dump: magic, version u32 = 1, n u32, n*n binary64 row-major.
inline void write_dst1(const Matrix& m, const std::filesystem::path& path) {
    if (m.rows() != m.cols()) throw Error(ErrorKind::shape, "DST1 holds square matrices only");
    std::string out = "DST1";
    detail::put_u32(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put_f64(out, m(i, j));
    detail::dump(path, out);
}

inline Matrix read_dst1(const std::filesystem::path& path) {
    const std::string bytes = detail::slurp(path);
    if (bytes.size() < 4 || bytes.compare(0, 4, "DST1") != 0) {
        throw Error(ErrorKind::format, path.string() + ": bad magic (expected DST1)");
    }
    const std::string body = bytes.substr(4);
    detail::ByteReader r(body, path.string());
    if (const auto v = r.u32("version"); v != 1) {
        throw Error(ErrorKind::format, path.string() + ": unsupported version " + std::to_string(v));
    }
    const auto n = r.u32("n");
    if (r.remaining() != std::uint64_t(n) * n * 8) throw Error(ErrorKind::format, path.string() + ": payload size mismatch");
    Matrix m(n, n);
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t j = 0; j < n; ++j) m(i, j) = r.f64("payload");
    return m;
}

}  // namespace gwselect
