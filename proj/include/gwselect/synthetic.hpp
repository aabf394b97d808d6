#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "gwselect/embed_io.hpp"
#include "gwselect/error.hpp"
#include "gwselect/mmspace.hpp"
#include "gwselect/rng.hpp"

namespace gwselect::synthetic {

inline Matrix gaussian(SplitMix64& rng, std::size_t rows, std::size_t cols) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
    return m;
}

// Haar-ish random orthogonal matrix from the QR factor of a Gaussian matrix,
// with column signs fixed by diag(R).
inline Matrix random_orthogonal(SplitMix64& rng, std::size_t d) {
    const Eigen::MatrixXd g = gaussian(rng, d, d);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < q.cols(); ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

inline std::vector<std::string> make_ids(std::size_t n) {
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids.push_back("pair" + std::to_string(i));
    return ids;
}

inline EmbeddingSet to_set(const Matrix& m, Modality modality, std::string source) {
    EmbeddingSet s;
    s.ids = make_ids(static_cast<std::size_t>(m.rows()));
    s.modality = modality;
    s.data = m.cast<float>();
    s.source = std::move(source);
    return s;
}

struct Pool {
    EmbeddingSet text;
    std::vector<EmbeddingSet> encoders;  // encoders[k] carries noise sigmas[k]
    std::vector<double> sigmas;
};

// Encoder k sees the text geometry through an isometric embedding into
// `vision_dim` dimensions plus i.i.d. Gaussian noise of scale sigmas[k], so
// structural similarity degrades monotonically with sigma.
inline Pool monotone_pool(std::size_t n, std::size_t text_dim, std::size_t vision_dim, const std::vector<double>& sigmas,
                          std::uint64_t seed) {
    if (vision_dim < text_dim) throw Error(ErrorKind::parameter, "vision_dim must be >= text_dim");
    SplitMix64 rng(seed);
    Pool pool;
    pool.sigmas = sigmas;
    const Matrix text = gaussian(rng, n, text_dim);
    pool.text = to_set(text, Modality::text, "synthetic-llm");
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
        const Matrix q = random_orthogonal(rng, vision_dim);
        const Matrix lifted = text * q.topRows(static_cast<Eigen::Index>(text_dim));
        const Matrix noisy = lifted + sigmas[k] * gaussian(rng, n, vision_dim);
        pool.encoders.push_back(to_set(noisy, Modality::vision, "synthetic-encoder-" + std::to_string(k)));
    }
    return pool;
}

}  // namespace gwselect::synthetic
