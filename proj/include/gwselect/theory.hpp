#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "gwselect/error.hpp"
#include "gwselect/gw.hpp"
#include "gwselect/mmspace.hpp"
#include "gwselect/rng.hpp"

// Executable check of the Lipschitz bound L <= 1 + (2 rho* + GW_inf) / r for
// the optimal cross-modal map g*, on small constructed instances where g*,
// its errors and GW_inf are all known exactly.
namespace gwselect::theory {

enum class MapKind {
    random_linear,  // Gaussian matrix, then projection back to the sphere
    orthogonal,     // an isometry of the sphere; needs d_x == d_y
};

struct SynthParams {
    std::size_t n = 6;
    std::size_t d_x = 4;
    std::size_t d_y = 4;
    double noise = 0.0;  // bound on the angular error of y_i against g*(x_i)
    std::uint64_t seed = 0;
    MapKind map = MapKind::random_linear;
};

struct SynthInstance {
    Matrix x_points;
    Matrix y_points;
    Matrix gstar_images;
    double noise = 0.0;
};

struct LemmaCheck {
    bool holds = false;
    double min_slack = 0.0;  // min over pairs of (GW_inf + 2 rho*) - distortion
    double gw_inf = 0.0;
    double rho_star = 0.0;
    Permutation support;
};

struct TheoremCheckResult {
    double gw_inf = 0.0;
    double rho_star = 0.0;
    double r_min = 0.0;
    double lipschitz_empirical = 0.0;
    double bound = 0.0;
    bool holds = false;
};

constexpr double kBoundTolerance = 1e-9;

namespace detail {

inline Eigen::VectorXd gaussian_vector(SplitMix64& rng, std::size_t d) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(d));
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace detail

// Draw order is fixed (points, map, then per-point noise fraction and
// tangent), so instances sharing a seed differ only in the noise level.
inline SynthInstance synth_instance(const SynthParams& p) {
    if (p.n < 2 || p.n > 9) throw Error(ErrorKind::guard, "synthetic instances need 2 <= n <= 9");
    if (p.d_x < 2 || p.d_y < 2) throw Error(ErrorKind::guard, "synthetic instances need dimensions >= 2");
    if (!(p.noise >= 0.0) || p.noise >= std::numbers::pi / 2) throw Error(ErrorKind::guard, "noise must lie in [0, pi/2)");
    if (p.map == MapKind::orthogonal && p.d_x != p.d_y) throw Error(ErrorKind::guard, "an isometric map needs d_x == d_y");

    SplitMix64 rng(p.seed);
    const auto n = static_cast<Eigen::Index>(p.n);
    SynthInstance inst;
    inst.noise = p.noise;
    inst.x_points.resize(n, static_cast<Eigen::Index>(p.d_x));
    for (Eigen::Index i = 0; i < n; ++i) inst.x_points.row(i) = detail::gaussian_vector(rng, p.d_x).normalized();

    Eigen::MatrixXd map(static_cast<Eigen::Index>(p.d_y), static_cast<Eigen::Index>(p.d_x));
    for (Eigen::Index c = 0; c < map.cols(); ++c) map.col(c) = detail::gaussian_vector(rng, p.d_y);
    if (p.map == MapKind::orthogonal) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(map);
        Eigen::MatrixXd q = qr.householderQ();
        map = q;
    }

    inst.gstar_images.resize(n, static_cast<Eigen::Index>(p.d_y));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd img = map * inst.x_points.row(i).transpose();
        if (img.norm() < 1e-8) throw Error(ErrorKind::degenerate, "map sends a sample point to the origin");
        inst.gstar_images.row(i) = p.map == MapKind::orthogonal ? img : img.normalized();
    }

    inst.y_points = inst.gstar_images;
    for (Eigen::Index i = 0; i < n; ++i) {
        // The 1 - 1e-9 factor keeps the measured angle (after rounding) within the bound.
        const double theta = p.noise * rng.uniform() * (1.0 - 1e-9);
        const Eigen::VectorXd raw = detail::gaussian_vector(rng, p.d_y);
        if (theta == 0.0) continue;
        const Eigen::VectorXd g = inst.gstar_images.row(i).transpose().normalized();
        Eigen::VectorXd tangent = raw - raw.dot(g) * g;
        if (tangent.norm() < 1e-12) continue;
        tangent.normalize();
        inst.y_points.row(i) = (std::cos(theta) * g + std::sin(theta) * tangent).transpose();
    }
    return inst;
}

// Worst angular error of g* over the given correspondence pairs (i, j): g*(x_i)
// against y_j.
inline double rho_star(const SynthInstance& inst, const std::vector<std::pair<std::size_t, std::size_t>>& support) {
    if (support.empty()) throw Error(ErrorKind::input, "rho* needs a nonempty support");
    const auto n = static_cast<std::size_t>(inst.x_points.rows());
    double worst = 0.0;
    for (const auto& [i, j] : support) {
        if (i >= n || j >= n) throw Error(ErrorKind::input, "support pair out of range");
        worst = std::max(worst, angular_distance(inst.gstar_images.row(static_cast<Eigen::Index>(i)),
                                                 inst.y_points.row(static_cast<Eigen::Index>(j))));
    }
    return worst;
}

inline std::vector<std::pair<std::size_t, std::size_t>> support_of(const Permutation& p) {
    std::vector<std::pair<std::size_t, std::size_t>> s;
    for (std::size_t i = 0; i < p.size(); ++i) s.emplace_back(i, p.map[i]);
    return s;
}

// |d_Y(g*(x_i), g*(x_k)) - d_X(x_i, x_k)| <= GW_inf + 2 rho* for every pair,
// with rho* taken over the support of the optimal bottleneck coupling.
inline LemmaCheck verify_lemma1(const SynthInstance& inst) {
    const auto dx = pairwise_distances(inst.x_points);
    const auto dy = pairwise_distances(inst.y_points);
    const auto dg = pairwise_distances(inst.gstar_images);
    const auto bottleneck = gw_infinity(dx, dy);

    LemmaCheck out;
    out.gw_inf = bottleneck.value;
    out.support = bottleneck.permutation;
    out.rho_star = rho_star(inst, support_of(bottleneck.permutation));
    const double allowance = out.gw_inf + 2.0 * out.rho_star;
    out.min_slack = std::numeric_limits<double>::infinity();
    const auto n = dx.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = i + 1; k < n; ++k) {
            out.min_slack = std::min(out.min_slack, allowance - std::abs(dg(i, k) - dx(i, k)));
        }
    out.holds = out.min_slack >= -kBoundTolerance;
    return out;
}

inline TheoremCheckResult verify_theorem1(const SynthInstance& inst) {
    const auto dx = pairwise_distances(inst.x_points);
    const auto dy = pairwise_distances(inst.y_points);
    const auto dg = pairwise_distances(inst.gstar_images);
    const auto n = dx.size();

    TheoremCheckResult out;
    out.r_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = i + 1; k < n; ++k) out.r_min = std::min(out.r_min, dx(i, k));
    if (!(out.r_min > 0.0)) throw Error(ErrorKind::degenerate, "coincident sample points: minimum separation is zero");

    const auto bottleneck = gw_infinity(dx, dy);
    out.gw_inf = bottleneck.value;
    out.rho_star = rho_star(inst, support_of(bottleneck.permutation));
    out.lipschitz_empirical = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = i + 1; k < n; ++k)
            out.lipschitz_empirical = std::max(out.lipschitz_empirical, dg(i, k) / dx(i, k));
    out.bound = 1.0 + (2.0 * out.rho_star + out.gw_inf) / out.r_min;
    out.holds = out.lipschitz_empirical <= out.bound + kBoundTolerance;
    return out;
}

struct SweepEntry {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t d_x = 0;
    std::size_t d_y = 0;
    double noise = 0.0;
    TheoremCheckResult theorem;
    LemmaCheck lemma;
};

struct SweepParams {
    std::size_t instances = 200;
    std::uint64_t seed = 42;
    std::size_t min_n = 4;
    std::size_t max_n = 8;
    double max_noise = 0.3;
};

// Instance i uses seed + i; n, dimensions and noise are drawn from a stream
// seeded by the sweep seed.
inline std::vector<SweepEntry> run_sweep(const SweepParams& p) {
    if (p.min_n < 2 || p.max_n > 9 || p.min_n > p.max_n) throw Error(ErrorKind::guard, "sweep sizes must satisfy 2 <= min_n <= max_n <= 9");
    SplitMix64 draw(p.seed ^ 0x5DEECE66DULL);
    std::vector<SweepEntry> out;
    out.reserve(p.instances);
    for (std::size_t i = 0; i < p.instances; ++i) {
        SynthParams sp;
        sp.n = p.min_n + static_cast<std::size_t>(draw.bounded(p.max_n - p.min_n + 1));
        sp.d_x = 3 + static_cast<std::size_t>(draw.bounded(4));
        sp.d_y = 3 + static_cast<std::size_t>(draw.bounded(4));
        sp.noise = p.max_noise * draw.uniform();
        sp.seed = p.seed + i;
        const auto inst = synth_instance(sp);
        SweepEntry e;
        e.seed = sp.seed;
        e.n = sp.n;
        e.d_x = sp.d_x;
        e.d_y = sp.d_y;
        e.noise = sp.noise;
        e.theorem = verify_theorem1(inst);
        e.lemma = verify_lemma1(inst);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace gwselect::theory
