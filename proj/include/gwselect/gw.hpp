#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gwselect/error.hpp"
#include "gwselect/linear_ot.hpp"
#include "gwselect/mmspace.hpp"
#include "gwselect/parallel.hpp"
#include "gwselect/rng.hpp"

namespace gwselect {

enum class PenaltyKind { abs_l1, squared_l2 };

inline const char* to_string(PenaltyKind p) { return p == PenaltyKind::abs_l1 ? "l1" : "l2"; }

inline double penalty(PenaltyKind kind, double x, double y) {
    const double diff = x - y;
    return kind == PenaltyKind::abs_l1 ? std::abs(diff) : diff * diff;
}

struct GwConfig {
    std::size_t max_iters = 1000;
    double tolerance = 1e-9;  // relative objective decrease that counts as progress
    std::size_t restarts = 1;
    std::uint64_t seed = 0;
    PenaltyKind penalty = PenaltyKind::abs_l1;
    // Explicit vertex starts for restarts 1, 2, ...; restarts beyond these draw
    // random permutations from `seed`.
    std::vector<Permutation> warm_starts;
};

struct TraceEntry {
    std::size_t iteration = 0;
    double objective = 0.0;
    double step = 0.0;
};

struct GwSolveResult {
    double value = 0.0;
    Coupling coupling;
    std::vector<TraceEntry> trace;  // of the winning restart; entry 0 is the start point
    std::size_t iterations_run = 0;
    bool converged = false;
    std::size_t restart_index = 0;
    std::vector<std::vector<TraceEntry>> restart_traces;  // every restart, in order
};

struct LineSearchResult {
    double eta = 0.0;
    double objective = 0.0;
};

namespace detail {

struct SupportEntry {
    std::size_t row;
    std::size_t col;
    double mass;
};

inline std::vector<SupportEntry> support(const Coupling& pi) {
    std::vector<SupportEntry> out;
    const auto n = pi.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double w = pi.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (w != 0.0) out.push_back({i, j, w});
        }
    return out;
}

inline void check_shapes(const Coupling& pi, const DistanceMatrix& a, const DistanceMatrix& b) {
    const auto n = a.size();
    if (a.values.rows() != a.values.cols() || b.values.rows() != b.values.cols()) {
        throw Error(ErrorKind::shape, "distance matrices must be square");
    }
    if (b.size() != n || pi.weights.rows() != static_cast<Eigen::Index>(n) ||
        pi.weights.cols() != static_cast<Eigen::Index>(n)) {
        throw Error(ErrorKind::shape, "coupling " + std::to_string(pi.weights.rows()) + "x" +
                                          std::to_string(pi.weights.cols()) + " does not match spaces of size " +
                                          std::to_string(n) + " and " + std::to_string(b.size()));
    }
}

}  // namespace detail

// Sum over support pairs of L(a[i][k], b[j][l]) pi[i][j] pi[k][l], visiting
// only nonzero entries of pi: O(nnz^2).
inline double gw_discrepancy(const Coupling& pi, const DistanceMatrix& a, const DistanceMatrix& b,
                             PenaltyKind kind = PenaltyKind::abs_l1) {
    detail::check_shapes(pi, a, b);
    const auto supp = detail::support(pi);
    std::vector<double> partial(supp.size(), 0.0);
    parallel_for(0, supp.size(), [&](std::size_t s) {
        const auto& p = supp[s];
        double acc = 0.0;
        for (const auto& q : supp) acc += penalty(kind, a(p.row, q.row), b(p.col, q.col)) * q.mass;
        partial[s] = acc * p.mass;
    });
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

// C[i][j] = 2 sum over support (k,l) of L(a[i][k], b[j][l]) pi[k][l].
// Relies on b being symmetric (true for every DistanceMatrix).
inline Matrix gw_gradient_direct(const Coupling& pi, const DistanceMatrix& a, const DistanceMatrix& b,
                                 PenaltyKind kind) {
    detail::check_shapes(pi, a, b);
    const auto n = a.size();
    const auto supp = detail::support(pi);
    Matrix grad = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    parallel_for(0, n, [&](std::size_t i) {
        double* out = grad.data() + i * n;
        for (const auto& t : supp) {
            const double aik = a(i, t.row);
            const double* brow = b.values.data() + t.col * n;
            const double w = t.mass;
            if (kind == PenaltyKind::abs_l1) {
                for (std::size_t j = 0; j < n; ++j) out[j] += w * std::abs(aik - brow[j]);
            } else {
                for (std::size_t j = 0; j < n; ++j) {
                    const double diff = aik - brow[j];
                    out[j] += w * diff * diff;
                }
            }
        }
        for (std::size_t j = 0; j < n; ++j) out[j] *= 2.0;
    }, 4);
    return grad;
}

// Squared loss splits as a^2 p 1' + 1 q' b^2 - 2 a pi b with p, q the
// marginals of pi: O(n^3) regardless of sparsity.
inline Matrix gw_gradient_factorized(const Coupling& pi, const DistanceMatrix& a, const DistanceMatrix& b) {
    detail::check_shapes(pi, a, b);
    const Eigen::VectorXd p = pi.weights.rowwise().sum();
    const Eigen::VectorXd q = pi.weights.colwise().sum().transpose();
    const Eigen::VectorXd row_term = a.values.array().square().matrix() * p;
    const Eigen::VectorXd col_term = b.values.array().square().matrix() * q;
    Matrix cross = a.values * pi.weights * b.values.transpose();
    Matrix grad = -2.0 * cross;
    grad.colwise() += row_term;
    grad.rowwise() += col_term.transpose();
    return 2.0 * grad;
}

inline Matrix gw_gradient(const Coupling& pi, const DistanceMatrix& a, const DistanceMatrix& b, PenaltyKind kind) {
    return kind == PenaltyKind::squared_l2 ? gw_gradient_factorized(pi, a, b) : gw_gradient_direct(pi, a, b, kind);
}

namespace detail {

// E along a segment is an exact quadratic in eta. Fit it through eta = 0, 1/2, 1,
// take the clamped vertex (or the better endpoint when the fit is not convex),
// and never return a point worse than eta = 0.
template <typename Eval>
LineSearchResult exact_line_search(double e0, Eval&& eval) {
    const double e_half = eval(0.5);
    const double e_one = eval(1.0);
    const double curvature = 2.0 * (e_one - 2.0 * e_half + e0);
    const double slope = e_one - e0 - curvature;

    LineSearchResult best{0.0, e0};
    if (curvature > 0.0) {
        const double eta = std::clamp(-slope / (2.0 * curvature), 0.0, 1.0);
        if (eta > 0.0) {
            const double e_eta = eta == 1.0 ? e_one : eta == 0.5 ? e_half : eval(eta);
            if (e_eta < best.objective) best = {eta, e_eta};
        }
    }
    if (e_one < best.objective) best = {1.0, e_one};
    return best;
}

inline Coupling mix(const Coupling& pi, const Coupling& target, double eta) {
    return Coupling{(1.0 - eta) * pi.weights + eta * target.weights};
}

}  // namespace detail

// Exact line search from pi toward direction_vertex.
inline LineSearchResult line_search_step(const Coupling& pi, const Coupling& direction_vertex, const DistanceMatrix& a,
                                         const DistanceMatrix& b, PenaltyKind kind) {
    detail::check_shapes(pi, a, b);
    detail::check_shapes(direction_vertex, a, b);
    const double e0 = gw_discrepancy(pi, a, b, kind);
    if (pi.weights == direction_vertex.weights) return {0.0, e0};
    return detail::exact_line_search(e0, [&](double eta) {
        return gw_discrepancy(detail::mix(pi, direction_vertex, eta), a, b, kind);
    });
}

namespace detail {

struct RunResult {
    double value = 0.0;
    Coupling coupling;
    std::vector<TraceEntry> trace;
    std::size_t iterations = 0;
    bool converged = false;
};

inline bool small_decrease(double before, double after, double tolerance) {
    if (after <= 0.0) return true;
    return (before - after) <= tolerance * std::abs(before);
}

// Frank-Wolfe on the l1 (or any) penalty with sparse direct sums.
inline RunResult run_direct(const DistanceMatrix& a, const DistanceMatrix& b, Coupling pi, const GwConfig& cfg) {
    RunResult r;
    double e = gw_discrepancy(pi, a, b, cfg.penalty);
    r.trace.push_back({0, e, 0.0});
    for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
        const Matrix grad = gw_gradient(pi, a, b, cfg.penalty);
        const auto vertex = coupling_from_permutation(solve_linear_ot(grad).permutation);
        const LineSearchResult step =
            pi.weights == vertex.weights
                ? LineSearchResult{0.0, e}
                : exact_line_search(e, [&](double eta) { return gw_discrepancy(mix(pi, vertex, eta), a, b, cfg.penalty); });
        r.iterations = t;
        r.trace.push_back({t, step.objective, step.eta});
        if (step.eta == 0.0) {
            r.converged = true;
            break;
        }
        pi = mix(pi, vertex, step.eta);
        const double before = e;
        e = step.objective;
        if (small_decrease(before, e, cfg.tolerance)) {
            r.converged = true;
            break;
        }
    }
    r.value = e;
    r.coupling = std::move(pi);
    return r;
}

// Frank-Wolfe on the squared penalty. Keeps cross = a pi b up to date; with
// uniform marginals E(pi) = (|a|^2 + |b|^2) / n^2 - 2 <pi, cross>, and cross
// is linear along the segment, so each step costs one n^3 product.
inline RunResult run_factorized(const DistanceMatrix& a, const DistanceMatrix& b, Coupling pi, const GwConfig& cfg) {
    const auto n = static_cast<Eigen::Index>(a.size());
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    const double constant = (a.values.squaredNorm() + b.values.squaredNorm()) / nn;
    Matrix cross = a.values * pi.weights * b.values;
    const Eigen::VectorXd row_term = a.values.array().square().rowwise().sum().matrix() / static_cast<double>(n);
    const Eigen::VectorXd col_term = b.values.array().square().rowwise().sum().matrix() / static_cast<double>(n);

    auto energy = [&](const Matrix& plan, const Matrix& cr) { return constant - 2.0 * plan.cwiseProduct(cr).sum(); };

    RunResult r;
    double e = energy(pi.weights, cross);
    r.trace.push_back({0, e, 0.0});
    Matrix grad(n, n), permuted_b(n, n);
    for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
        grad = -4.0 * cross;
        grad.colwise() += 2.0 * row_term;
        grad.rowwise() += 2.0 * col_term.transpose();
        const Permutation perm = solve_linear_ot(grad).permutation;
        const Coupling vertex = coupling_from_permutation(perm);

        // a * vertex * b: row k of the right factor is b's row perm[k], scaled by 1/n.
        for (Eigen::Index k = 0; k < n; ++k) permuted_b.row(k) = b.values.row(static_cast<Eigen::Index>(perm.map[k]));
        const Matrix vertex_cross = (a.values * permuted_b) / static_cast<double>(n);

        LineSearchResult step{0.0, e};
        if (pi.weights != vertex.weights) {
            step = exact_line_search(e, [&](double eta) {
                return energy((1.0 - eta) * pi.weights + eta * vertex.weights, (1.0 - eta) * cross + eta * vertex_cross);
            });
        }
        r.iterations = t;
        r.trace.push_back({t, step.objective, step.eta});
        if (step.eta == 0.0) {
            r.converged = true;
            break;
        }
        pi.weights = (1.0 - step.eta) * pi.weights + step.eta * vertex.weights;
        cross = (1.0 - step.eta) * cross + step.eta * vertex_cross;
        const double before = e;
        e = step.objective;
        if (small_decrease(before, e, cfg.tolerance)) {
            r.converged = true;
            break;
        }
    }
    r.value = e;
    r.coupling = std::move(pi);
    return r;
}

inline void check_config(const GwConfig& cfg) {
    if (cfg.max_iters < 1) throw Error(ErrorKind::parameter, "max_iters must be >= 1");
    if (cfg.restarts < 1) throw Error(ErrorKind::parameter, "restarts must be >= 1");
    if (!(cfg.tolerance > 0.0)) throw Error(ErrorKind::parameter, "tolerance must be > 0");
}

// Direct re-evaluation budget for the squared path's reported value.
constexpr double kDirectRecheckBudget = 2e8;

}  // namespace detail

// Conditional-gradient GW solve. Restart 0 starts at the product coupling,
// later restarts at permutation vertices (warm starts first, then random).
// Reports the lowest objective over all restarts; ties keep the earlier one.
// `a` is expected to be scale-matched to `b` already.
inline GwSolveResult solve_gw(const DistanceMatrix& a, const DistanceMatrix& b, const GwConfig& cfg = {}) {
    detail::check_config(cfg);
    const auto n = a.size();
    if (a.values.rows() != a.values.cols() || b.values.rows() != b.values.cols() || b.size() != n) {
        throw Error(ErrorKind::shape, "GW needs two square distance matrices of equal size, got " +
                                          std::to_string(a.values.rows()) + "x" + std::to_string(a.values.cols()) +
                                          " and " + std::to_string(b.values.rows()) + "x" +
                                          std::to_string(b.values.cols()));
    }
    if (n == 0) throw Error(ErrorKind::size, "GW needs at least one sample");
    for (const auto& w : cfg.warm_starts) {
        if (w.size() != n || !is_permutation(w)) throw Error(ErrorKind::parameter, "warm start is not a permutation of size " + std::to_string(n));
    }

    SplitMix64 rng(cfg.seed);
    GwSolveResult best;
    bool have = false;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        Coupling start;
        if (r == 0) {
            start = product_coupling(n);
        } else if (r - 1 < cfg.warm_starts.size()) {
            start = coupling_from_permutation(cfg.warm_starts[r - 1]);
        } else {
            start = coupling_from_permutation(Permutation{rng.permutation(n)});
        }
        auto run = cfg.penalty == PenaltyKind::squared_l2 ? detail::run_factorized(a, b, std::move(start), cfg)
                                                          : detail::run_direct(a, b, std::move(start), cfg);
        best.restart_traces.push_back(run.trace);
        if (!have || run.value < best.value) {
            have = true;
            best.value = run.value;
            best.coupling = std::move(run.coupling);
            best.trace = std::move(run.trace);
            best.iterations_run = run.iterations;
            best.converged = run.converged;
            best.restart_index = r;
        }
    }
    if (cfg.penalty == PenaltyKind::squared_l2) {
        const auto nnz = static_cast<double>((best.coupling.weights.array() != 0.0).count());
        if (nnz * nnz <= detail::kDirectRecheckBudget) {
            best.value = gw_discrepancy(best.coupling, a, b, cfg.penalty);
        } else {
            best.value = std::max(best.value, 0.0);
        }
    }
    return best;
}

struct BottleneckResult {
    double value = 0.0;
    Permutation permutation;
};

namespace detail {

struct BottleneckSearch {
    const DistanceMatrix& a;
    const DistanceMatrix& b;
    std::size_t n;
    std::vector<std::size_t> assign;
    std::vector<char> used;
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_assign;

    // Rows are placed in order; columns tried ascending, so the first optimum
    // found is the lexicographically smallest. Only strict improvements count,
    // which makes pruning at >= best safe.
    void dfs(std::size_t row, double current) {
        if (row == n) {
            if (current < best) {
                best = current;
                best_assign = assign;
            }
            return;
        }
        for (std::size_t col = 0; col < n; ++col) {
            if (used[col]) continue;
            double worst = current;
            for (std::size_t k = 0; k < row && worst < best; ++k) {
                worst = std::max(worst, std::abs(a(row, k) - b(col, assign[k])));
            }
            worst = std::max(worst, std::abs(a(row, row) - b(col, col)));
            if (worst >= best) continue;
            used[col] = 1;
            assign[row] = col;
            dfs(row + 1, worst);
            used[col] = 0;
        }
    }
};

}  // namespace detail

// Bottleneck (infinity-norm) GW under uniform marginals. Every coupling's
// support contains the support of some permutation (Birkhoff), so its
// worst support distortion is at least that permutation's; the minimum over
// permutations is therefore the infimum over all couplings. Branch and bound
// over permutations, guarded at n <= 9.
inline BottleneckResult gw_infinity(const DistanceMatrix& a, const DistanceMatrix& b) {
    const auto n = a.size();
    if (b.size() != n) throw Error(ErrorKind::shape, "spaces differ in size");
    if (n > 9) throw Error(ErrorKind::guard, "bottleneck GW limited to n <= 9, got " + std::to_string(n));
    detail::BottleneckSearch search{a, b, n, std::vector<std::size_t>(n), std::vector<char>(n, 0),
                                    std::numeric_limits<double>::infinity(), {}};
    search.dfs(0, 0.0);
    return {n == 0 ? 0.0 : search.best, Permutation{n == 0 ? std::vector<std::size_t>{} : search.best_assign}};
}

}  // namespace gwselect
