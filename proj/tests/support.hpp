#pragma once

// Test-only reference implementations. Each one is written from the
// definition with plain loops and shares no code with the library beyond
// the data types.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "gwselect/gwselect.hpp"
#include "gwselect/synthetic.hpp"

namespace oracle {

using gwselect::Coupling;
using gwselect::DistanceMatrix;
using gwselect::Matrix;
using gwselect::PenaltyKind;

inline double pen(PenaltyKind k, double x, double y) {
    const double d = x - y;
    return k == PenaltyKind::abs_l1 ? std::abs(d) : d * d;
}

// Quadruple loop over all index combinations.
inline double nested_gw(const Matrix& pi, const Matrix& a, const Matrix& b, PenaltyKind k) {
    const auto n = a.rows();
    const auto m = b.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index p = 0; p < n; ++p)
                for (Eigen::Index q = 0; q < m; ++q) total += pen(k, a(i, p), b(j, q)) * pi(i, j) * pi(p, q);
    return total;
}

inline Matrix perm_coupling(const std::vector<std::size_t>& perm) {
    const auto n = static_cast<Eigen::Index>(perm.size());
    Matrix pi = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) pi(i, static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)])) = 1.0 / n;
    return pi;
}

struct PermMin {
    double value = 0.0;
    std::vector<std::size_t> perm;
};

// Minimum of the nested evaluator over every permutation coupling.
inline PermMin brute_force_gw(const Matrix& a, const Matrix& b, PenaltyKind k) {
    std::vector<std::size_t> perm(static_cast<std::size_t>(a.rows()));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    PermMin best{std::numeric_limits<double>::infinity(), perm};
    do {
        const double v = nested_gw(perm_coupling(perm), a, b, k);
        if (v < best.value) best = {v, perm};
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// max over index pairs of |a(i,k) - b(perm i, perm k)|, minimised over permutations.
inline double brute_force_gw_inf(const Matrix& a, const Matrix& b) {
    std::vector<std::size_t> perm(static_cast<std::size_t>(a.rows()));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i)
            for (std::size_t k = 0; k < perm.size(); ++k)
                worst = std::max(worst, std::abs(a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) -
                                                 b(static_cast<Eigen::Index>(perm[i]), static_cast<Eigen::Index>(perm[k]))));
        best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

inline double lap_brute(const Matrix& cost) {
    std::vector<std::size_t> perm(static_cast<std::size_t>(cost.rows()));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < perm.size(); ++i) s += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(perm[i]));
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(cost.rows());
}

// Angle between rows via the textbook formula.
inline double angle(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    return std::acos(std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0));
}

inline Matrix angle_matrix(const Matrix& x) {
    const auto n = x.rows();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (i != j) d(i, j) = angle(x.row(i).transpose(), x.row(j).transpose());
    return d;
}

// Median by full sort of the strict upper triangle.
inline double sorted_median(const Matrix& m) {
    std::vector<double> v;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = i + 1; j < m.cols(); ++j) v.push_back(m(i, j));
    std::sort(v.begin(), v.end());
    const auto c = v.size();
    return c % 2 ? v[c / 2] : 0.5 * (v[c / 2 - 1] + v[c / 2]);
}

inline double two_pass_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// k nearest neighbours by full sort of each row (distance, then index).
inline std::vector<std::vector<std::size_t>> knn_sorted(const Matrix& d, std::size_t k) {
    std::vector<std::vector<std::size_t>> out;
    const auto n = static_cast<std::size_t>(d.rows());
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> row;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) row.emplace_back(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), j);
        std::sort(row.begin(), row.end());
        std::vector<std::size_t> nn;
        for (std::size_t t = 0; t < k; ++t) nn.push_back(row[t].second);
        std::sort(nn.begin(), nn.end());
        out.push_back(nn);
    }
    return out;
}

}  // namespace oracle

namespace testutil {

using gwselect::DistanceMatrix;
using gwselect::Matrix;
using gwselect::SplitMix64;

inline Matrix random_points(SplitMix64& rng, std::size_t n, std::size_t d) {
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
    return m;
}

inline DistanceMatrix random_space(SplitMix64& rng, std::size_t n, std::size_t d = 3) {
    return gwselect::pairwise_distances(random_points(rng, n, d));
}

// Symmetric, zero diagonal, entries uniform in [0, 1): a generic
// dissimilarity that need not be a metric.
inline DistanceMatrix random_dissimilarity(SplitMix64& rng, std::size_t n) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = i + 1; j < m.cols(); ++j) m(i, j) = m(j, i) = rng.uniform();
    return {m, {}};
}

inline DistanceMatrix permuted(const DistanceMatrix& a, const std::vector<std::size_t>& perm) {
    const auto n = a.values.rows();
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            out(i, j) = a.values(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]),
                                 static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]));
    return {out, a.label};
}

// Random interior coupling with uniform marginals: a convex mix of a few
// permutation couplings.
inline Matrix random_coupling(SplitMix64& rng, std::size_t n, std::size_t parts = 4) {
    Matrix pi = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> w(parts);
    double total = 0.0;
    for (auto& x : w) total += (x = 0.1 + rng.uniform());
    for (std::size_t p = 0; p < parts; ++p) pi += (w[p] / total) * oracle::perm_coupling(rng.permutation(n));
    return pi;
}

// Monotone-trace bookkeeping shared by every test that runs the solver.
inline std::atomic<std::size_t>& trace_violations() {
    static std::atomic<std::size_t> count{0};
    return count;
}

inline std::atomic<std::size_t>& traces_checked() {
    static std::atomic<std::size_t> count{0};
    return count;
}

inline bool trace_monotone(const std::vector<gwselect::TraceEntry>& trace) {
    ++traces_checked();
    for (std::size_t t = 1; t < trace.size(); ++t) {
        if (trace[t].objective > trace[t - 1].objective) {
            ++trace_violations();
            return false;
        }
    }
    return true;
}

// Checks the trace of every restart, not only the winner.
inline bool trace_monotone(const gwselect::GwSolveResult& r) {
    bool ok = trace_monotone(r.trace);
    for (const auto& t : r.restart_traces) ok = trace_monotone(t) && ok;
    return ok;
}

inline gwselect::GwSolveResult checked_solve(const DistanceMatrix& a, const DistanceMatrix& b,
                                             const gwselect::GwConfig& cfg = {}) {
    auto r = gwselect::solve_gw(a, b, cfg);
    trace_monotone(r);
    return r;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("gwselect-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

// Writes a pool as EMB1 files plus a manifest whose paths are relative to
// `dir`; encoders are named enc0, enc1, ... unless `names` says otherwise.
inline std::filesystem::path write_pool(const TempDir& dir, const gwselect::synthetic::Pool& pool,
                                        const std::vector<std::optional<double>>& accuracy = {},
                                        const std::vector<std::string>& names = {}) {
    nlohmann::json manifest = nlohmann::json::array();
    for (std::size_t k = 0; k < pool.encoders.size(); ++k) {
        const std::string name = k < names.size() ? names[k] : "enc" + std::to_string(k);
        const std::string file = name + ".emb";
        gwselect::write_embeddings(pool.encoders[k], dir / file);
        nlohmann::json e{{"name", name}, {"embedding_path", file}};
        if (k < accuracy.size() && accuracy[k]) e["external_accuracy"] = *accuracy[k];
        manifest.push_back(e);
    }
    gwselect::write_embeddings(pool.text, dir / "text.emb");
    gwselect::write_text(dir / "pool.json", manifest.dump(2));
    return dir / "pool.json";
}

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

// Runs a shell command line, capturing both streams through files in `dir`.
inline CommandResult run_command(const TempDir& dir, const std::string& cmdline) {
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string full = cmdline + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(full.c_str());
    CommandResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = gwselect::detail::slurp(out);
    r.err = gwselect::detail::slurp(err);
    return r;
}

}  // namespace testutil
