#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gwselect/error.hpp"
#include "gwselect/mmspace.hpp"

namespace gwselect {

// Transport plan between two uniform empirical measures of equal size:
// nonnegative, every row and column sums to 1/n.
struct Coupling {
    Matrix weights;

    std::size_t size() const { return static_cast<std::size_t>(weights.rows()); }
};

// map[i] is the column assigned to row i.
struct Permutation {
    std::vector<std::size_t> map;

    std::size_t size() const { return map.size(); }
    static Permutation identity(std::size_t n) {
        Permutation p;
        p.map.resize(n);
        std::iota(p.map.begin(), p.map.end(), std::size_t{0});
        return p;
    }
    friend bool operator==(const Permutation&, const Permutation&) = default;
};

struct AssignmentResult {
    Permutation permutation;
    double objective = 0.0;  // sum of assigned costs divided by n
};

inline bool is_permutation(const Permutation& p) {
    std::vector<char> seen(p.size(), 0);
    for (auto j : p.map) {
        if (j >= p.size() || seen[j]) return false;
        seen[j] = 1;
    }
    return true;
}

inline Coupling coupling_from_permutation(const Permutation& p) {
    if (!is_permutation(p)) throw Error(ErrorKind::input, "not a permutation");
    const auto n = static_cast<Eigen::Index>(p.size());
    Coupling c{Matrix::Zero(n, n)};
    const double mass = 1.0 / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) c.weights(i, static_cast<Eigen::Index>(p.map[i])) = mass;
    return c;
}

inline Coupling product_coupling(std::size_t n) {
    if (n == 0) throw Error(ErrorKind::size, "coupling needs n >= 1");
    const auto m = static_cast<Eigen::Index>(n);
    const double mass = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    return Coupling{Matrix::Constant(m, m, mass)};
}

namespace detail {

inline void check_cost(const Matrix& cost) {
    if (cost.rows() != cost.cols()) {
        throw Error(ErrorKind::input, "cost matrix must be square, got " + std::to_string(cost.rows()) + "x" +
                                          std::to_string(cost.cols()));
    }
    if (!cost.allFinite()) throw Error(ErrorKind::input, "cost matrix has non-finite entries");
}

// Shortest augmenting path from free row `start`, Dijkstra over columns with
// reduced costs cost(i, j) - v[j]. Columns in cols[0, lo) are settled,
// cols[lo, hi) sit at the current minimum distance, cols[hi, n) are unreached.
// Returns the free column that ends the path; prices of settled columns are
// updated so reduced costs stay nonnegative.
inline std::size_t find_augmenting_path(const Matrix& cost, std::size_t start, const std::vector<long>& col_owner,
                                        std::vector<double>& v, std::vector<std::size_t>& pred,
                                        std::vector<std::size_t>& cols, std::vector<double>& d) {
    const auto n = static_cast<std::size_t>(cost.rows());
    const double* start_row = cost.data() + start * n;
    for (std::size_t j = 0; j < n; ++j) {
        cols[j] = j;
        pred[j] = start;
        d[j] = start_row[j] - v[j];
    }
    std::size_t lo = 0, hi = 0, settled = 0;
    long end_col = -1;
    while (end_col < 0) {
        if (lo == hi) {
            // Pull every column at the new minimum distance into the scan list.
            settled = lo;
            hi = lo + 1;
            double mind = d[cols[lo]];
            for (std::size_t k = hi; k < n; ++k) {
                const std::size_t j = cols[k];
                if (d[j] <= mind) {
                    if (d[j] < mind) {
                        hi = lo;
                        mind = d[j];
                    }
                    cols[k] = cols[hi];
                    cols[hi++] = j;
                }
            }
            for (std::size_t k = lo; k < hi; ++k) {
                if (col_owner[cols[k]] < 0) {
                    end_col = static_cast<long>(cols[k]);
                    break;
                }
            }
            if (end_col >= 0) break;
        }
        const std::size_t j1 = cols[lo++];
        const auto i = static_cast<std::size_t>(col_owner[j1]);
        const double mind = d[j1];
        const double* row = cost.data() + i * n;
        const double h = row[j1] - v[j1] - mind;
        for (std::size_t k = hi; k < n; ++k) {
            const std::size_t j = cols[k];
            const double reduced = row[j] - v[j] - h;
            if (reduced < d[j]) {
                d[j] = reduced;
                pred[j] = i;
                if (reduced == mind) {
                    if (col_owner[j] < 0) {
                        end_col = static_cast<long>(j);
                        break;
                    }
                    cols[k] = cols[hi];
                    cols[hi++] = j;
                }
            }
        }
        if (end_col >= 0) {
            --lo;  // j1 belongs to the current minimum layer, not the settled set
            break;
        }
    }
    const double mind = d[cols[lo]];
    for (std::size_t k = 0; k < settled; ++k) {
        const std::size_t j = cols[k];
        v[j] += d[j] - mind;
    }
    return static_cast<std::size_t>(end_col);
}

}  // namespace detail

// Exact minimum-cost perfect matching (Jonker-Volgenant style): column
// reduction for an initial partial assignment, then one shortest augmenting
// path per unassigned row. Deterministic for identical input bytes.
inline AssignmentResult solve_linear_ot(const Matrix& cost) {
    detail::check_cost(cost);
    const auto n = static_cast<std::size_t>(cost.rows());
    AssignmentResult out;
    if (n == 0) return out;

    std::vector<long> row_col(n, -1), col_owner(n, -1);
    std::vector<double> v(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t best = 0;
        double m = cost(0, static_cast<Eigen::Index>(j));
        for (std::size_t i = 1; i < n; ++i) {
            const double c = cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (c < m) {
                m = c;
                best = i;
            }
        }
        v[j] = m;
        if (row_col[best] < 0) {
            row_col[best] = static_cast<long>(j);
            col_owner[j] = static_cast<long>(best);
        }
    }

    std::vector<std::size_t> pred(n), cols(n);
    std::vector<double> d(n);
    for (std::size_t f = 0; f < n; ++f) {
        if (row_col[f] >= 0) continue;
        std::size_t j = detail::find_augmenting_path(cost, f, col_owner, v, pred, cols, d);
        while (true) {
            const std::size_t i = pred[j];
            col_owner[j] = static_cast<long>(i);
            const long prev = row_col[i];
            row_col[i] = static_cast<long>(j);
            if (i == f) break;
            j = static_cast<std::size_t>(prev);
        }
    }

    out.permutation.map.resize(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.permutation.map[i] = static_cast<std::size_t>(row_col[i]);
        total += cost(static_cast<Eigen::Index>(i), row_col[i]);
    }
    out.objective = total / static_cast<double>(n);
    return out;
}

// Exhaustive search over all n! assignments, lexicographically smallest
// permutation among ties. Test oracle; guarded at n <= 9.
inline AssignmentResult brute_force_lap(const Matrix& cost) {
    detail::check_cost(cost);
    const auto n = static_cast<std::size_t>(cost.rows());
    if (n > 9) throw Error(ErrorKind::guard, "brute force limited to n <= 9, got " + std::to_string(n));
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    AssignmentResult best;
    double best_total = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p[i]));
        if (total < best_total) {
            best_total = total;
            best.permutation.map = p;
        }
    } while (std::next_permutation(p.begin(), p.end()));
    best.objective = n == 0 ? 0.0 : best_total / static_cast<double>(n);
    return best;
}

}  // namespace gwselect
