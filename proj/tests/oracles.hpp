// Test-side oracles: brute-force and independent reference computations the
// unit and acceptance suites check the library against. Nothing here may
// call back into the code paths under test.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "ugcp/dense.hpp"
#include "ugcp/graph.hpp"
#include "ugcp/rng.hpp"

namespace oracle {

inline ugcp::DenseMatrix random_dense(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
    auto rng = ugcp::make_rng(seed);
    std::normal_distribution<double> gauss(0.0, scale);
    ugcp::DenseMatrix m(rows, cols);
    for (double& v : m.data) v = gauss(rng);
    return m;
}

inline ugcp::Graph random_graph(int n, double p, std::uint64_t seed, bool min_degree_one = false) {
    auto rng = ugcp::make_rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (uni(rng) < p) edges.emplace_back(u, v);
    if (min_degree_one && n >= 2) {
        std::vector<int> deg(n, 0);
        for (auto& [u, v] : edges) {
            deg[u]++;
            deg[v]++;
        }
        for (int v = 0; v < n; ++v)
            if (deg[v] == 0) {
                const int u = v == 0 ? 1 : v - 1;
                edges.emplace_back(std::min(u, v), std::max(u, v));
                deg[u]++;
                deg[v]++;
            }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return ugcp::Graph::validated(n, std::move(edges));
}

// Plain O(n^3) dense product, the reference for every sparse kernel.
inline ugcp::DenseMatrix dense_matmul(const ugcp::DenseMatrix& a, const ugcp::DenseMatrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("oracle matmul: dims");
    ugcp::DenseMatrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
            out(i, j) = s;
        }
    return out;
}

// Gaussian elimination with partial pivoting: solves A X = B.
inline ugcp::DenseMatrix dense_solve(ugcp::DenseMatrix a, ugcp::DenseMatrix b) {
    if (a.rows != a.cols || a.rows != b.rows) throw std::invalid_argument("oracle solve: dims");
    const int n = a.rows;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (std::abs(a(pivot, col)) < 1e-14) throw std::runtime_error("oracle solve: singular matrix");
        if (pivot != col) {
            for (int j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            for (int j = 0; j < b.cols; ++j) std::swap(b(col, j), b(pivot, j));
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (int j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            for (int j = 0; j < b.cols; ++j) b(r, j) -= f * b(col, j);
        }
    }
    ugcp::DenseMatrix x(n, b.cols);
    for (int r = n - 1; r >= 0; --r)
        for (int j = 0; j < b.cols; ++j) {
            double s = b(r, j);
            for (int k = r + 1; k < n; ++k) s -= a(r, k) * x(k, j);
            x(r, j) = s / a(r, r);
        }
    return x;
}

// Central finite difference of f along direction v at the stored point;
// the caller owns moving the point via the setter.
inline double directional_fd(const std::function<double()>& eval,
                             const std::function<void(double)>& shift_along_direction,
                             double h = 1e-5) {
    shift_along_direction(h);
    const double fp = eval();
    shift_along_direction(-2.0 * h);
    const double fm = eval();
    shift_along_direction(h);  // restore
    return (fp - fm) / (2.0 * h);
}

inline double rel_err(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
    return std::abs(got - want) / denom;
}

// Subgradient descent on the elastic objective
//   1/2 ||H - X||^2 + (l1/2) Tr(H^T L H) + l2 * || D H ||_1 (entrywise),
// with the strongly-convex diminishing step 2 / (t + 1); returns the best
// objective value seen. Dense matrices only; this is the reference the
// message-passing solver is held to.
inline double elastic_subgradient_min(const ugcp::DenseMatrix& x, const ugcp::DenseMatrix& laplacian,
                                      const ugcp::DenseMatrix& incidence, double l1, double l2,
                                      int iterations) {
    auto objective = [&](const ugcp::DenseMatrix& h) {
        double fid = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double d = h.data[i] - x.data[i];
            fid += d * d;
        }
        const ugcp::DenseMatrix lh = dense_matmul(laplacian, h);
        double tr = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) tr += h.data[i] * lh.data[i];
        const ugcp::DenseMatrix dh = dense_matmul(incidence, h);
        double ell1 = 0.0;
        for (double v : dh.data) ell1 += std::abs(v);
        return 0.5 * fid + 0.5 * l1 * tr + l2 * ell1;
    };
    ugcp::DenseMatrix h = x;
    double best = objective(h);
    const ugcp::DenseMatrix incidence_t = ugcp::transpose(incidence);
    for (int t = 1; t <= iterations; ++t) {
        // subgradient: (H - X) + l1 L H + l2 D^T sign(D H)
        ugcp::DenseMatrix g(h.rows, h.cols);
        for (std::size_t i = 0; i < h.size(); ++i) g.data[i] = h.data[i] - x.data[i];
        const ugcp::DenseMatrix lh = dense_matmul(laplacian, h);
        for (std::size_t i = 0; i < h.size(); ++i) g.data[i] += l1 * lh.data[i];
        ugcp::DenseMatrix dh = dense_matmul(incidence, h);
        for (double& v : dh.data) v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        const ugcp::DenseMatrix sub = dense_matmul(incidence_t, dh);
        for (std::size_t i = 0; i < h.size(); ++i) g.data[i] += l2 * sub.data[i];
        const double step = 2.0 / (t + 1.0);  // objective is 1-strongly convex
        for (std::size_t i = 0; i < h.size(); ++i) h.data[i] -= step * g.data[i];
        best = std::min(best, objective(h));
    }
    return best;
}

}  // namespace oracle
