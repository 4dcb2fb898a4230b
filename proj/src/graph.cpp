#include "ugcp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

namespace ugcp {

SparseMatrixCSR SparseMatrixCSR::identity(int n) {
    SparseMatrixCSR s(n, n);
    s.col_indices.resize(n);
    s.values.assign(n, 1.0);
    for (int i = 0; i < n; ++i) {
        s.col_indices[i] = i;
        s.row_offsets[static_cast<std::size_t>(i) + 1] = static_cast<std::size_t>(i) + 1;
    }
    return s;
}

SparseMatrixCSR SparseMatrixCSR::from_triplets(int rows, int cols,
                                               std::vector<std::tuple<int, int, double>> triplets) {
    std::sort(triplets.begin(), triplets.end(),
              [](const auto& a, const auto& b) {
                  return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
              });
    SparseMatrixCSR s(rows, cols);
    s.col_indices.reserve(triplets.size());
    s.values.reserve(triplets.size());
    int prev_r = -1, prev_c = -1;
    for (const auto& [r, c, v] : triplets) {
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw std::invalid_argument("from_triplets: index out of range at (" + std::to_string(r) +
                                        ", " + std::to_string(c) + ")");
        if (r == prev_r && c == prev_c)
            throw std::invalid_argument("from_triplets: duplicate entry at (" + std::to_string(r) + ", " +
                                        std::to_string(c) + ")");
        s.col_indices.push_back(c);
        s.values.push_back(v);
        s.row_offsets[static_cast<std::size_t>(r) + 1]++;
        prev_r = r;
        prev_c = c;
    }
    for (int r = 0; r < rows; ++r) s.row_offsets[static_cast<std::size_t>(r) + 1] += s.row_offsets[r];
    return s;
}

void SparseMatrixCSR::validate() const {
    if (rows < 0 || cols < 0) throw std::invalid_argument("csr: negative dimension");
    if (row_offsets.size() != static_cast<std::size_t>(rows) + 1)
        throw std::invalid_argument("csr: row_offsets length mismatch");
    if (row_offsets.front() != 0) throw std::invalid_argument("csr: row_offsets[0] != 0");
    if (row_offsets.back() != col_indices.size() || col_indices.size() != values.size())
        throw std::invalid_argument("csr: offset/payload length mismatch");
    for (int r = 0; r < rows; ++r) {
        if (row_offsets[r] > row_offsets[static_cast<std::size_t>(r) + 1])
            throw std::invalid_argument("csr: decreasing row_offsets");
        for (std::size_t k = row_offsets[r]; k < row_offsets[static_cast<std::size_t>(r) + 1]; ++k) {
            if (col_indices[k] < 0 || col_indices[k] >= cols)
                throw std::invalid_argument("csr: column index out of range");
            if (k > row_offsets[r] && col_indices[k] <= col_indices[k - 1])
                throw std::invalid_argument("csr: column indices not strictly increasing");
        }
    }
}

DenseMatrix spmm(const SparseMatrixCSR& s, const DenseMatrix& h) {
    if (s.cols != h.rows) throw std::invalid_argument("spmm: dimension mismatch");
    DenseMatrix out(s.rows, h.cols);
    // Rows are independent; no cross-row reductions, so a row-parallel
    // version would stay bitwise identical.
    for (int i = 0; i < s.rows; ++i) {
        double* orow = out.row_ptr(i);
        for (std::size_t k = s.row_offsets[i]; k < s.row_offsets[static_cast<std::size_t>(i) + 1]; ++k) {
            const double v = s.values[k];
            const double* hrow = h.row_ptr(s.col_indices[k]);
            for (int j = 0; j < h.cols; ++j) orow[j] += v * hrow[j];
        }
    }
    return out;
}

SparseMatrixCSR transpose(const SparseMatrixCSR& s) {
    SparseMatrixCSR t(s.cols, s.rows);
    t.col_indices.resize(s.nnz());
    t.values.resize(s.nnz());
    std::vector<std::size_t> counts(static_cast<std::size_t>(s.cols) + 1, 0);
    for (int c : s.col_indices) counts[static_cast<std::size_t>(c) + 1]++;
    for (int c = 0; c < s.cols; ++c) counts[static_cast<std::size_t>(c) + 1] += counts[c];
    t.row_offsets = counts;
    std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
    for (int r = 0; r < s.rows; ++r) {
        for (std::size_t k = s.row_offsets[r]; k < s.row_offsets[static_cast<std::size_t>(r) + 1]; ++k) {
            const int c = s.col_indices[k];
            const std::size_t pos = cursor[c]++;
            t.col_indices[pos] = r;
            t.values[pos] = s.values[k];
        }
    }
    return t;
}

DenseMatrix to_dense(const SparseMatrixCSR& s) {
    DenseMatrix out(s.rows, s.cols);
    for (int i = 0; i < s.rows; ++i)
        for (std::size_t k = s.row_offsets[i]; k < s.row_offsets[static_cast<std::size_t>(i) + 1]; ++k)
            out(i, s.col_indices[k]) = s.values[k];
    return out;
}

Graph Graph::validated(int n_nodes, std::vector<std::pair<int, int>> edges) {
    if (n_nodes <= 0) throw std::invalid_argument("graph: empty graph rejected");
    for (auto& [u, v] : edges) {
        if (u == v) throw std::invalid_argument("graph: self-loop in raw edge list at node " + std::to_string(u));
        if (u < 0 || v < 0 || u >= n_nodes || v >= n_nodes)
            throw std::invalid_argument("graph: endpoint out of range (" + std::to_string(u) + ", " +
                                        std::to_string(v) + ")");
        if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i] == edges[i - 1])
            throw std::invalid_argument("graph: duplicate undirected edge (" + std::to_string(edges[i].first) +
                                        ", " + std::to_string(edges[i].second) + ")");
    Graph g;
    g.n_nodes = n_nodes;
    g.edges = std::move(edges);
    return g;
}

GraphOperators build_operators(const Graph& g, bool add_self_loops) {
    if (g.n_nodes <= 0) throw std::invalid_argument("build_operators: empty graph rejected");
    const int n = g.n_nodes;
    const int m = static_cast<int>(g.edges.size());

    std::vector<double> deg(n, add_self_loops ? 1.0 : 0.0);
    for (const auto& [u, v] : g.edges) {
        deg[u] += 1.0;
        deg[v] += 1.0;
    }
    std::vector<double> dinv_sqrt(n, 0.0);
    for (int i = 0; i < n; ++i) dinv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;

    // A and L share the sparsity pattern of the (self-looped) adjacency;
    // values are constructed once per undirected edge and mirrored.
    std::vector<std::tuple<int, int, double>> a_trip, l_trip;
    a_trip.reserve(2 * g.edges.size() + (add_self_loops ? n : 0));
    l_trip.reserve(a_trip.capacity() + n);
    for (const auto& [u, v] : g.edges) {
        const double w = dinv_sqrt[u] * dinv_sqrt[v];
        a_trip.emplace_back(u, v, w);
        a_trip.emplace_back(v, u, w);
        l_trip.emplace_back(u, v, -w);
        l_trip.emplace_back(v, u, -w);
    }
    for (int i = 0; i < n; ++i) {
        const double self = add_self_loops ? dinv_sqrt[i] * dinv_sqrt[i] : 0.0;
        if (self != 0.0) a_trip.emplace_back(i, i, self);
        const double ldiag = deg[i] > 0.0 ? 1.0 - self : 0.0;
        if (ldiag != 0.0) l_trip.emplace_back(i, i, ldiag);
    }

    GraphOperators ops;
    ops.adjacency = SparseMatrixCSR::from_triplets(n, n, std::move(a_trip));
    ops.laplacian = SparseMatrixCSR::from_triplets(n, n, std::move(l_trip));

    std::vector<std::tuple<int, int, double>> d_trip;
    d_trip.reserve(2 * g.edges.size());
    for (int e = 0; e < m; ++e) {
        const auto& [u, v] = g.edges[e];  // u < v fixes the orientation
        d_trip.emplace_back(e, u, dinv_sqrt[u]);
        d_trip.emplace_back(e, v, -dinv_sqrt[v]);
    }
    ops.incidence = SparseMatrixCSR::from_triplets(m, n, std::move(d_trip));
    ops.incidence_t = transpose(ops.incidence);
    ops.degrees = std::move(deg);
    ops.self_loops = add_self_loops;
    ops.n_nodes = n;
    ops.n_edges = m;
    return ops;
}

}  // namespace ugcp
