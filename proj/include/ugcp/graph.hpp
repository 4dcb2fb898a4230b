#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ugcp/dense.hpp"

namespace ugcp {

// Compressed sparse row matrix. Column indices are strictly increasing
// within each row; values are 64-bit floats.
struct SparseMatrixCSR {
    int rows = 0;
    int cols = 0;
    std::vector<std::size_t> row_offsets;  // length rows+1, row_offsets[0] == 0
    std::vector<int> col_indices;
    std::vector<double> values;

    SparseMatrixCSR() : row_offsets(1, 0) {}
    SparseMatrixCSR(int r, int c) : rows(r), cols(c), row_offsets(static_cast<std::size_t>(r) + 1, 0) {}

    std::size_t nnz() const { return values.size(); }
    static SparseMatrixCSR identity(int n);

    // Builds from (row, col, value) triplets; sorts them and rejects
    // duplicates and out-of-range indices.
    static SparseMatrixCSR from_triplets(int rows, int cols,
                                         std::vector<std::tuple<int, int, double>> triplets);

    void validate() const;  // throws std::invalid_argument on broken invariants
};

DenseMatrix spmm(const SparseMatrixCSR& s, const DenseMatrix& h);
SparseMatrixCSR transpose(const SparseMatrixCSR& s);
DenseMatrix to_dense(const SparseMatrixCSR& s);

// Undirected, unweighted graph. The raw edge list carries no self-loops
// and no duplicates; endpoints are stored as (u, v) with u < v.
struct Graph {
    int n_nodes = 0;
    std::vector<std::pair<int, int>> edges;
    bool self_loops_added = false;  // records preprocessing; loaders always leave this false

    // Normalizes endpoint order, sorts, and enforces the invariants above.
    static Graph validated(int n_nodes, std::vector<std::pair<int, int>> edges);
};

// Normalized operators shared by every unfolded model:
//   adjacency   A = D^{-1/2} (A_hat) D^{-1/2}, A_hat the (optionally self-looped) adjacency
//   laplacian   L = I - A, with degree-0 diagonal entries set to 0 so that
//               incidence^T * incidence == L holds on every graph
//   incidence   one row per undirected edge (u, v), u < v, with +1/sqrt(d_u)
//               at u and -1/sqrt(d_v) at v
//   degrees     the degrees used for normalization (self-loop included when enabled)
struct GraphOperators {
    SparseMatrixCSR adjacency;
    SparseMatrixCSR laplacian;
    SparseMatrixCSR incidence;
    SparseMatrixCSR incidence_t;  // precomputed transpose, used by backward passes
    std::vector<double> degrees;
    bool self_loops = true;
    int n_nodes = 0;
    int n_edges = 0;
};

GraphOperators build_operators(const Graph& g, bool add_self_loops);

// Sparse feature matrix with its transpose precomputed once, so the first
// MLP layer can backpropagate without rebuilding it every step.
struct FeatureMatrix {
    SparseMatrixCSR m;
    SparseMatrixCSR mt;

    FeatureMatrix() = default;
    explicit FeatureMatrix(SparseMatrixCSR features) : m(std::move(features)), mt(transpose(m)) {}
    int rows() const { return m.rows; }
    int cols() const { return m.cols; }
};

}  // namespace ugcp
