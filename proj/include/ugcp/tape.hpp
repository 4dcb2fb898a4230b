#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ugcp/dense.hpp"
#include "ugcp/graph.hpp"

namespace ugcp {

// A trainable tensor: value plus a persistent gradient accumulator.
// Gradients are only cleared by zero_grad(); backward passes add into them.
struct Parameter {
    std::string name;
    DenseMatrix value;
    DenseMatrix grad;

    Parameter() = default;
    Parameter(std::string n, DenseMatrix v)
        : name(std::move(n)), value(std::move(v)), grad(value.rows, value.cols) {}

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

using NodeId = int;

struct MmdConfig {
    int subsample_cap = 2000;        // per-domain row budget for the O(n^2) kernel sums
    std::uint64_t subsample_seed = 0;
    double fixed_bandwidth = 0.0;    // > 0 overrides the median heuristic
};

// Dynamic reverse-mode tape over dense matrices and sparse-dense products.
// One tape per training step; records are replayed in exact reverse order.
// backward() accumulates: node gradients and bound Parameter gradients grow
// additively across calls, so running it twice doubles every gradient.
class Tape {
public:
    NodeId constant(DenseMatrix v);    // leaf without gradient
    NodeId input(DenseMatrix v);       // differentiable leaf (gradcheck entry point)
    NodeId param(Parameter& p);        // leaf bound to a Parameter

    NodeId matmul(NodeId a, NodeId b);
    // Forward spmm(s, h); backward routes through the precomputed transpose.
    NodeId spmm(const SparseMatrixCSR& s, const SparseMatrixCSR& s_transposed, NodeId h);
    NodeId add_scaled(NodeId x, NodeId y, double a, double b);
    NodeId relu(NodeId x);
    // Training mode zeroes entries with probability rate and rescales
    // survivors by 1/(1-rate); eval mode (or rate 0) returns x unchanged.
    NodeId dropout(NodeId x, double rate, std::uint64_t seed, bool training);
    // Rows are rescaled to norm min(||row||, t); rows on the boundary and
    // zero rows pass through unclipped.
    NodeId row_l2_clip(NodeId z, double t);
    // Mean over masked rows of -log softmax(logits)[label]; returns a 1x1 node.
    NodeId softmax_cross_entropy(NodeId logits, const std::vector<int>& labels,
                                 const std::vector<int>& mask);
    // Biased squared-MMD with an RBF kernel; bandwidth is the median of
    // pairwise squared distances over the pooled (sub)sample and is treated
    // as a constant for differentiation. Returns a 1x1 node.
    NodeId mmd(NodeId source, NodeId target, const MmdConfig& cfg);
    // out = coeff.value[index] * x, with coeff a 1xK differentiable node.
    NodeId scale_by_entry(NodeId x, NodeId coeff, int index);

    const DenseMatrix& value(NodeId id) const { return nodes_[id].value; }
    bool needs_grad(NodeId id) const { return nodes_[id].needs_grad; }
    // Accumulated gradient of a node across all backward calls so far.
    const DenseMatrix& grad(NodeId id) const;

    void backward(NodeId root);

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        DenseMatrix value;
        DenseMatrix grad;  // lazily sized; persists across backward calls
        bool needs_grad = false;
        Parameter* bound = nullptr;
    };
    struct Record {
        NodeId out;
        std::function<void(Tape&, std::vector<DenseMatrix>&)> pull;  // reads scratch[out], adds into inputs
    };

    NodeId push(DenseMatrix value, bool needs_grad, Parameter* bound = nullptr);
    void check(NodeId id) const;
    static DenseMatrix& scratch_for(std::vector<DenseMatrix>& scratch, const Node& node, NodeId id);

    std::vector<Node> nodes_;
    std::vector<Record> records_;
};

}  // namespace ugcp
