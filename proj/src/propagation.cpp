#include "ugcp/propagation.hpp"

#include <cmath>
#include <stdexcept>

namespace ugcp {

namespace {

void notify(const StepObserver* obs, int step, const DenseMatrix& h) {
    if (obs && *obs) (*obs)(step, h);
}

}  // namespace

DenseMatrix appnp_propagate(const GraphOperators& ops, const DenseMatrix& x, double alpha, int k,
                            const StepObserver* observer) {
    if (k < 0) throw std::invalid_argument("appnp_propagate: negative depth");
    DenseMatrix h = x;
    for (int step = 0; step < k; ++step) {
        h = add_scaled(spmm(ops.adjacency, h), x, 1.0 - alpha, alpha);
        notify(observer, step + 1, h);
    }
    return h;
}

DenseMatrix appnp_cp(const GraphOperators& ops, const DenseMatrix& x, double alpha, int k,
                     const StepObserver* observer) {
    if (k < 1) throw std::invalid_argument("appnp_cp: depth must be >= 1");
    DenseMatrix anchor = appnp_propagate(ops, x, alpha, k, observer);
    DenseMatrix h = anchor;
    for (int step = 0; step < k; ++step) {
        h = add_scaled(spmm(ops.adjacency, h), anchor, 1.0 - alpha, alpha);
        notify(observer, k + step + 1, h);
    }
    return h;
}

DenseMatrix gpr_propagate(const GraphOperators& ops, const DenseMatrix& x,
                          const std::vector<double>& gamma, const StepObserver* observer) {
    if (gamma.empty()) throw std::invalid_argument("gpr_propagate: gamma must have length K+1");
    const int k = static_cast<int>(gamma.size()) - 1;
    // Horner form: H <- A H + gamma_j X, starting from gamma_K X; K spmm calls.
    DenseMatrix h = x;
    scale_in_place(h, gamma[k]);
    for (int j = k - 1; j >= 0; --j) {
        h = spmm(ops.adjacency, h);
        add_scaled_in_place(h, x, gamma[j]);
        notify(observer, k - j, h);
    }
    return h;
}

DenseMatrix gpr_cp(const GraphOperators& ops, const DenseMatrix& x, const std::vector<double>& gamma,
                   const StepObserver* observer) {
    DenseMatrix mid = gpr_propagate(ops, x, gamma, observer);
    return gpr_propagate(ops, mid, gamma, observer);
}

namespace {

// One pass of the proximal alternating predictor-corrector scheme:
// predictor Y, corrector H, dual ascent, row clip, final corrector.
DenseMatrix elastic_pass(const GraphOperators& ops, const DenseMatrix& anchor, const DenseMatrix& h0,
                         const ElasticParams& p, int k, int step_base, const StepObserver* observer) {
    DenseMatrix h = h0;
    DenseMatrix z(ops.n_edges, h.cols);
    for (int step = 0; step < k; ++step) {
        DenseMatrix y = add_scaled(anchor, spmm(ops.adjacency, h), p.step, 1.0 - p.step);
        DenseMatrix h_mid = add_scaled(y, spmm(ops.incidence_t, z), 1.0, -p.step);
        DenseMatrix z_raw = add_scaled(z, spmm(ops.incidence, h_mid), 1.0, p.beta);
        for (int i = 0; i < z_raw.rows; ++i) {
            double nsq = 0.0;
            for (int j = 0; j < z_raw.cols; ++j) nsq += z_raw(i, j) * z_raw(i, j);
            const double n = std::sqrt(nsq);
            if (n > p.clip_threshold) {
                const double f = p.clip_threshold / n;
                for (int j = 0; j < z_raw.cols; ++j) z_raw(i, j) *= f;
            }
        }
        z = std::move(z_raw);
        h = add_scaled(y, spmm(ops.incidence_t, z), 1.0, -p.step);
        notify(observer, step_base + step + 1, h);
    }
    return h;
}

}  // namespace

DenseMatrix elastic_propagate(const GraphOperators& ops, const DenseMatrix& x, const ElasticParams& p,
                              int k, const StepObserver* observer) {
    if (k < 0) throw std::invalid_argument("elastic_propagate: negative depth");
    return elastic_pass(ops, x, x, p, k, 0, observer);
}

DenseMatrix elastic_cp(const GraphOperators& ops, const DenseMatrix& x, const ElasticParams& p, int k,
                       const StepObserver* observer) {
    if (k < 1) throw std::invalid_argument("elastic_cp: depth must be >= 1");
    DenseMatrix anchor = elastic_propagate(ops, x, p, k, observer);
    // dual variable resets to zero, fidelity anchors at H^(K)
    return elastic_pass(ops, anchor, anchor, p, k, k, observer);
}

DenseMatrix cascade(const std::function<DenseMatrix(const DenseMatrix&)>& propagate,
                    const DenseMatrix& x, int rounds) {
    if (rounds < 0) throw std::invalid_argument("cascade: negative round count");
    DenseMatrix out = propagate(x);
    for (int r = 0; r < rounds; ++r) out = propagate(out);
    return out;
}

std::vector<double> ppr_coefficients(double alpha, int k) {
    std::vector<double> gamma(static_cast<std::size_t>(k) + 1);
    double w = 1.0;
    for (int j = 0; j < k; ++j) {
        gamma[j] = alpha * w;
        w *= 1.0 - alpha;
    }
    gamma[k] = w;  // (1-alpha)^K
    return gamma;
}

NodeId appnp_propagate_t(Tape& tape, const GraphOperators& ops, NodeId x, double alpha, int k) {
    if (k < 0) throw std::invalid_argument("appnp_propagate: negative depth");
    NodeId h = x;
    for (int step = 0; step < k; ++step)
        h = tape.add_scaled(tape.spmm(ops.adjacency, ops.adjacency, h), x, 1.0 - alpha, alpha);
    return h;
}

NodeId gpr_propagate_t(Tape& tape, const GraphOperators& ops, NodeId x, NodeId gamma) {
    const int k = tape.value(gamma).cols - 1;
    if (k < 0) throw std::invalid_argument("gpr_propagate: gamma must have length K+1");
    NodeId h = tape.scale_by_entry(x, gamma, k);
    for (int j = k - 1; j >= 0; --j)
        h = tape.add_scaled(tape.spmm(ops.adjacency, ops.adjacency, h), tape.scale_by_entry(x, gamma, j),
                            1.0, 1.0);
    return h;
}

NodeId elastic_propagate_t(Tape& tape, const GraphOperators& ops, NodeId x, const ElasticParams& p,
                           int k) {
    if (k < 0) throw std::invalid_argument("elastic_propagate: negative depth");
    NodeId h = x;
    NodeId z = tape.constant(DenseMatrix(ops.n_edges, tape.value(x).cols));
    for (int step = 0; step < k; ++step) {
        NodeId y = tape.add_scaled(x, tape.spmm(ops.adjacency, ops.adjacency, h), p.step, 1.0 - p.step);
        NodeId h_mid = tape.add_scaled(y, tape.spmm(ops.incidence_t, ops.incidence, z), 1.0, -p.step);
        NodeId z_raw = tape.add_scaled(z, tape.spmm(ops.incidence, ops.incidence_t, h_mid), 1.0, p.beta);
        z = tape.row_l2_clip(z_raw, p.clip_threshold);
        h = tape.add_scaled(y, tape.spmm(ops.incidence_t, ops.incidence, z), 1.0, -p.step);
    }
    return h;
}

}  // namespace ugcp
