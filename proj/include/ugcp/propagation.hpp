#pragma once

#include <functional>
#include <vector>

#include "ugcp/dense.hpp"
#include "ugcp/graph.hpp"
#include "ugcp/tape.hpp"

namespace ugcp {

// Hyperparameters of the elastic message passing scheme. The clip threshold
// is a separate knob from the weighting parameters on purpose: it defaults
// to lambda2 but the literal lambda1 variant stays selectable.
struct ElasticParams {
    double lambda1 = 3.0;
    double lambda2 = 3.0;
    double clip_threshold = 3.0;
    double step = 0.25;  // predictor step; 1/(1+lambda1) makes it an exact gradient step
    double beta = 2.0;   // dual ascent step, 1/(2*step)

    static ElasticParams from_weights(double l1, double l2) {
        ElasticParams p;
        p.lambda1 = l1;
        p.lambda2 = l2;
        p.clip_threshold = l2;
        p.step = 1.0 / (1.0 + l1);
        p.beta = 1.0 / (2.0 * p.step);
        return p;
    }
};

// Called with H after every propagation step; used for objective
// trajectories and the monotonicity checks.
using StepObserver = std::function<void(int step, const DenseMatrix& h)>;

// --- plain (evaluation-mode) propagation ---

DenseMatrix appnp_propagate(const GraphOperators& ops, const DenseMatrix& x, double alpha, int k,
                            const StepObserver* observer = nullptr);
DenseMatrix appnp_cp(const GraphOperators& ops, const DenseMatrix& x, double alpha, int k,
                     const StepObserver* observer = nullptr);

DenseMatrix gpr_propagate(const GraphOperators& ops, const DenseMatrix& x,
                          const std::vector<double>& gamma, const StepObserver* observer = nullptr);
DenseMatrix gpr_cp(const GraphOperators& ops, const DenseMatrix& x, const std::vector<double>& gamma,
                   const StepObserver* observer = nullptr);

DenseMatrix elastic_propagate(const GraphOperators& ops, const DenseMatrix& x, const ElasticParams& p,
                              int k, const StepObserver* observer = nullptr);
DenseMatrix elastic_cp(const GraphOperators& ops, const DenseMatrix& x, const ElasticParams& p, int k,
                       const StepObserver* observer = nullptr);

// Generic cascade: round 0 is the vanilla output, each further round feeds
// the previous output back in as the new fidelity anchor. rounds=1
// reproduces the *_cp schemes exactly.
DenseMatrix cascade(const std::function<DenseMatrix(const DenseMatrix&)>& propagate,
                    const DenseMatrix& x, int rounds);

// PPR coefficients gamma_k = alpha (1-alpha)^k for k < K and gamma_K = (1-alpha)^K;
// with these, gpr_propagate reproduces appnp_propagate.
std::vector<double> ppr_coefficients(double alpha, int k);

// --- tape (training-mode) propagation; gradients flow through every step ---

NodeId appnp_propagate_t(Tape& tape, const GraphOperators& ops, NodeId x, double alpha, int k);
NodeId gpr_propagate_t(Tape& tape, const GraphOperators& ops, NodeId x, NodeId gamma);
NodeId elastic_propagate_t(Tape& tape, const GraphOperators& ops, NodeId x, const ElasticParams& p, int k);

}  // namespace ugcp
