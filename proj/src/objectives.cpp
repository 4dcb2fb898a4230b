#include "ugcp/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ugcp {

namespace {

double node_fidelity_sum(const DenseMatrix& h, const DenseMatrix& x) {
    if (!h.same_shape(x)) throw std::invalid_argument("objective: anchor shape mismatch");
    double s = 0.0;
    for (int v = 0; v < h.rows; ++v) {
        double row = 0.0;
        for (int j = 0; j < h.cols; ++j) {
            const double d = h(v, j) - x(v, j);
            row += d * d;
        }
        s += row;
    }
    return s;
}

}  // namespace

LowerObjectiveReport gsd_objective(const DenseMatrix& h, const DenseMatrix& x, const GraphOperators& ops,
                                   double alpha, AnchorKind anchor) {
    if (h.rows != ops.n_nodes) throw std::invalid_argument("gsd_objective: row count mismatch");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("gsd_objective: alpha must be in (0, 1]");
    LowerObjectiveReport r;
    r.variant = Variant::appnp;
    r.anchor = anchor;
    r.fidelity = alpha * node_fidelity_sum(h, x);
    // edge route: sum over edges of the normalized difference norms
    const DenseMatrix dh = spmm(ops.incidence, h);
    r.smoothing = (1.0 - alpha) * frobenius_norm_sq(dh);
    r.constraint = 0.0;
    // closed form: trace route through the Laplacian
    const double fid = frobenius_dist_sq(h, x);
    const double tr = dot(h, spmm(ops.laplacian, h));
    r.value = alpha * fid + (1.0 - alpha) * tr;
    return r;
}

LowerObjectiveReport elastic_objective(const DenseMatrix& h, const DenseMatrix& x,
                                       const GraphOperators& ops, double lambda1, double lambda2,
                                       AnchorKind anchor) {
    if (h.rows != ops.n_nodes) throw std::invalid_argument("elastic_objective: row count mismatch");
    LowerObjectiveReport r;
    r.variant = Variant::elastic;
    r.anchor = anchor;
    r.fidelity = 0.5 * node_fidelity_sum(h, x);
    const DenseMatrix dh = spmm(ops.incidence, h);
    double l1 = 0.0;
    for (double v : dh.data) l1 += std::abs(v);
    r.smoothing = 0.5 * lambda1 * frobenius_norm_sq(dh) + lambda2 * l1;
    r.constraint = 0.0;
    const double fid = frobenius_dist_sq(h, x);
    const double tr = dot(h, spmm(ops.laplacian, h));
    r.value = 0.5 * fid + 0.5 * lambda1 * tr + lambda2 * l1;
    return r;
}

LowerObjectiveReport lower_objective_of(const ModelSpec& spec, const DenseMatrix& h,
                                        const DenseMatrix& x, const GraphOperators& ops,
                                        AnchorKind anchor) {
    switch (spec.variant) {
        case Variant::appnp:
        case Variant::gprgnn:
            return gsd_objective(h, x, ops, spec.alpha, anchor);
        case Variant::elastic:
            return elastic_objective(h, x, ops, spec.elastic.lambda1, spec.elastic.lambda2, anchor);
    }
    throw std::logic_error("lower_objective_of: unknown variant");
}

TheoremCheckResult theorem_check(const ModelSpec& spec, const GraphOperators& ops,
                                 const DenseMatrix& x_pre, const std::vector<double>& gamma,
                                 double tolerance) {
    TheoremCheckResult result;
    result.gpr_diagnostic_alpha = spec.variant == Variant::gprgnn;

    auto run_pass = [&](const DenseMatrix& anchor, std::vector<double>& trajectory) {
        StepObserver obs = [&](int, const DenseMatrix& h) {
            trajectory.push_back(lower_objective_of(spec, h, anchor, ops).value);
        };
        switch (spec.variant) {
            case Variant::appnp:
                return appnp_propagate(ops, anchor, spec.alpha, spec.k, &obs);
            case Variant::gprgnn: {
                const std::vector<double> g = gamma.empty() ? ppr_coefficients(spec.alpha, spec.k) : gamma;
                return gpr_propagate(ops, anchor, g, &obs);
            }
            case Variant::elastic:
                return elastic_propagate(ops, anchor, spec.elastic, spec.k, &obs);
        }
        return anchor;
    };

    const DenseMatrix h_transfer = run_pass(x_pre, result.transfer_trajectory);
    result.f_transfer = lower_objective_of(spec, h_transfer, x_pre, ops, AnchorKind::pre_output).value;
    const DenseMatrix h_cp = run_pass(h_transfer, result.cp_trajectory);
    result.f_cp = lower_objective_of(spec, h_cp, h_transfer, ops, AnchorKind::cp_anchor).value;
    result.holds = result.f_cp <= result.f_transfer + tolerance;
    return result;
}

TheoremCheckResult theorem_check(UgnnModel& model, const GraphOperators& ops,
                                 const FeatureMatrix& features, double tolerance) {
    const DenseMatrix x_pre = model.preprocess_eval(features);
    std::vector<double> gamma;
    if (model.spec().variant == Variant::gprgnn) {
        const DenseMatrix& g = model.gamma().value;
        gamma.assign(g.data.begin(), g.data.end());
    }
    return theorem_check(model.spec(), ops, x_pre, gamma, tolerance);
}

double mmd_value(const DenseMatrix& source, const DenseMatrix& target, const MmdConfig& cfg) {
    Tape tape;
    NodeId s = tape.constant(source);
    NodeId t = tape.constant(target);
    return tape.value(tape.mmd(s, t, cfg)).data[0];
}

NodeId upper_loss(Tape& tape, NodeId logits, const std::vector<int>& labels,
                  const std::vector<int>& train_mask, NodeId source_emb, NodeId target_emb, double xi,
                  const MmdConfig& cfg) {
    if (xi < 0.0) throw std::invalid_argument("upper_loss: xi must be nonnegative");
    NodeId ce = tape.softmax_cross_entropy(logits, labels, train_mask);
    if (xi == 0.0) return ce;
    NodeId align = tape.mmd(source_emb, target_emb, cfg);
    return tape.add_scaled(ce, align, 1.0, xi);
}

DomainPairDiagnostic make_domain_pair_diagnostic(double f_low_in_domain, double f_low_transfer,
                                                 double f_low_cp) {
    DomainPairDiagnostic d;
    d.f_low_in_domain = f_low_in_domain;
    d.f_low_transfer = f_low_transfer;
    d.f_low_cp = f_low_cp;
    const std::vector<double> raw = {f_low_in_domain, f_low_transfer, f_low_cp};
    const auto [mn, mx] = std::minmax_element(raw.begin(), raw.end());
    if (*mn == *mx) return d;  // degenerate: leave the normalized values at zero
    const std::vector<double> norm = minmax_normalize(raw);
    d.normalized_in_domain = norm[0];
    d.normalized_transfer = norm[1];
    d.normalized_cp = norm[2];
    return d;
}

std::vector<double> minmax_normalize(const std::vector<double>& values) {
    if (values.size() < 2) throw std::invalid_argument("minmax_normalize: need at least two values");
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mn == mx) throw std::invalid_argument("minmax_normalize: constant list");
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back((v - mn) / (mx - mn));
    return out;
}

}  // namespace ugcp
