#include "ugcp/tape.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ugcp/rng.hpp"

namespace ugcp {

NodeId Tape::push(DenseMatrix value, bool needs_grad, Parameter* bound) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.bound = bound;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

void Tape::check(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size()))
        throw std::invalid_argument("tape: bad node id");
}

DenseMatrix& Tape::scratch_for(std::vector<DenseMatrix>& scratch, const Node& node, NodeId id) {
    DenseMatrix& g = scratch[id];
    if (g.size() == 0 && !(node.value.rows == 0 || node.value.cols == 0))
        g = DenseMatrix(node.value.rows, node.value.cols);
    if (g.rows != node.value.rows || g.cols != node.value.cols)
        g = DenseMatrix(node.value.rows, node.value.cols);
    return g;
}

NodeId Tape::constant(DenseMatrix v) { return push(std::move(v), false); }
NodeId Tape::input(DenseMatrix v) { return push(std::move(v), true); }

NodeId Tape::param(Parameter& p) {
    if (!p.grad.same_shape(p.value)) throw std::invalid_argument("param: grad shape mismatch");
    return push(p.value, true, &p);
}

const DenseMatrix& Tape::grad(NodeId id) const {
    check(id);
    if (nodes_[id].grad.size() == 0)
        throw std::runtime_error("tape: gradient not populated for node " + std::to_string(id));
    return nodes_[id].grad;
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    check(a);
    check(b);
    const DenseMatrix& av = nodes_[a].value;
    const DenseMatrix& bv = nodes_[b].value;
    if (av.cols != bv.rows) throw std::invalid_argument("matmul: dimension mismatch");
    NodeId out = push(ugcp::matmul(av, bv), nodes_[a].needs_grad || nodes_[b].needs_grad);
    records_.push_back({out, [a, b, out](Tape& t, std::vector<DenseMatrix>& s) {
                            const DenseMatrix& go = s[out];
                            if (t.nodes_[a].needs_grad)
                                add_scaled_in_place(scratch_for(s, t.nodes_[a], a),
                                                    ugcp::matmul(go, ugcp::transpose(t.nodes_[b].value)), 1.0);
                            if (t.nodes_[b].needs_grad)
                                add_scaled_in_place(scratch_for(s, t.nodes_[b], b),
                                                    ugcp::matmul(ugcp::transpose(t.nodes_[a].value), go), 1.0);
                        }});
    return out;
}

NodeId Tape::spmm(const SparseMatrixCSR& s_mat, const SparseMatrixCSR& s_transposed, NodeId h) {
    check(h);
    const DenseMatrix& hv = nodes_[h].value;
    if (s_mat.cols != hv.rows) throw std::invalid_argument("spmm: dimension mismatch");
    if (s_transposed.rows != s_mat.cols || s_transposed.cols != s_mat.rows)
        throw std::invalid_argument("spmm: transpose shape mismatch");
    NodeId out = push(ugcp::spmm(s_mat, hv), nodes_[h].needs_grad);
    const SparseMatrixCSR* st = &s_transposed;  // operators outlive the tape
    records_.push_back({out, [h, out, st](Tape& t, std::vector<DenseMatrix>& s) {
                            if (!t.nodes_[h].needs_grad) return;
                            add_scaled_in_place(scratch_for(s, t.nodes_[h], h), ugcp::spmm(*st, s[out]), 1.0);
                        }});
    return out;
}

NodeId Tape::add_scaled(NodeId x, NodeId y, double a, double b) {
    check(x);
    check(y);
    if (!nodes_[x].value.same_shape(nodes_[y].value))
        throw std::invalid_argument("add_scaled: shape mismatch");
    NodeId out = push(ugcp::add_scaled(nodes_[x].value, nodes_[y].value, a, b),
                      nodes_[x].needs_grad || nodes_[y].needs_grad);
    records_.push_back({out, [x, y, a, b, out](Tape& t, std::vector<DenseMatrix>& s) {
                            if (t.nodes_[x].needs_grad)
                                add_scaled_in_place(scratch_for(s, t.nodes_[x], x), s[out], a);
                            if (t.nodes_[y].needs_grad)
                                add_scaled_in_place(scratch_for(s, t.nodes_[y], y), s[out], b);
                        }});
    return out;
}

NodeId Tape::relu(NodeId x) {
    check(x);
    const DenseMatrix& xv = nodes_[x].value;
    DenseMatrix v(xv.rows, xv.cols);
    for (std::size_t i = 0; i < xv.size(); ++i) v.data[i] = xv.data[i] > 0.0 ? xv.data[i] : 0.0;
    NodeId out = push(std::move(v), nodes_[x].needs_grad);
    records_.push_back({out, [x, out](Tape& t, std::vector<DenseMatrix>& s) {
                            if (!t.nodes_[x].needs_grad) return;
                            DenseMatrix& gx = scratch_for(s, t.nodes_[x], x);
                            const DenseMatrix& go = s[out];
                            const DenseMatrix& ov = t.nodes_[out].value;
                            for (std::size_t i = 0; i < ov.size(); ++i)
                                if (ov.data[i] > 0.0) gx.data[i] += go.data[i];
                        }});
    return out;
}

NodeId Tape::dropout(NodeId x, double rate, std::uint64_t seed, bool training) {
    check(x);
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    if (!training || rate == 0.0) return x;  // identity, no record
    const DenseMatrix& xv = nodes_[x].value;
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double scale = 1.0 / (1.0 - rate);
    auto mult = std::make_shared<std::vector<double>>(xv.size());
    DenseMatrix v(xv.rows, xv.cols);
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double m = uni(rng) < rate ? 0.0 : scale;
        (*mult)[i] = m;
        v.data[i] = xv.data[i] * m;
    }
    NodeId out = push(std::move(v), nodes_[x].needs_grad);
    records_.push_back({out, [x, out, mult](Tape& t, std::vector<DenseMatrix>& s) {
                            if (!t.nodes_[x].needs_grad) return;
                            DenseMatrix& gx = scratch_for(s, t.nodes_[x], x);
                            const DenseMatrix& go = s[out];
                            for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += go.data[i] * (*mult)[i];
                        }});
    return out;
}

NodeId Tape::row_l2_clip(NodeId z, double t_threshold) {
    check(z);
    if (t_threshold < 0.0) throw std::invalid_argument("row_l2_clip: negative threshold");
    const DenseMatrix& zv = nodes_[z].value;
    DenseMatrix v(zv.rows, zv.cols);
    auto norms = std::make_shared<std::vector<double>>(zv.rows, 0.0);
    for (int i = 0; i < zv.rows; ++i) {
        double nsq = 0.0;
        for (int j = 0; j < zv.cols; ++j) nsq += zv(i, j) * zv(i, j);
        const double n = std::sqrt(nsq);
        (*norms)[i] = n;
        const double f = n > t_threshold ? t_threshold / n : 1.0;  // boundary counts as unclipped
        for (int j = 0; j < zv.cols; ++j) v(i, j) = zv(i, j) * f;
    }
    NodeId out = push(std::move(v), nodes_[z].needs_grad);
    records_.push_back({out, [z, out, t_threshold, norms](Tape& t, std::vector<DenseMatrix>& s) {
                            if (!t.nodes_[z].needs_grad) return;
                            DenseMatrix& gz = scratch_for(s, t.nodes_[z], z);
                            const DenseMatrix& go = s[out];
                            const DenseMatrix& zv = t.nodes_[z].value;
                            for (int i = 0; i < zv.rows; ++i) {
                                const double n = (*norms)[i];
                                if (n <= t_threshold) {
                                    for (int j = 0; j < zv.cols; ++j) gz(i, j) += go(i, j);
                                } else {
                                    // projection Jacobian (t/n) (I - zz^T / n^2)
                                    double zg = 0.0;
                                    for (int j = 0; j < zv.cols; ++j) zg += zv(i, j) * go(i, j);
                                    const double f = t_threshold / n;
                                    const double c = zg / (n * n);
                                    for (int j = 0; j < zv.cols; ++j)
                                        gz(i, j) += f * (go(i, j) - c * zv(i, j));
                                }
                            }
                        }});
    return out;
}

NodeId Tape::softmax_cross_entropy(NodeId logits, const std::vector<int>& labels,
                                   const std::vector<int>& mask) {
    check(logits);
    if (mask.empty()) throw std::invalid_argument("softmax_cross_entropy: empty mask");
    const DenseMatrix& lv = nodes_[logits].value;
    const int classes = lv.cols;
    auto probs = std::make_shared<DenseMatrix>(static_cast<int>(mask.size()), classes);
    auto rows = std::make_shared<std::vector<int>>(mask);
    auto labs = std::make_shared<std::vector<int>>();
    labs->reserve(mask.size());
    double loss = 0.0;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        const int r = mask[k];
        if (r < 0 || r >= lv.rows) throw std::invalid_argument("softmax_cross_entropy: mask row out of range");
        const int y = labels[r];
        if (y < 0 || y >= classes) throw std::invalid_argument("softmax_cross_entropy: invalid class index");
        labs->push_back(y);
        double mx = lv(r, 0);
        for (int c = 1; c < classes; ++c) mx = std::max(mx, lv(r, c));
        double denom = 0.0;
        for (int c = 0; c < classes; ++c) denom += std::exp(lv(r, c) - mx);
        const double lse = mx + std::log(denom);
        loss += lse - lv(r, y);
        for (int c = 0; c < classes; ++c) (*probs)(static_cast<int>(k), c) = std::exp(lv(r, c) - mx) / denom;
    }
    loss /= static_cast<double>(mask.size());
    DenseMatrix v(1, 1);
    v.data[0] = loss;
    NodeId out = push(std::move(v), nodes_[logits].needs_grad);
    records_.push_back({out, [logits, out, probs, rows, labs](Tape& t, std::vector<DenseMatrix>& s) {
                            if (!t.nodes_[logits].needs_grad) return;
                            DenseMatrix& gl = scratch_for(s, t.nodes_[logits], logits);
                            const double g = s[out].data[0] / static_cast<double>(rows->size());
                            const int classes = gl.cols;
                            for (std::size_t k = 0; k < rows->size(); ++k) {
                                const int r = (*rows)[k];
                                const int y = (*labs)[k];
                                for (int c = 0; c < classes; ++c)
                                    gl(r, c) += g * ((*probs)(static_cast<int>(k), c) - (c == y ? 1.0 : 0.0));
                            }
                        }});
    return out;
}

namespace {

std::vector<int> subsample_rows(int n, int cap, std::uint64_t seed) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (cap <= 0 || n <= cap) return idx;
    auto rng = make_rng(seed);
    // partial Fisher-Yates, then sort for cache-friendly deterministic order
    for (int i = 0; i < cap; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double sq_dist(const DenseMatrix& a, int i, const DenseMatrix& b, int j) {
    const double* x = a.row_ptr(i);
    const double* y = b.row_ptr(j);
    double d = 0.0;
    for (int c = 0; c < a.cols; ++c) {
        const double e = x[c] - y[c];
        d += e * e;
    }
    return d;
}

}  // namespace

NodeId Tape::mmd(NodeId source, NodeId target, const MmdConfig& cfg) {
    check(source);
    check(target);
    const DenseMatrix& sv = nodes_[source].value;
    const DenseMatrix& tv = nodes_[target].value;
    if (sv.rows == 0 || tv.rows == 0) throw std::invalid_argument("mmd: empty input");
    if (sv.cols != tv.cols) throw std::invalid_argument("mmd: embedding width mismatch");

    auto si = std::make_shared<std::vector<int>>(
        subsample_rows(sv.rows, cfg.subsample_cap, derive_seed(cfg.subsample_seed, 1)));
    auto ti = std::make_shared<std::vector<int>>(
        subsample_rows(tv.rows, cfg.subsample_cap, derive_seed(cfg.subsample_seed, 2)));
    const int ns = static_cast<int>(si->size());
    const int nt = static_cast<int>(ti->size());

    // median heuristic over the pooled sample (pairs i < j); the bandwidth is
    // a constant for differentiation purposes
    double bandwidth = cfg.fixed_bandwidth;
    if (!(bandwidth > 0.0)) {
        std::vector<double> dists;
        dists.reserve(static_cast<std::size_t>(ns + nt) * (ns + nt - 1) / 2);
        auto pooled_row = [&](int k) -> std::pair<const DenseMatrix*, int> {
            return k < ns ? std::make_pair(&sv, (*si)[k]) : std::make_pair(&tv, (*ti)[k - ns]);
        };
        for (int a = 0; a < ns + nt; ++a) {
            auto [ma, ra] = pooled_row(a);
            for (int b = a + 1; b < ns + nt; ++b) {
                auto [mb, rb] = pooled_row(b);
                dists.push_back(sq_dist(*ma, ra, *mb, rb));
            }
        }
        bandwidth = 1.0;
        if (!dists.empty()) {
            const std::size_t mid = dists.size() / 2;
            std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
            bandwidth = dists[mid];
            if (!(bandwidth > 0.0)) bandwidth = 1.0;
        }
    }

    double sum_ss = 0.0, sum_tt = 0.0, sum_st = 0.0;
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < ns; ++j) sum_ss += std::exp(-sq_dist(sv, (*si)[i], sv, (*si)[j]) / bandwidth);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < nt; ++j) sum_tt += std::exp(-sq_dist(tv, (*ti)[i], tv, (*ti)[j]) / bandwidth);
    for (int i = 0; i < ns; ++i)
        for (int j = 0; j < nt; ++j) sum_st += std::exp(-sq_dist(sv, (*si)[i], tv, (*ti)[j]) / bandwidth);
    const double value = sum_ss / (static_cast<double>(ns) * ns) + sum_tt / (static_cast<double>(nt) * nt) -
                         2.0 * sum_st / (static_cast<double>(ns) * nt);

    DenseMatrix v(1, 1);
    v.data[0] = value;
    NodeId out = push(std::move(v), nodes_[source].needs_grad || nodes_[target].needs_grad);
    records_.push_back({out, [source, target, out, si, ti, bandwidth](Tape& t, std::vector<DenseMatrix>& s) {
                            const DenseMatrix& sv = t.nodes_[source].value;
                            const DenseMatrix& tv = t.nodes_[target].value;
                            const std::vector<int>& srows = *si;
                            const std::vector<int>& trows = *ti;
                            const int ns = static_cast<int>(srows.size());
                            const int nt = static_cast<int>(trows.size());
                            const int d = sv.cols;
                            const double g = s[out].data[0];
                            const double c_ss = -4.0 * g / (bandwidth * ns * ns);
                            const double c_tt = -4.0 * g / (bandwidth * nt * nt);
                            const double c_st = 4.0 * g / (bandwidth * ns * nt);
                            if (t.nodes_[source].needs_grad) {
                                DenseMatrix& gs = scratch_for(s, t.nodes_[source], source);
                                for (int i = 0; i < ns; ++i) {
                                    double* grow = gs.row_ptr(srows[i]);
                                    const double* xi = sv.row_ptr(srows[i]);
                                    for (int j = 0; j < ns; ++j) {
                                        const double* xj = sv.row_ptr(srows[j]);
                                        const double k = std::exp(-sq_dist(sv, srows[i], sv, srows[j]) / bandwidth);
                                        for (int c = 0; c < d; ++c) grow[c] += c_ss * k * (xi[c] - xj[c]);
                                    }
                                    for (int j = 0; j < nt; ++j) {
                                        const double* yj = tv.row_ptr(trows[j]);
                                        const double k = std::exp(-sq_dist(sv, srows[i], tv, trows[j]) / bandwidth);
                                        for (int c = 0; c < d; ++c) grow[c] += c_st * k * (xi[c] - yj[c]);
                                    }
                                }
                            }
                            if (t.nodes_[target].needs_grad) {
                                DenseMatrix& gt = scratch_for(s, t.nodes_[target], target);
                                for (int i = 0; i < nt; ++i) {
                                    double* grow = gt.row_ptr(trows[i]);
                                    const double* yi = tv.row_ptr(trows[i]);
                                    for (int j = 0; j < nt; ++j) {
                                        const double* yj = tv.row_ptr(trows[j]);
                                        const double k = std::exp(-sq_dist(tv, trows[i], tv, trows[j]) / bandwidth);
                                        for (int c = 0; c < d; ++c) grow[c] += c_tt * k * (yi[c] - yj[c]);
                                    }
                                    for (int j = 0; j < ns; ++j) {
                                        const double* xj = sv.row_ptr(srows[j]);
                                        const double k = std::exp(-sq_dist(tv, trows[i], sv, srows[j]) / bandwidth);
                                        for (int c = 0; c < d; ++c) grow[c] += c_st * k * (yi[c] - xj[c]);
                                    }
                                }
                            }
                        }});
    return out;
}

NodeId Tape::scale_by_entry(NodeId x, NodeId coeff, int index) {
    check(x);
    check(coeff);
    const DenseMatrix& cv = nodes_[coeff].value;
    if (cv.rows != 1 || index < 0 || index >= cv.cols)
        throw std::invalid_argument("scale_by_entry: coefficient index out of range");
    const double c = cv(0, index);
    const DenseMatrix& xv = nodes_[x].value;
    DenseMatrix v(xv.rows, xv.cols);
    for (std::size_t i = 0; i < xv.size(); ++i) v.data[i] = c * xv.data[i];
    NodeId out = push(std::move(v), nodes_[x].needs_grad || nodes_[coeff].needs_grad);
    records_.push_back({out, [x, coeff, index, c, out](Tape& t, std::vector<DenseMatrix>& s) {
                            const DenseMatrix& go = s[out];
                            if (t.nodes_[x].needs_grad)
                                add_scaled_in_place(scratch_for(s, t.nodes_[x], x), go, c);
                            if (t.nodes_[coeff].needs_grad) {
                                DenseMatrix& gc = scratch_for(s, t.nodes_[coeff], coeff);
                                gc(0, index) += dot(t.nodes_[x].value, go);
                            }
                        }});
    return out;
}

void Tape::backward(NodeId root) {
    check(root);
    const DenseMatrix& rv = nodes_[root].value;
    if (rv.rows != 1 || rv.cols != 1) throw std::invalid_argument("backward: root must be a scalar node");
    std::vector<DenseMatrix> scratch(nodes_.size());
    scratch[root] = DenseMatrix(1, 1);
    scratch[root].data[0] = 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        if (!nodes_[it->out].needs_grad) continue;
        if (scratch[it->out].size() == 0) continue;  // not on a path to the root
        it->pull(*this, scratch);
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (scratch[i].size() == 0 || !nodes_[i].needs_grad) continue;
        Node& n = nodes_[i];
        if (n.grad.size() == 0) n.grad = DenseMatrix(n.value.rows, n.value.cols);
        add_scaled_in_place(n.grad, scratch[i], 1.0);
        if (n.bound) add_scaled_in_place(n.bound->grad, scratch[i], 1.0);
    }
}

}  // namespace ugcp
