#include "ugcp/dense.hpp"

#include <cmath>

namespace ugcp {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions do not match");
    DenseMatrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

DenseMatrix add_scaled(const DenseMatrix& x, const DenseMatrix& y, double alpha, double beta) {
    if (!x.same_shape(y)) throw std::invalid_argument("add_scaled: shape mismatch");
    DenseMatrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = alpha * x.data[i] + beta * y.data[i];
    return out;
}

void scale_in_place(DenseMatrix& x, double s) {
    for (double& v : x.data) v *= s;
}

void add_scaled_in_place(DenseMatrix& acc, const DenseMatrix& x, double s) {
    if (!acc.same_shape(x)) throw std::invalid_argument("add_scaled_in_place: shape mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) acc.data[i] += s * x.data[i];
}

double dot(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double frobenius_norm_sq(const DenseMatrix& a) { return dot(a, a); }

double frobenius_dist_sq(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("frobenius_dist_sq: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

bool all_finite(const DenseMatrix& a) {
    for (double v : a.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace ugcp
