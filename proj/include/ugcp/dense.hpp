#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ugcp {

// Row-major dense matrix of 64-bit floats. Everything numeric in this
// project runs through this type; no expression templates, no views.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::invalid_argument("DenseMatrix: negative dimension");
    }

    static DenseMatrix zeros(int r, int c) { return DenseMatrix(r, c); }
    static DenseMatrix identity(int n) {
        DenseMatrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    const double* row_ptr(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
    double* row_ptr(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }

    bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
    std::size_t size() const { return data.size(); }
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);

// out = alpha*x + beta*y, shapes must match.
DenseMatrix add_scaled(const DenseMatrix& x, const DenseMatrix& y, double alpha, double beta);

void scale_in_place(DenseMatrix& x, double s);
void add_scaled_in_place(DenseMatrix& acc, const DenseMatrix& x, double s);

double dot(const DenseMatrix& a, const DenseMatrix& b);
double frobenius_norm_sq(const DenseMatrix& a);
double frobenius_dist_sq(const DenseMatrix& a, const DenseMatrix& b);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
bool all_finite(const DenseMatrix& a);

}  // namespace ugcp
