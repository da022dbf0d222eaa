#include "pf/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace pf {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)) {
    for (int d : shape_)
        if (d < 1) throw DimensionError("tensor axis length must be >= 1, got shape " + shape_str(shape_));
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (int d : shape_)
        if (d < 1) throw DimensionError("tensor axis length must be >= 1, got shape " + shape_str(shape_));
    if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_))
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

// Row-partitioned parallelism only: every output row is produced by exactly
// one thread with an unchanged accumulation order, so results are
// bit-identical whatever the thread count.
void mm_nn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (m >= 64 && static_cast<std::int64_t>(k) * n >= 4096)
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void mm_nt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
    // transpose b once so the inner loops run unit-stride through mm_nn_acc
    std::vector<double> bt(static_cast<size_t>(n) * k);
    for (int l = 0; l < k; ++l)
        for (int j = 0; j < n; ++j)
            bt[static_cast<size_t>(j) * k + l] = b[static_cast<size_t>(l) * n + j];
    mm_nn_acc(a, bt.data(), c, m, n, k);
}

void mm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    // i blocked for locality; the (l, i, j) order keeps each c row owned by
    // one thread and accumulated over i in increasing order
    constexpr int kBlock = 256;
    for (int i0 = 0; i0 < m; i0 += kBlock) {
        const int i1 = std::min(m, i0 + kBlock);
#pragma omp parallel for schedule(static) if (k >= 32 && static_cast<std::int64_t>(i1 - i0) * n >= 4096)
        for (int l = 0; l < k; ++l) {
            double* crow = c + static_cast<size_t>(l) * n;
            for (int i = i0; i < i1; ++i) {
                const double av = a[static_cast<size_t>(i) * k + l];
                const double* brow = b + static_cast<size_t>(i) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
}

Tensor matmul2d(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Tensor c({a.dim(0), b.dim(1)});
    mm_nn_acc(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1));
    return c;
}

} // namespace pf
