#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "pf/errors.hpp"

namespace pf {

// Dense row-major tensor of 64-bit floats. The single numeric carrier for
// the whole library; tensors handed to the tape are treated as immutable.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor full(std::vector<int> shape, double v);
    static Tensor identity(int n);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

    double& at(int i) { return data_[static_cast<size_t>(i)]; }
    double at(int i) const { return data_[static_cast<size_t>(i)]; }
    double& at(int i, int j) {
        return data_[static_cast<size_t>(i) * shape_[1] + j];
    }
    double at(int i, int j) const {
        return data_[static_cast<size_t>(i) * shape_[1] + j];
    }
    double& at(int i, int j, int k) {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }
    double at(int i, int j, int k) const {
        return data_[(static_cast<size_t>(i) * shape_[1] + j) * shape_[2] + k];
    }

    bool all_finite() const;
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);
std::int64_t shape_numel(const std::vector<int>& shape);

// Raw 2-D kernels on flat row-major buffers. These are the only inner loops
// in the project; everything batched dispatches onto them.
//
//   c[m,n] += a[m,k] * b[k,n]
void mm_nn_acc(const double* a, const double* b, double* c, int m, int k, int n);
//   c[m,k] += a[m,n] * b[k,n]^T
void mm_nt_acc(const double* a, const double* b, double* c, int m, int n, int k);
//   c[k,n] += a[m,k]^T * b[m,n]
void mm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n);

// Strict 2-D product (fresh output). Dimension-checked.
Tensor matmul2d(const Tensor& a, const Tensor& b);

} // namespace pf
