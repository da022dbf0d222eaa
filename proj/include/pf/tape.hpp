#pragma once
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "pf/tensor.hpp"

namespace pf {

class Tape;

// Handle to a tape node. Cheap to copy; the tensor itself lives on the tape.
struct Value {
    Tape* tape = nullptr;
    int id = -1;

    const Tensor& val() const;
    const std::vector<int>& shape() const;
};

// Define-by-run reverse-mode tape. Rebuilt for every forward pass. Node ids
// are topologically ordered by construction (inputs of node k have ids < k);
// backward visits nodes exactly once in reverse id order. Single-threaded.
//
// The differentiable op set is closed: matmul (plain and batched), softmax,
// relu, max/mean reduction, concat, add, sub, scale, elementwise mul, log,
// exp, plus gather-by-index (gradient flows to the gathered values, never to
// the indices) and the index-permutation specials reshape and transpose.
// Anything else is composed from these.
class Tape {
public:
    enum class Op {
        Leaf,
        Add,
        Sub,
        Mul,
        Scale,
        MatMul,
        Softmax,
        Relu,
        Log,
        Exp,
        MaxReduce,
        MeanReduce,
        Concat,
        GatherRows,
        Reshape,
        Transpose2,
    };

    struct Node {
        Op op = Op::Leaf;
        std::vector<int> inputs;
        Tensor value;
        int axis = -1;           // Softmax/MaxReduce/MeanReduce/Concat
        double scalar = 0.0;     // Scale
        bool trainable = false;  // Leaf
        std::vector<std::int64_t> arg; // MaxReduce argmax / GatherRows indices
    };

    Value leaf(Tensor v);
    Value param(Tensor v);

    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value scale(Value a, double s);
    Value matmul(Value a, Value b);
    Value softmax_axis(Value x, int axis);
    Value relu(Value x);
    Value log(Value x);
    Value exp(Value x);
    Value max_over_axis(Value x, int axis);
    Value mean_over_axis(Value x, int axis);
    Value concat_axis(const std::vector<Value>& xs, int axis);
    Value gather_rows(Value x, const std::vector<int>& rows);
    Value reshape(Value x, std::vector<int> new_shape);
    Value transpose_last2(Value x);

    // dLoss/dtheta for every trainable leaf. Loss must be scalar.
    std::map<int, Tensor> backward(int loss_id) const;

    const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    const std::vector<int>& params() const { return params_; }
    int size() const { return static_cast<int>(nodes_.size()); }

private:
    Value push(Node n);
    std::vector<Node> nodes_;
    std::vector<int> params_;
};

// -- composition helpers -----------------------------------------------

Value operator+(Value a, Value b);
Value operator-(Value a, Value b);
Value operator*(Value a, Value b); // elementwise

Value matmul(Value a, Value b);
Value softmax_axis(Value x, int axis);
Value relu(Value x);
Value log_of(Value x);
Value exp_of(Value x);
Value max_over_axis(Value x, int axis);
Value mean_over_axis(Value x, int axis);
Value sum_over_axis(Value x, int axis); // scale(mean, axis length)
Value concat_axis(const std::vector<Value>& xs, int axis);
Value gather_rows(Value x, const std::vector<int>& rows);
Value reshape(Value x, std::vector<int> new_shape);
Value transpose_last2(Value x);
Value scale(Value x, double s);
Value mean_all(Value x); // scalar [1]
Value sum_all(Value x);  // scalar [1]

// Max over coordinates of |g_ad - g_fd| / max(1, |g_ad|, |g_fd|), where g_fd
// is the central difference (f(t+eps e_i) - f(t-eps e_i)) / 2eps. Throws
// NumericError on non-finite f values, ArgumentError on eps <= 0 or a
// gradient shape mismatch.
double finite_difference_check(const std::function<double(const Tensor&)>& f,
                               const Tensor& theta, double eps,
                               const Tensor& grad_ad);

} // namespace pf
