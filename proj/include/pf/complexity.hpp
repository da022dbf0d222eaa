#pragma once
#include <cstdint>
#include <vector>

#include "pf/tensor.hpp"

namespace pf {

// Multiply-add and exponential tallies for the attention cores. Softmax
// exponentials are counted apart from the multiply-adds.
struct FlopCounter {
    std::int64_t madds = 0;
    std::int64_t exps = 0;
};

// Closed-form multiply-add count of the per-point contraction core: per head,
// summary construction N*K*C_k*C_v plus query contraction N*C_k*C_v. Linear
// in N.
std::int64_t count_flops_lambda(int n, int k, int c_k, int c_v, int heads);

// Closed-form multiply-add count of the quadratic core: N^2*C_k for the
// score matrix plus N^2*C_v for the value weighting.
std::int64_t count_flops_naive(int n, int c_k, int c_v);

// Instrumented kernels. Shapes: q[heads][N*C_k], k[N*K*C_k], v[N*K*C_v] for
// the linear core; q/k [N*C_k], v [N*C_v] for the quadratic one. The counter
// increments mirror the loop structure exactly, so an instrumented run must
// reproduce the closed forms.
Tensor lambda_attention_kernel(const std::vector<Tensor>& q_heads, const Tensor& k,
                               const Tensor& v, int n, int kk, FlopCounter* counter);
Tensor naive_attention_kernel(const Tensor& q, const Tensor& k, const Tensor& v,
                              FlopCounter* counter);

struct BenchConfig {
    int k = 16;
    int c_k = 32;
    int c_v = 16;
    int heads = 8;
    int runs = 3;
};

struct BenchRow {
    int n = 0;
    bool lambda_mode = true;
    std::int64_t flops = 0;
    double wall_ms = 0.0; // median over runs
};

// Times the requested core at each N with seeded inputs; wall_ms is the
// median of cfg.runs repetitions.
std::vector<BenchRow> run_bench(const std::vector<int>& n_list, bool lambda_mode,
                                const BenchConfig& cfg, std::uint64_t seed);

// Least-squares slope of log(wall) against log(N).
double fit_log_exponent(const std::vector<BenchRow>& rows);

} // namespace pf
