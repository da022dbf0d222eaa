#pragma once
#include <utility>
#include <vector>

#include "pf/geometry.hpp"
#include "pf/params.hpp"
#include "pf/tape.hpp"

namespace pf {

// Two affine layers with a ReLU between, mapping relative offsets (3 wide)
// to C_h positional features. Query, key and value paths each own one.
struct RpeMlpRef {
    int w1 = -1, b1 = -1; // 3 -> C_h
    int w2 = -1, b2 = -1; // C_h -> C_h
};

// One attention block: neighbor-difference context concat, positional MLPs,
// a shared per-neighbor affine+ReLU pooled by max on the query path, then a
// per-point contraction against the softmax-normalized key/value summary.
// h query heads share one key/value pair; output width is h * C_v.
struct AttentionLayerRef {
    int c_in = 0, c_h = 0, c_k = 0, c_v = 0, heads = 1;
    bool use_rpe = true;
    RpeMlpRef rpe_q, rpe_k, rpe_v;
    int edge_w = -1, edge_b = -1; // D -> D affine before neighborhood max
    std::vector<int> w_q;         // per head, D x C_k
    int w_k = -1, w_v = -1;       // D x C_k, D x C_v

    int lca_width() const { return 2 * c_in + (use_rpe ? c_h : 0); }
    int out_width() const { return heads * c_v; }
};

AttentionLayerRef make_attention_layer(ParamStore& store, const std::string& prefix, int c_in,
                                       int c_h, int c_k, int c_v, int heads, bool use_rpe,
                                       Rng& rng);

Value rpe_apply(const std::vector<Value>& p, const RpeMlpRef& rpe, Value offsets);

// For every center i and neighbor j: row = [f_j - f_i, f_i, rpe(p_j - p_i)].
// Pass rpe == nullptr to drop the positional block. Output [M, K, D].
Value local_context_augment(Tape& tape, const std::vector<Value>& p, Value source_features,
                            const Tensor& positions, const NeighborhoodIndex& nbr,
                            const RpeMlpRef* rpe);

// Shared affine+ReLU per neighbor row, max over the K axis, then the h query
// projections concatenated: [M, K, D] -> [M, h*C_k].
Value edgeconv_query(const std::vector<Value>& p, const AttentionLayerRef& layer, Value f_prime_q);

// Row-wise linear maps of the flattened context: [M, K, D] -> ([M, K, C_k], [M, K, C_v]).
std::pair<Value, Value> project_kv(const std::vector<Value>& p, const AttentionLayerRef& layer,
                                   Value f_prime_k, Value f_prime_v);

// softmax(K)^T V per center: [M, K, C_k] x [M, K, C_v] -> [M, C_k, C_v].
// The softmax runs over the neighbor axis, independently per key channel.
Value content_lambda(Value k_t, Value v_t);

// q [M, C_k] against lambda [M, C_k, C_v] -> [M, C_v].
Value lambda_apply(Value q, Value lambda);

// Single-point form of the contraction, plain tensors. q [C_k], k [K, C_k],
// v [K, C_v] -> [C_v].
Tensor lambda_attention_per_point(const Tensor& q, const Tensor& k, const Tensor& v);

// Reference quadratic attention softmax(Q K^T / sqrt(C_k)) V, plain tensors.
// Kept as the cost baseline; it normalizes over points rather than over key
// channels, so it is not numerically interchangeable with the lambda form.
Tensor naive_attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Whole block: context augmentation per path, query convolution, key/value
// projection, per-head contraction, heads concatenated. [M, h*C_v].
Value attention_block_forward(Tape& tape, const std::vector<Value>& p,
                              const AttentionLayerRef& layer, Value source_features,
                              const Tensor& positions, const NeighborhoodIndex& nbr);

} // namespace pf
