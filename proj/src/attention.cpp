#include "pf/attention.hpp"

#include <cmath>

namespace pf {

namespace {
Value pv(const std::vector<Value>& p, int idx) { return p[static_cast<size_t>(idx)]; }


RpeMlpRef make_rpe(ParamStore& store, const std::string& prefix, int c_h, Rng& rng) {
    RpeMlpRef r;
    r.w1 = store.add(prefix + ".w1", init_weight(3, c_h, rng));
    r.b1 = store.add(prefix + ".b1", Tensor({c_h}));
    r.w2 = store.add(prefix + ".w2", init_weight(c_h, c_h, rng));
    r.b2 = store.add(prefix + ".b2", Tensor({c_h}));
    return r;
}
} // namespace

AttentionLayerRef make_attention_layer(ParamStore& store, const std::string& prefix, int c_in,
                                       int c_h, int c_k, int c_v, int heads, bool use_rpe,
                                       Rng& rng) {
    AttentionLayerRef layer;
    layer.c_in = c_in;
    layer.c_h = c_h;
    layer.c_k = c_k;
    layer.c_v = c_v;
    layer.heads = heads;
    layer.use_rpe = use_rpe;
    if (use_rpe) {
        layer.rpe_q = make_rpe(store, prefix + ".rpe_q", c_h, rng);
        layer.rpe_k = make_rpe(store, prefix + ".rpe_k", c_h, rng);
        layer.rpe_v = make_rpe(store, prefix + ".rpe_v", c_h, rng);
    }
    const int d = layer.lca_width();
    layer.edge_w = store.add(prefix + ".edge.w", init_weight(d, d, rng));
    layer.edge_b = store.add(prefix + ".edge.b", Tensor({d}));
    for (int h = 0; h < heads; ++h)
        layer.w_q.push_back(store.add(prefix + ".w_q" + std::to_string(h), init_weight(d, c_k, rng)));
    layer.w_k = store.add(prefix + ".w_k", init_weight(d, c_k, rng));
    layer.w_v = store.add(prefix + ".w_v", init_weight(d, c_v, rng));
    return layer;
}

Value rpe_apply(const std::vector<Value>& p, const RpeMlpRef& rpe, Value offsets) {
    Value h = relu(matmul(offsets, pv(p, rpe.w1)) + pv(p, rpe.b1));
    return matmul(h, pv(p, rpe.w2)) + pv(p, rpe.b2);
}

Value local_context_augment(Tape& tape, const std::vector<Value>& p, Value source_features,
                            const Tensor& positions, const NeighborhoodIndex& nbr,
                            const RpeMlpRef* rpe) {
    const Tensor& feats = source_features.val();
    if (feats.rank() != 2)
        throw DimensionError("local_context_augment: features must be [N,C], got " +
                             shape_str(feats.shape()));
    const int m = nbr.center_count();
    const int k = nbr.k;

    std::vector<int> nbr_rows(static_cast<size_t>(m) * k);
    std::vector<int> ctr_rows(static_cast<size_t>(m) * k);
    for (int i = 0; i < m; ++i)
        for (int s = 0; s < k; ++s) {
            nbr_rows[static_cast<size_t>(i) * k + s] = nbr.neighbor(i, s);
            ctr_rows[static_cast<size_t>(i) * k + s] = nbr.centers[static_cast<size_t>(i)];
        }

    Value f_j = gather_rows(source_features, nbr_rows);
    Value f_i = gather_rows(source_features, ctr_rows);
    std::vector<Value> parts = {f_j - f_i, f_i};

    if (rpe != nullptr) {
        Tensor offsets({m * k, 3});
        for (int i = 0; i < m; ++i) {
            const int c = nbr.centers[static_cast<size_t>(i)];
            for (int s = 0; s < k; ++s) {
                const int j = nbr.neighbor(i, s);
                for (int a = 0; a < 3; ++a)
                    offsets.at(i * k + s, a) = positions.at(j, a) - positions.at(c, a);
            }
        }
        parts.push_back(rpe_apply(p, *rpe, tape.leaf(std::move(offsets))));
    }

    Value rows = concat_axis(parts, 1); // [M*K, D]
    const int d = rows.val().dim(1);
    return reshape(rows, {m, k, d});
}

Value edgeconv_query(const std::vector<Value>& p, const AttentionLayerRef& layer, Value f_prime_q) {
    const Tensor& t = f_prime_q.val();
    if (t.rank() != 3 || t.dim(2) != layer.lca_width())
        throw DimensionError("edgeconv_query: expected [M,K," + std::to_string(layer.lca_width()) +
                             "], got " + shape_str(t.shape()));
    Value e = relu(matmul(f_prime_q, pv(p, layer.edge_w)) + pv(p, layer.edge_b));
    Value pooled = max_over_axis(e, 1); // [M, D]
    std::vector<Value> heads;
    heads.reserve(layer.w_q.size());
    for (int wq : layer.w_q) heads.push_back(matmul(pooled, pv(p, wq)));
    return heads.size() == 1 ? heads[0] : concat_axis(heads, 1);
}

std::pair<Value, Value> project_kv(const std::vector<Value>& p, const AttentionLayerRef& layer,
                                   Value f_prime_k, Value f_prime_v) {
    const int d = layer.lca_width();
    if (f_prime_k.val().rank() != 3 || f_prime_k.val().dim(2) != d ||
        f_prime_v.val().rank() != 3 || f_prime_v.val().dim(2) != d)
        throw DimensionError("project_kv: expected [M,K," + std::to_string(d) + "], got " +
                             shape_str(f_prime_k.val().shape()) + " and " +
                             shape_str(f_prime_v.val().shape()));
    return {matmul(f_prime_k, pv(p, layer.w_k)), matmul(f_prime_v, pv(p, layer.w_v))};
}

Value content_lambda(Value k_t, Value v_t) {
    return matmul(transpose_last2(softmax_axis(k_t, 1)), v_t);
}

Value lambda_apply(Value q, Value lambda) {
    const int m = q.val().dim(0);
    const int c_k = q.val().dim(1);
    const int c_v = lambda.val().dim(2);
    Value y = matmul(reshape(q, {m, 1, c_k}), lambda);
    return reshape(y, {m, c_v});
}

Tensor lambda_attention_per_point(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.rank() != 1 || k.rank() != 2 || v.rank() != 2 || q.dim(0) != k.dim(1) ||
        k.dim(0) != v.dim(0))
        throw DimensionError("lambda_attention_per_point: shapes " + shape_str(q.shape()) + ", " +
                             shape_str(k.shape()) + ", " + shape_str(v.shape()));
    const int kk = k.dim(0), c_k = k.dim(1), c_v = v.dim(1);
    // softmax over the neighbor axis, per key channel
    Tensor w({kk, c_k});
    for (int c = 0; c < c_k; ++c) {
        double m = k.at(0, c);
        for (int s = 1; s < kk; ++s) m = std::max(m, k.at(s, c));
        double sum = 0.0;
        for (int s = 0; s < kk; ++s) {
            w.at(s, c) = std::exp(k.at(s, c) - m);
            sum += w.at(s, c);
        }
        for (int s = 0; s < kk; ++s) w.at(s, c) /= sum;
    }
    Tensor lambda({c_k, c_v});
    for (int c = 0; c < c_k; ++c)
        for (int j = 0; j < c_v; ++j) {
            double acc = 0.0;
            for (int s = 0; s < kk; ++s) acc += w.at(s, c) * v.at(s, j);
            lambda.at(c, j) = acc;
        }
    Tensor y({c_v});
    for (int j = 0; j < c_v; ++j) {
        double acc = 0.0;
        for (int c = 0; c < c_k; ++c) acc += q[c] * lambda.at(c, j);
        y[j] = acc;
    }
    return y;
}

Tensor naive_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) ||
        k.dim(0) != v.dim(0))
        throw DimensionError("naive_attention: shapes " + shape_str(q.shape()) + ", " +
                             shape_str(k.shape()) + ", " + shape_str(v.shape()));
    const int n = q.dim(0), nk = k.dim(0), c_k = q.dim(1), c_v = v.dim(1);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(c_k));
    Tensor out({n, c_v});
    std::vector<double> row(static_cast<size_t>(nk));
    for (int i = 0; i < n; ++i) {
        double m = -1e300;
        for (int j = 0; j < nk; ++j) {
            double acc = 0.0;
            for (int c = 0; c < c_k; ++c) acc += q.at(i, c) * k.at(j, c);
            row[static_cast<size_t>(j)] = acc * inv_sqrt;
            m = std::max(m, row[static_cast<size_t>(j)]);
        }
        double sum = 0.0;
        for (int j = 0; j < nk; ++j) {
            row[static_cast<size_t>(j)] = std::exp(row[static_cast<size_t>(j)] - m);
            sum += row[static_cast<size_t>(j)];
        }
        for (int j = 0; j < nk; ++j) {
            const double wj = row[static_cast<size_t>(j)] / sum;
            for (int c = 0; c < c_v; ++c) out.at(i, c) += wj * v.at(j, c);
        }
    }
    return out;
}

Value attention_block_forward(Tape& tape, const std::vector<Value>& p,
                              const AttentionLayerRef& layer, Value source_features,
                              const Tensor& positions, const NeighborhoodIndex& nbr) {
    if (source_features.val().dim(1) != layer.c_in)
        throw DimensionError("attention_block_forward: feature width " +
                             std::to_string(source_features.val().dim(1)) + " != configured " +
                             std::to_string(layer.c_in));
    Value fq, fk, fv;
    if (layer.use_rpe) {
        fq = local_context_augment(tape, p, source_features, positions, nbr, &layer.rpe_q);
        fk = local_context_augment(tape, p, source_features, positions, nbr, &layer.rpe_k);
        fv = local_context_augment(tape, p, source_features, positions, nbr, &layer.rpe_v);
    } else {
        // without positional blocks the three paths coincide
        fq = fk = fv = local_context_augment(tape, p, source_features, positions, nbr, nullptr);
    }
    auto [k_t, v_t] = project_kv(p, layer, fk, fv);
    Value lambda = content_lambda(k_t, v_t);

    Value pooled = relu(matmul(fq, pv(p, layer.edge_w)) + pv(p, layer.edge_b));
    pooled = max_over_axis(pooled, 1);
    std::vector<Value> ys;
    ys.reserve(layer.w_q.size());
    for (int wq : layer.w_q) ys.push_back(lambda_apply(matmul(pooled, pv(p, wq)), lambda));
    return ys.size() == 1 ? ys[0] : concat_axis(ys, 1);
}

} // namespace pf
