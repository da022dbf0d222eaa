#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "pf/attention.hpp"
#include "pf/complexity.hpp"
#include "pf/rng.hpp"

using namespace pf;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

PointCloud random_cloud(int n, Rng& rng) {
    PointCloud c;
    c.positions = random_tensor({n, 3}, rng);
    return c;
}

// Manual two-layer evaluation of one positional MLP on a single offset.
Tensor rpe_reference(const ParamStore& store, const RpeMlpRef& rpe, const double off[3]) {
    const Tensor& w1 = store.tensor(rpe.w1);
    const Tensor& b1 = store.tensor(rpe.b1);
    const Tensor& w2 = store.tensor(rpe.w2);
    const Tensor& b2 = store.tensor(rpe.b2);
    const int ch = w1.dim(1);
    Tensor h({ch});
    for (int j = 0; j < ch; ++j) {
        double acc = b1[j];
        for (int a = 0; a < 3; ++a) acc += off[a] * w1.at(a, j);
        h[j] = acc > 0 ? acc : 0;
    }
    Tensor out({ch});
    for (int j = 0; j < ch; ++j) {
        double acc = b2[j];
        for (int c = 0; c < ch; ++c) acc += h[c] * w2.at(c, j);
        out[j] = acc;
    }
    return out;
}

// Independent two-loop evaluation of the per-point contraction.
Tensor two_loop_reference(const Tensor& q, const Tensor& k, const Tensor& v) {
    const int kk = k.dim(0), c_k = k.dim(1), c_v = v.dim(1);
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
    Tensor y({c_v});
    for (int j = 0; j < c_v; ++j) {
        double outer = 0.0;
        for (int c = 0; c < c_k; ++c) {
            double lam = 0.0;
            for (int s = 0; s < kk; ++s) lam += w.at(s, c) * v.at(s, j);
            outer += q[c] * lam;
        }
        y[j] = outer;
    }
    return y;
}

struct BlockFixture {
    ParamStore store;
    AttentionLayerRef layer;
    PointCloud cloud;
    NeighborhoodIndex nbr;
    int m;

    BlockFixture(int n, int m_, int k, int c_in, int c_h, int c_k, int c_v, int heads,
                 bool use_rpe, std::uint64_t seed)
        : m(m_) {
        Rng rng(seed);
        layer = make_attention_layer(store, "blk", c_in, c_h, c_k, c_v, heads, use_rpe, rng);
        cloud = random_cloud(n, rng);
        cloud.features = random_tensor({n, c_in}, rng);
        nbr = knn(cloud, farthest_point_sample(cloud, m_), k);
    }

    Value forward(Tape& tape, std::vector<Value>& p) {
        p = bind_params(tape, store);
        Value feats = tape.leaf(cloud.features);
        return attention_block_forward(tape, p, layer, feats, cloud.positions, nbr);
    }
};

} // namespace

TEST_CASE("local_context_augment self-only rows and constant positional block") {
    Rng rng(3);
    ParamStore store;
    AttentionLayerRef layer = make_attention_layer(store, "l", 2, 4, 3, 3, 1, true, rng);

    PointCloud cloud = random_cloud(6, rng);
    cloud.features = random_tensor({6, 2}, rng);
    NeighborhoodIndex nbr = knn(cloud, {0, 3, 5}, 1);

    Tape tape;
    auto p = bind_params(tape, store);
    Value out = local_context_augment(tape, p, tape.leaf(cloud.features), cloud.positions, nbr,
                                      &layer.rpe_q);
    CHECK(out.shape() == std::vector<int>{3, 1, 8});
    const double zero_off[3] = {0, 0, 0};
    Tensor rpe0 = rpe_reference(store, layer.rpe_q, zero_off);
    for (int i = 0; i < 3; ++i) {
        const int c = nbr.centers[static_cast<size_t>(i)];
        for (int j = 0; j < 2; ++j) {
            CHECK(out.val().at(i, 0, j) == 0.0);                          // f_j - f_i
            CHECK(out.val().at(i, 0, 2 + j) == cloud.features.at(c, j));  // f_i
        }
        for (int j = 0; j < 4; ++j) CHECK(out.val().at(i, 0, 4 + j) == doctest::Approx(rpe0[j]));
    }

    // zero MLP weights: positional block equals the bias image of 0 on every
    // row, regardless of the offset
    for (int idx : {layer.rpe_q.w1, layer.rpe_q.w2}) {
        Tensor& w = store.tensor(idx);
        for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = 0.0;
    }
    Tape tape2;
    auto p2 = bind_params(tape2, store);
    NeighborhoodIndex wide = knn(cloud, {0, 3}, 4);
    Value out2 = local_context_augment(tape2, p2, tape2.leaf(cloud.features), cloud.positions,
                                       wide, &layer.rpe_q);
    Tensor img = rpe_reference(store, layer.rpe_q, zero_off);
    for (int i = 0; i < 2; ++i)
        for (int s = 0; s < 4; ++s)
            for (int j = 0; j < 4; ++j)
                CHECK(out2.val().at(i, s, 4 + j) == doctest::Approx(img[j]));
}

TEST_CASE("local_context_augment matches per-index recomputation") {
    Rng rng(5);
    ParamStore store;
    AttentionLayerRef layer = make_attention_layer(store, "l", 5, 6, 4, 4, 2, true, rng);
    PointCloud cloud = random_cloud(20, rng);
    cloud.features = random_tensor({20, 5}, rng);
    NeighborhoodIndex nbr = knn(cloud, farthest_point_sample(cloud, 7), 5);

    Tape tape;
    auto p = bind_params(tape, store);
    Value out = local_context_augment(tape, p, tape.leaf(cloud.features), cloud.positions, nbr,
                                      &layer.rpe_k);
    REQUIRE(out.shape() == std::vector<int>{7, 5, 16});
    for (int i = 0; i < 7; ++i) {
        const int c = nbr.centers[static_cast<size_t>(i)];
        for (int s = 0; s < 5; ++s) {
            const int j = nbr.neighbor(i, s);
            double off[3];
            for (int a = 0; a < 3; ++a) off[a] = cloud.positions.at(j, a) - cloud.positions.at(c, a);
            Tensor pos = rpe_reference(store, layer.rpe_k, off);
            for (int f = 0; f < 5; ++f) {
                CHECK(out.val().at(i, s, f) ==
                      doctest::Approx(cloud.features.at(j, f) - cloud.features.at(c, f)));
                CHECK(out.val().at(i, s, 5 + f) == doctest::Approx(cloud.features.at(c, f)));
            }
            for (int f = 0; f < 6; ++f)
                CHECK(out.val().at(i, s, 10 + f) == doctest::Approx(pos[f]).epsilon(1e-12));
        }
    }

}

TEST_CASE("edgeconv_query singleton and duplicate-row max") {
    Rng rng(7);
    ParamStore store;
    AttentionLayerRef layer = make_attention_layer(store, "l", 3, 2, 4, 4, 2, true, rng);
    const int d = layer.lca_width();

    Tensor row = random_tensor({1, 1, d}, rng);
    Tape tape;
    auto p = bind_params(tape, store);
    Value single = edgeconv_query(p, layer, tape.leaf(row));
    CHECK(single.shape() == std::vector<int>{1, 8});

    // manual: w_q^T relu(affine(row)) per head
    const Tensor& ew = store.tensor(layer.edge_w);
    const Tensor& eb = store.tensor(layer.edge_b);
    Tensor act({d});
    for (int j = 0; j < d; ++j) {
        double acc = eb[j];
        for (int i = 0; i < d; ++i) acc += row[i] * ew.at(i, j);
        act[j] = acc > 0 ? acc : 0;
    }
    for (int h = 0; h < 2; ++h) {
        const Tensor& wq = store.tensor(layer.w_q[static_cast<size_t>(h)]);
        for (int c = 0; c < 4; ++c) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += act[j] * wq.at(j, c);
            CHECK(single.val().at(0, h * 4 + c) == doctest::Approx(acc).epsilon(1e-12));
        }
    }

    // duplicating the row K times changes nothing (max of equal values)
    Tensor rep({1, 5, d});
    for (int s = 0; s < 5; ++s)
        for (int j = 0; j < d; ++j) rep.at(0, s, j) = row[j];
    Value dup = edgeconv_query(p, layer, tape.leaf(rep));
    for (int j = 0; j < 8; ++j) CHECK(dup.val()[j] == single.val()[j]);

    CHECK_THROWS_AS(edgeconv_query(p, layer, tape.leaf(random_tensor({1, 1, d + 1}, rng))),
                    DimensionError);
}

TEST_CASE("edgeconv_query matches per-point per-neighbor loop reference") {
    Rng rng(9);
    ParamStore store;
    AttentionLayerRef layer = make_attention_layer(store, "l", 2, 3, 3, 2, 2, true, rng);
    const int d = layer.lca_width();
    Tensor f = random_tensor({4, 6, d}, rng);

    Tape tape;
    auto p = bind_params(tape, store);
    Value got = edgeconv_query(p, layer, tape.leaf(f));

    const Tensor& ew = store.tensor(layer.edge_w);
    const Tensor& eb = store.tensor(layer.edge_b);
    for (int i = 0; i < 4; ++i) {
        std::vector<double> pooled(static_cast<size_t>(d), -1e300);
        for (int s = 0; s < 6; ++s)
            for (int j = 0; j < d; ++j) {
                double acc = eb[j];
                for (int c = 0; c < d; ++c) acc += f.at(i, s, c) * ew.at(c, j);
                acc = acc > 0 ? acc : 0;
                pooled[static_cast<size_t>(j)] = std::max(pooled[static_cast<size_t>(j)], acc);
            }
        for (int h = 0; h < 2; ++h) {
            const Tensor& wq = store.tensor(layer.w_q[static_cast<size_t>(h)]);
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int j = 0; j < d; ++j) acc += pooled[static_cast<size_t>(j)] * wq.at(j, c);
                CHECK(got.val().at(i, h * 3 + c) == doctest::Approx(acc).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("project_kv selector, null map, and loop reference") {
    Rng rng(11);
    ParamStore store;
    AttentionLayerRef layer = make_attention_layer(store, "l", 2, 2, 3, 2, 1, true, rng);
    const int d = layer.lca_width(); // 6

    // selector: W_k = [I_3 ; 0] reproduces the first 3 input columns
    Tensor& wk = store.tensor(layer.w_k);
    for (std::int64_t i = 0; i < wk.numel(); ++i) wk[i] = 0.0;
    for (int i = 0; i < 3; ++i) wk.at(i, i) = 1.0;
    // null map on values
    Tensor& wv = store.tensor(layer.w_v);
    for (std::int64_t i = 0; i < wv.numel(); ++i) wv[i] = 0.0;

    Tensor f = random_tensor({3, 4, d}, rng);
    Tape tape;
    auto p = bind_params(tape, store);
    auto [k_t, v_t] = project_kv(p, layer, tape.leaf(f), tape.leaf(f));
    CHECK(k_t.shape() == std::vector<int>{3, 4, 3});
    CHECK(v_t.shape() == std::vector<int>{3, 4, 2});
    for (int i = 0; i < 3; ++i)
        for (int s = 0; s < 4; ++s) {
            for (int c = 0; c < 3; ++c) CHECK(k_t.val().at(i, s, c) == f.at(i, s, c));
            for (int c = 0; c < 2; ++c) CHECK(v_t.val().at(i, s, c) == 0.0);
        }

    // random weights vs per-row loop
    Rng rng2(13);
    Tensor& wk2 = store.tensor(layer.w_k);
    for (std::int64_t i = 0; i < wk2.numel(); ++i) wk2[i] = rng2.uniform(-1, 1);
    Tape tape2;
    auto p2 = bind_params(tape2, store);
    auto [k2, v2] = project_kv(p2, layer, tape2.leaf(f), tape2.leaf(f));
    for (int i = 0; i < 3; ++i)
        for (int s = 0; s < 4; ++s)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int j = 0; j < d; ++j) acc += f.at(i, s, j) * wk2.at(j, c);
                CHECK(k2.val().at(i, s, c) == doctest::Approx(acc).epsilon(1e-12));
            }
}

TEST_CASE("lambda_attention_per_point closed cases and two-loop oracle") {
    // K=1, C_k=1: q=(1), v=(2,-1) -> (2,-1)
    Tensor y1 = lambda_attention_per_point(Tensor({1}, {1.0}), Tensor({1, 1}, {0.7}),
                                           Tensor({1, 2}, {2.0, -1.0}));
    CHECK(y1[0] == doctest::Approx(2.0));
    CHECK(y1[1] == doctest::Approx(-1.0));

    // uniform keys: weights (1/2, 1/2), v rows (1,0),(3,0) -> (2,0)
    Tensor y2 = lambda_attention_per_point(Tensor({1}, {1.0}), Tensor({2, 1}, {0.4, 0.4}),
                                           Tensor({2, 2}, {1.0, 0.0, 3.0, 0.0}));
    CHECK(y2[0] == doctest::Approx(2.0));
    CHECK(y2[1] == doctest::Approx(0.0));

    // random: bit-identical to the two-loop reference (same operation order)
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int kk = 1 + rng.uniform_int(8);
        const int c_k = 1 + rng.uniform_int(6);
        const int c_v = 1 + rng.uniform_int(6);
        Tensor q = random_tensor({c_k}, rng);
        Tensor k = random_tensor({kk, c_k}, rng);
        Tensor v = random_tensor({kk, c_v}, rng);
        Tensor got = lambda_attention_per_point(q, k, v);
        Tensor want = two_loop_reference(q, k, v);
        for (int j = 0; j < c_v; ++j) CHECK(got[j] == want[j]);
    }
}

TEST_CASE("batched lambda attention equals the per-point reference") {
    Rng rng(19);
    for (int trial = 0; trial < 100; ++trial) {
        const int m = 1 + rng.uniform_int(16);
        const int kk = 1 + rng.uniform_int(8);
        const int c_k = 1 + rng.uniform_int(8);
        const int c_v = 1 + rng.uniform_int(8);
        Tensor q = random_tensor({m, c_k}, rng);
        Tensor k = random_tensor({m, kk, c_k}, rng);
        Tensor v = random_tensor({m, kk, c_v}, rng);

        Tape tape;
        Value y = lambda_apply(tape.leaf(q), content_lambda(tape.leaf(k), tape.leaf(v)));
        for (int i = 0; i < m; ++i) {
            Tensor qi({c_k}), ki({kk, c_k}), vi({kk, c_v});
            for (int c = 0; c < c_k; ++c) qi[c] = q.at(i, c);
            for (int s = 0; s < kk; ++s) {
                for (int c = 0; c < c_k; ++c) ki.at(s, c) = k.at(i, s, c);
                for (int c = 0; c < c_v; ++c) vi.at(s, c) = v.at(i, s, c);
            }
            Tensor want = two_loop_reference(qi, ki, vi);
            for (int c = 0; c < c_v; ++c)
                CHECK(std::abs(y.val().at(i, c) - want[c]) < 1e-10);
        }
    }
}

TEST_CASE("lambda softmax weights sum to one per channel and shift-invariance holds") {
    Rng rng(23);
    const int m = 5, kk = 7, c_k = 4;
    Tensor k = random_tensor({m, kk, c_k}, rng);
    Tensor ones = Tensor::full({m, kk, 1}, 1.0);
    Tape tape;
    Value lam = content_lambda(tape.leaf(k), tape.leaf(ones));
    for (int i = 0; i < m; ++i)
        for (int c = 0; c < c_k; ++c)
            CHECK(std::abs(lam.val().at(i, c, 0) - 1.0) < 1e-12);

    // adding a constant to one key channel leaves the output unchanged
    Tensor q = random_tensor({m, c_k}, rng);
    Tensor v = random_tensor({m, kk, 3}, rng);
    Tensor k_shift = k;
    for (int i = 0; i < m; ++i)
        for (int s = 0; s < kk; ++s) k_shift.at(i, s, 2) += 4.2;
    Value y0 = lambda_apply(tape.leaf(q), content_lambda(tape.leaf(k), tape.leaf(v)));
    Value y1 = lambda_apply(tape.leaf(q), content_lambda(tape.leaf(k_shift), tape.leaf(v)));
    for (std::int64_t i = 0; i < y0.val().numel(); ++i)
        CHECK(std::abs(y0.val()[i] - y1.val()[i]) < 1e-10);
}

TEST_CASE("naive_attention closed cases and loop oracle") {
    // single token: softmax of one logit is 1 -> output is the value row
    Tensor y1 = naive_attention(Tensor({1, 2}, {0.3, -0.7}), Tensor({1, 2}, {1.0, 2.0}),
                                Tensor({1, 3}, {5.0, 6.0, 7.0}));
    CHECK(y1[0] == doctest::Approx(5.0));
    CHECK(y1[1] == doctest::Approx(6.0));
    CHECK(y1[2] == doctest::Approx(7.0));

    // identical rows: uniform weights -> column means of V
    Tensor q({3, 2});
    for (int i = 0; i < 3; ++i) {
        q.at(i, 0) = 0.5;
        q.at(i, 1) = -1.0;
    }
    Tensor v({3, 2}, {1, 10, 2, 20, 3, 30});
    Tensor y2 = naive_attention(q, q, v);
    for (int i = 0; i < 3; ++i) {
        CHECK(y2.at(i, 0) == doctest::Approx(2.0));
        CHECK(y2.at(i, 1) == doctest::Approx(20.0));
    }

    // random 3x2: row-wise softmax / weighted-sum reference
    Rng rng(29);
    Tensor qr = random_tensor({3, 2}, rng);
    Tensor kr = random_tensor({3, 2}, rng);
    Tensor vr = random_tensor({3, 2}, rng);
    Tensor got = naive_attention(qr, kr, vr);
    const double inv = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < 3; ++i) {
        double logits[3], mx = -1e300;
        for (int j = 0; j < 3; ++j) {
            logits[j] = (qr.at(i, 0) * kr.at(j, 0) + qr.at(i, 1) * kr.at(j, 1)) * inv;
            mx = std::max(mx, logits[j]);
        }
        double sum = 0;
        for (double& l : logits) {
            l = std::exp(l - mx);
            sum += l;
        }
        for (int c = 0; c < 2; ++c) {
            double acc = 0;
            for (int j = 0; j < 3; ++j) acc += logits[j] / sum * vr.at(j, c);
            CHECK(got.at(i, c) == doctest::Approx(acc).epsilon(1e-12));
        }
    }

    CHECK_THROWS_AS(naive_attention(qr, random_tensor({3, 3}, rng), vr), DimensionError);
}

TEST_CASE("attention block shape contract and zero weights") {
    BlockFixture fx(24, 9, 5, 3, 4, 6, 5, 3, true, 31);
    Tape tape;
    std::vector<Value> p;
    Value out = fx.forward(tape, p);
    CHECK(out.shape() == std::vector<int>{9, 15});

    for (int i = 0; i < fx.store.count(); ++i) {
        Tensor& t = fx.store.tensor(i);
        for (std::int64_t j = 0; j < t.numel(); ++j) t[j] = 0.0;
    }
    Tape tape2;
    std::vector<Value> p2;
    Value zero = fx.forward(tape2, p2);
    for (std::int64_t i = 0; i < zero.val().numel(); ++i) CHECK(zero.val()[i] == 0.0);

    // feature width must match the configured input width
    Tape tape3;
    auto p3 = bind_params(tape3, fx.store);
    Rng wrng(61);
    Tensor wrong({24, 4});
    for (std::int64_t i = 0; i < wrong.numel(); ++i) wrong[i] = wrng.uniform(-1, 1);
    CHECK_THROWS_AS(attention_block_forward(tape3, p3, fx.layer, tape3.leaf(wrong),
                                            fx.cloud.positions, fx.nbr),
                    DimensionError);
}

TEST_CASE("attention block is permutation-equivariant at the index level") {
    BlockFixture fx(20, 8, 4, 3, 4, 5, 4, 2, true, 37);
    Tape tape;
    std::vector<Value> p;
    Value base = fx.forward(tape, p);

    // permute the cloud and relabel the neighborhoods consistently
    Rng prng(41);
    std::vector<int> perm(20);
    for (int i = 0; i < 20; ++i) perm[static_cast<size_t>(i)] = i;
    prng.shuffle(perm);
    std::vector<int> inv(20);
    for (int i = 0; i < 20; ++i) inv[static_cast<size_t>(perm[static_cast<size_t>(i)])] = i;

    BlockFixture fy = fx;
    fy.cloud.positions = Tensor({20, 3});
    fy.cloud.features = Tensor({20, 3});
    for (int i = 0; i < 20; ++i)
        for (int a = 0; a < 3; ++a) {
            fy.cloud.positions.at(inv[static_cast<size_t>(i)], a) = fx.cloud.positions.at(i, a);
            fy.cloud.features.at(inv[static_cast<size_t>(i)], a) = fx.cloud.features.at(i, a);
        }
    fy.nbr = fx.nbr;
    for (auto& c : fy.nbr.centers) c = inv[static_cast<size_t>(c)];
    for (auto& nidx : fy.nbr.neighbors) nidx = inv[static_cast<size_t>(nidx)];

    Tape tape2;
    std::vector<Value> p2;
    Value permuted = fy.forward(tape2, p2);
    // same centers in the same order, so rows must match bit for bit
    for (std::int64_t i = 0; i < base.val().numel(); ++i)
        CHECK(base.val()[i] == permuted.val()[i]);
}

TEST_CASE("every attention parameter passes the finite-difference check") {
    BlockFixture fx(32, 12, 4, 3, 4, 4, 4, 2, true, 43);

    // move every parameter to a generic point: zero-initialized biases would
    // leave self-neighbor ReLU pre-activations exactly on the kink, where
    // central differences are one-sided
    Rng jitter(59);
    for (int i = 0; i < fx.store.count(); ++i) {
        Tensor& t = fx.store.tensor(i);
        for (std::int64_t j = 0; j < t.numel(); ++j) t[j] += jitter.uniform(-0.1, 0.1);
    }

    auto loss_value = [&](ParamStore& store) {
        Tape tape;
        auto p = bind_params(tape, store);
        Value feats = tape.leaf(fx.cloud.features);
        Value out = attention_block_forward(tape, p, fx.layer, feats, fx.cloud.positions, fx.nbr);
        return mean_all(out * out).val()[0];
    };

    Tape tape;
    auto p = bind_params(tape, fx.store);
    Value feats = tape.leaf(fx.cloud.features);
    Value out = attention_block_forward(tape, p, fx.layer, feats, fx.cloud.positions, fx.nbr);
    Value loss = mean_all(out * out);
    auto grads = tape.backward(loss.id);

    for (int i = 0; i < fx.store.count(); ++i) {
        CAPTURE(fx.store.name(i));
        const Tensor theta = fx.store.tensor(i);
        auto f = [&](const Tensor& t) {
            ParamStore probe = fx.store;
            probe.tensor(i) = t;
            return loss_value(probe);
        };
        const double err = finite_difference_check(f, theta, 1e-5, grads.at(p[static_cast<size_t>(i)].id));
        CHECK(err < 1e-5);
    }
}

TEST_CASE("flop closed forms: scaling ratios and instrumented counters") {
    CHECK(count_flops_lambda(512, 16, 32, 16, 8) * 1.0 / count_flops_lambda(256, 16, 32, 16, 8) == 2.0);
    CHECK(count_flops_naive(512, 32, 16) * 1.0 / count_flops_naive(256, 32, 16) == 4.0);
    CHECK_THROWS_AS(count_flops_lambda(0, 1, 1, 1, 1), ArgumentError);

    Rng rng(47);
    for (int n : {64, 256}) {
        const int kk = 8, c_k = 6, c_v = 5, heads = 3;
        std::vector<Tensor> q;
        for (int h = 0; h < heads; ++h) q.push_back(random_tensor({n, c_k}, rng));
        Tensor k = random_tensor({n, kk, c_k}, rng);
        Tensor v = random_tensor({n, kk, c_v}, rng);
        FlopCounter fc;
        lambda_attention_kernel(q, k, v, n, kk, &fc);
        CHECK(fc.madds == count_flops_lambda(n, kk, c_k, c_v, heads));

        FlopCounter nc;
        naive_attention_kernel(random_tensor({n, c_k}, rng), random_tensor({n, c_k}, rng),
                               random_tensor({n, c_v}, rng), &nc);
        CHECK(nc.madds == count_flops_naive(n, c_k, c_v));
    }
}

TEST_CASE("instrumented lambda kernel agrees with the composed tape path") {
    Rng rng(53);
    const int n = 10, kk = 5, c_k = 4, c_v = 3, heads = 2;
    std::vector<Tensor> q;
    for (int h = 0; h < heads; ++h) q.push_back(random_tensor({n, c_k}, rng));
    Tensor k = random_tensor({n, kk, c_k}, rng);
    Tensor v = random_tensor({n, kk, c_v}, rng);
    Tensor fast = lambda_attention_kernel(q, k, v, n, kk, nullptr);

    Tape tape;
    Value lam = content_lambda(tape.leaf(k), tape.leaf(v));
    for (int h = 0; h < heads; ++h) {
        Value y = lambda_apply(tape.leaf(q[static_cast<size_t>(h)]), lam);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < c_v; ++c)
                CHECK(std::abs(fast.at(i, h * c_v + c) - y.val().at(i, c)) < 1e-12);
    }
}
