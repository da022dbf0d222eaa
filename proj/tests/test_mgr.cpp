#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "pf/mgr.hpp"
#include "pf/rng.hpp"

using namespace pf;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

} // namespace

TEST_CASE("mgr mode parsing") {
    CHECK(parse_mgr_mode("off") == MgrMode::Off);
    CHECK(parse_mgr_mode("single_graph") == MgrMode::SingleGraph);
    CHECK(parse_mgr_mode("multi_graph") == MgrMode::MultiGraph);
    CHECK_THROWS_AS(parse_mgr_mode("both"), ArgumentError);
}

TEST_CASE("zero adjacencies reduce every branch to relu(V)") {
    Rng rng(3);
    ParamStore store;
    MgrRef mgr = make_mgr(store, "mgr", 4, 3, 6, rng); // adjacencies start at zero

    Tensor v = random_tensor({5, 3}, rng);
    Tape tape;
    auto p = bind_params(tape, store);
    Value cat = mgr_graphs_concat(tape, p, mgr, tape.leaf(v));
    CHECK(cat.shape() == std::vector<int>{5, 12});
    for (int i = 0; i < 5; ++i)
        for (int g = 0; g < 4; ++g)
            for (int c = 0; c < 3; ++c)
                CHECK(cat.val().at(i, g * 3 + c) == std::max(v.at(i, c), 0.0));

    // non-negative V: the concatenation is exact copies of V
    Tensor vpos = random_tensor({5, 3}, rng, 0.0, 1.0);
    Value cat2 = mgr_graphs_concat(tape, p, mgr, tape.leaf(vpos));
    for (int i = 0; i < 5; ++i)
        for (int g = 0; g < 4; ++g)
            for (int c = 0; c < 3; ++c) CHECK(cat2.val().at(i, g * 3 + c) == vpos.at(i, c));
}

TEST_CASE("random adjacencies match the per-graph loop reference") {
    Rng rng(7);
    ParamStore store;
    MgrRef mgr = make_mgr(store, "mgr", 3, 4, 5, rng);
    for (int a : mgr.adjacency) {
        Tensor& adj = store.tensor(a);
        for (std::int64_t i = 0; i < adj.numel(); ++i) adj[i] = rng.uniform(-1, 1);
    }
    Tensor v = random_tensor({6, 4}, rng);

    Tape tape;
    auto p = bind_params(tape, store);
    Value cat = mgr_graphs_concat(tape, p, mgr, tape.leaf(v));

    for (int g = 0; g < 3; ++g) {
        const Tensor& adj = store.tensor(mgr.adjacency[static_cast<size_t>(g)]);
        for (int i = 0; i < 6; ++i)
            for (int c = 0; c < 4; ++c) {
                double acc = v.at(i, c); // self-loop: + V
                for (int j = 0; j < 4; ++j) acc += v.at(i, j) * adj.at(j, c);
                acc = acc > 0 ? acc : 0;
                CHECK(std::abs(cat.val().at(i, g * 4 + c) - acc) < 1e-12);
            }
    }

    // branches are non-negative after the ReLU
    for (std::int64_t i = 0; i < cat.val().numel(); ++i) CHECK(cat.val()[i] >= 0.0);
}

TEST_CASE("adjacency -I cancels the self-loop exactly") {
    Rng rng(11);
    ParamStore store;
    MgrRef mgr = make_mgr(store, "mgr", 2, 3, 4, rng);
    for (int a : mgr.adjacency) {
        Tensor& adj = store.tensor(a);
        for (int i = 0; i < 3; ++i) adj.at(i, i) = -1.0;
    }
    Tensor v = random_tensor({4, 3}, rng);
    Tape tape;
    auto p = bind_params(tape, store);
    Value cat = mgr_graphs_concat(tape, p, mgr, tape.leaf(v));
    for (std::int64_t i = 0; i < cat.val().numel(); ++i) CHECK(cat.val()[i] == 0.0);
}

TEST_CASE("mgr_forward projects and is row-permutation equivariant") {
    Rng rng(13);
    ParamStore store;
    MgrRef mgr = make_mgr(store, "mgr", 3, 3, 7, rng);
    for (int a : mgr.adjacency) {
        Tensor& adj = store.tensor(a);
        for (std::int64_t i = 0; i < adj.numel(); ++i) adj[i] = rng.uniform(-1, 1);
    }
    Tensor v = random_tensor({5, 3}, rng);
    Tape tape;
    auto p = bind_params(tape, store);
    Value out = mgr_forward(tape, p, mgr, tape.leaf(v));
    CHECK(out.shape() == std::vector<int>{5, 7});

    std::vector<int> perm = {3, 0, 4, 1, 2};
    Tensor vp({5, 3});
    for (int i = 0; i < 5; ++i)
        for (int c = 0; c < 3; ++c) vp.at(i, c) = v.at(perm[static_cast<size_t>(i)], c);
    Value outp = mgr_forward(tape, p, mgr, tape.leaf(vp));
    for (int i = 0; i < 5; ++i)
        for (int c = 0; c < 7; ++c)
            CHECK(outp.val().at(i, c) == out.val().at(perm[static_cast<size_t>(i)], c));

    CHECK_THROWS_AS(mgr_forward(tape, p, mgr, tape.leaf(random_tensor({5, 4}, rng))),
                    DimensionError);
}

TEST_CASE("single graph keeps width C_v before projection") {
    Rng rng(17);
    ParamStore store;
    MgrRef mgr = make_mgr(store, "mgr", 1, 4, 8, rng);
    Tensor v = random_tensor({3, 4}, rng);
    Tape tape;
    auto p = bind_params(tape, store);
    CHECK(mgr_graphs_concat(tape, p, mgr, tape.leaf(v)).shape() == std::vector<int>{3, 4});
    CHECK(mgr_forward(tape, p, mgr, tape.leaf(v)).shape() == std::vector<int>{3, 8});
}

TEST_CASE("every adjacency passes the finite-difference check") {
    Rng rng(19);
    ParamStore store;
    MgrRef mgr = make_mgr(store, "mgr", 3, 4, 5, rng);
    for (int a : mgr.adjacency) {
        Tensor& adj = store.tensor(a);
        for (std::int64_t i = 0; i < adj.numel(); ++i) adj[i] = rng.uniform(-0.5, 0.5);
    }
    Tensor v = random_tensor({6, 4}, rng);

    auto loss_of = [&](ParamStore& s) {
        Tape tape;
        auto p = bind_params(tape, s);
        Value out = mgr_forward(tape, p, mgr, tape.leaf(v));
        return mean_all(out * out).val()[0];
    };

    Tape tape;
    auto p = bind_params(tape, store);
    Value out = mgr_forward(tape, p, mgr, tape.leaf(v));
    Value loss = mean_all(out * out);
    auto grads = tape.backward(loss.id);

    for (int i = 0; i < store.count(); ++i) {
        CAPTURE(store.name(i));
        auto f = [&](const Tensor& t) {
            ParamStore probe = store;
            probe.tensor(i) = t;
            return loss_of(probe);
        };
        CHECK(finite_difference_check(f, store.tensor(i), 1e-5,
                                      grads.at(p[static_cast<size_t>(i)].id)) < 1e-5);
    }
}
