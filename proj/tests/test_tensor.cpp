#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "pf/rng.hpp"
#include "pf/tape.hpp"
#include "pf/tensor.hpp"

using namespace pf;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Independent reference: plain triple loop, no shared code with mm_nn_acc.
Tensor matmul_reference(const Tensor& a, const Tensor& b) {
    Tensor c({a.dim(0), b.dim(1)});
    for (int i = 0; i < a.dim(0); ++i)
        for (int j = 0; j < b.dim(1); ++j) {
            double acc = 0.0;
            for (int l = 0; l < a.dim(1); ++l) acc += a.at(i, l) * b.at(l, j);
            c.at(i, j) = acc;
        }
    return c;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("tensor construction and invariants") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.all_finite());
    CHECK_THROWS_AS(Tensor({2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);

    Tensor id = Tensor::identity(3);
    CHECK(id.at(0, 0) == 1.0);
    CHECK(id.at(0, 1) == 0.0);
}

TEST_CASE("matmul identity and selector cases") {
    Tape tape;
    Value id = tape.leaf(Tensor::identity(2));
    Value m = tape.leaf(Tensor({2, 2}, {1, 2, 3, 4}));
    Value out = matmul(id, m);
    CHECK(out.val()[0] == 1.0);
    CHECK(out.val()[1] == 2.0);
    CHECK(out.val()[2] == 3.0);
    CHECK(out.val()[3] == 4.0);

    // [[1,0]] * [[0],[5]] = [[0]]
    Value a = tape.leaf(Tensor({1, 2}, {1, 0}));
    Value b = tape.leaf(Tensor({2, 1}, {0, 5}));
    CHECK(matmul(a, b).val()[0] == 0.0);

    CHECK_THROWS_AS(matmul(b, m), DimensionError);
}

TEST_CASE("matmul matches triple-loop reference") {
    Rng rng(11);
    Tape tape;
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    Tensor want = matmul_reference(a, b);
    Value got = matmul(tape.leaf(a), tape.leaf(b));
    CHECK(max_abs_diff(got.val(), want) < 1e-12);
}

TEST_CASE("matmul leading-axis and batched forms match per-slice reference") {
    Rng rng(12);
    Tape tape;
    Tensor a = random_tensor({2, 3, 4}, rng);
    Tensor w = random_tensor({4, 5}, rng);
    Value got = matmul(tape.leaf(a), tape.leaf(w));
    CHECK(got.shape() == std::vector<int>{2, 3, 5});
    for (int s = 0; s < 2; ++s) {
        Tensor slab({3, 4});
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) slab.at(i, j) = a.at(s, i, j);
        Tensor want = matmul_reference(slab, w);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j)
                CHECK(got.val().at(s, i, j) == doctest::Approx(want.at(i, j)).epsilon(1e-12));
    }

    Tensor b3 = random_tensor({2, 4, 3}, rng);
    Value bm = matmul(tape.leaf(a), tape.leaf(b3));
    CHECK(bm.shape() == std::vector<int>{2, 3, 3});
    for (int s = 0; s < 2; ++s) {
        Tensor lhs({3, 4}), rhs({4, 3});
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) lhs.at(i, j) = a.at(s, i, j);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 3; ++j) rhs.at(i, j) = b3.at(s, i, j);
        Tensor want = matmul_reference(lhs, rhs);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(bm.val().at(s, i, j) == doctest::Approx(want.at(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("matmul associativity on random conformable triples") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        Tape tape;
        const int m = 1 + rng.uniform_int(8);
        const int k = 1 + rng.uniform_int(8);
        const int p = 1 + rng.uniform_int(8);
        const int n = 1 + rng.uniform_int(8);
        Value a = tape.leaf(random_tensor({m, k}, rng));
        Value b = tape.leaf(random_tensor({k, p}, rng));
        Value c = tape.leaf(random_tensor({p, n}, rng));
        const Tensor& lhs = matmul(matmul(a, b), c).val();
        const Tensor& rhs = matmul(a, matmul(b, c)).val();
        for (std::int64_t i = 0; i < lhs.numel(); ++i) {
            const double denom = std::max(1.0, std::abs(lhs[i]));
            CHECK(std::abs(lhs[i] - rhs[i]) / denom < 1e-9);
        }
    }
}

TEST_CASE("softmax_axis basics") {
    Tape tape;
    Value u = softmax_axis(tape.leaf(Tensor({2}, {1, 1})), 0);
    CHECK(u.val()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(u.val()[1] == doctest::Approx(0.5).epsilon(1e-15));

    // softmax([0, ln 3]) = [0.25, 0.75]
    Value v = softmax_axis(tape.leaf(Tensor({2}, {0.0, std::log(3.0)})), 0);
    CHECK(v.val()[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(v.val()[1] == doctest::Approx(0.75).epsilon(1e-14));

    CHECK_THROWS_AS(softmax_axis(u, 1), DimensionError);
}

TEST_CASE("softmax shift invariance and stability at large magnitude") {
    Rng rng(17);
    Tape tape;
    Tensor x = random_tensor({4, 6}, rng);
    Tensor xc = x;
    for (std::int64_t i = 0; i < xc.numel(); ++i) xc[i] += 1000.0;
    const Tensor& s1 = softmax_axis(tape.leaf(x), 1).val();
    const Tensor& s2 = softmax_axis(tape.leaf(xc), 1).val();
    CHECK(max_abs_diff(s1, s2) < 1e-12);

    Tensor big = random_tensor({3, 5}, rng, -1e4, 1e4);
    const Tensor& sb = softmax_axis(tape.leaf(big), 1).val();
    CHECK(sb.all_finite());
    for (int i = 0; i < 3; ++i) {
        double row = 0.0;
        for (int j = 0; j < 5; ++j) {
            row += sb.at(i, j);
            CHECK(sb.at(i, j) >= 0.0);
            CHECK(sb.at(i, j) <= 1.0);
        }
        CHECK(std::abs(row - 1.0) < 1e-12);
    }
}

TEST_CASE("elementwise and reduction semantics") {
    Tape tape;
    Value r = relu(tape.leaf(Tensor({3}, {-1, 0, 2})));
    CHECK(r.val()[0] == 0.0);
    CHECK(r.val()[1] == 0.0);
    CHECK(r.val()[2] == 2.0);

    Value c = tape.leaf(Tensor::full({2, 3}, 7.0));
    const Tensor& mx = max_over_axis(c, 1).val();
    CHECK(mx.shape() == std::vector<int>{2});
    CHECK(mx[0] == 7.0);
    CHECK(mx[1] == 7.0);

    Value a = tape.leaf(Tensor({1, 2}, {1, 2}));
    Value b = tape.leaf(Tensor({1, 3}, {3, 4, 5}));
    const Tensor& cc = concat_axis({a, b}, 1).val();
    CHECK(cc.shape() == std::vector<int>{1, 5});
    for (int j = 0; j < 5; ++j) CHECK(cc[j] == double(j + 1));

    CHECK_THROWS_AS(concat_axis({a, tape.leaf(Tensor({2, 2}))}, 1), DimensionError);
    CHECK_THROWS_AS(tape.add(a, b), DimensionError);

    Value mean = mean_over_axis(tape.leaf(Tensor({4}, {1, 2, 3, 4})), 0);
    CHECK(mean.val()[0] == doctest::Approx(2.5));
    Value sum = sum_over_axis(tape.leaf(Tensor({4}, {1, 2, 3, 4})), 0);
    CHECK(sum.val()[0] == doctest::Approx(10.0));
}

TEST_CASE("broadcast add/sub/mul against explicit loops") {
    Rng rng(23);
    Tape tape;
    Tensor a = random_tensor({3, 4}, rng);
    Tensor row = random_tensor({4}, rng);
    Tensor col = random_tensor({3, 1}, rng);

    const Tensor& sr = (tape.leaf(a) + tape.leaf(row)).val();
    const Tensor& sc = (tape.leaf(a) - tape.leaf(col)).val();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            CHECK(sr.at(i, j) == a.at(i, j) + row[j]);
            CHECK(sc.at(i, j) == a.at(i, j) - col[i]);
        }
}

TEST_CASE("forward determinism is bit-exact") {
    auto run = [] {
        Rng rng(99);
        Tape tape;
        Value a = tape.leaf(random_tensor({5, 7}, rng));
        Value b = tape.leaf(random_tensor({7, 3}, rng));
        return softmax_axis(matmul(a, b), 1).val();
    };
    Tensor first = run();
    Tensor second = run();
    for (std::int64_t i = 0; i < first.numel(); ++i) CHECK(first[i] == second[i]);
}
