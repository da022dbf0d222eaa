#include "pf/complexity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "pf/rng.hpp"

namespace pf {

std::int64_t count_flops_lambda(int n, int k, int c_k, int c_v, int heads) {
    if (n < 1 || k < 1 || c_k < 1 || c_v < 1 || heads < 1)
        throw ArgumentError("count_flops_lambda: arguments must be positive");
    const std::int64_t per_head = static_cast<std::int64_t>(n) * k * c_k * c_v +
                                  static_cast<std::int64_t>(n) * c_k * c_v;
    return static_cast<std::int64_t>(heads) * per_head;
}

std::int64_t count_flops_naive(int n, int c_k, int c_v) {
    if (n < 1 || c_k < 1 || c_v < 1)
        throw ArgumentError("count_flops_naive: arguments must be positive");
    return static_cast<std::int64_t>(n) * n * c_k + static_cast<std::int64_t>(n) * n * c_v;
}

Tensor lambda_attention_kernel(const std::vector<Tensor>& q_heads, const Tensor& k,
                               const Tensor& v, int n, int kk, FlopCounter* counter) {
    const int heads = static_cast<int>(q_heads.size());
    const int c_k = k.dim(2);
    const int c_v = v.dim(2);
    Tensor out({n, heads * c_v});
    std::vector<double> w(static_cast<size_t>(kk) * c_k);
    std::vector<double> lambda(static_cast<size_t>(c_k) * c_v);

    for (int h = 0; h < heads; ++h) {
        const Tensor& q = q_heads[static_cast<size_t>(h)];
        for (int i = 0; i < n; ++i) {
            // neighbor-axis softmax per key channel
            for (int c = 0; c < c_k; ++c) {
                double m = k.at(i, 0, c);
                for (int s = 1; s < kk; ++s) m = std::max(m, k.at(i, s, c));
                double sum = 0.0;
                for (int s = 0; s < kk; ++s) {
                    const double e = std::exp(k.at(i, s, c) - m);
                    w[static_cast<size_t>(s) * c_k + c] = e;
                    sum += e;
                    if (counter) counter->exps += 1;
                }
                for (int s = 0; s < kk; ++s) w[static_cast<size_t>(s) * c_k + c] /= sum;
            }
            // summary: K*C_k*C_v multiply-adds
            std::fill(lambda.begin(), lambda.end(), 0.0);
            for (int s = 0; s < kk; ++s)
                for (int c = 0; c < c_k; ++c) {
                    const double ws = w[static_cast<size_t>(s) * c_k + c];
                    for (int j = 0; j < c_v; ++j) {
                        lambda[static_cast<size_t>(c) * c_v + j] += ws * v.at(i, s, j);
                        if (counter) counter->madds += 1;
                    }
                }
            // query contraction: C_k*C_v multiply-adds
            for (int j = 0; j < c_v; ++j) {
                double acc = 0.0;
                for (int c = 0; c < c_k; ++c) {
                    acc += q.at(i, c) * lambda[static_cast<size_t>(c) * c_v + j];
                    if (counter) counter->madds += 1;
                }
                out.at(i, h * c_v + j) = acc;
            }
        }
    }
    return out;
}

Tensor naive_attention_kernel(const Tensor& q, const Tensor& k, const Tensor& v,
                              FlopCounter* counter) {
    const int n = q.dim(0);
    const int c_k = q.dim(1);
    const int c_v = v.dim(1);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(c_k));
    Tensor out({n, c_v});
    std::vector<double> row(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double m = -1e300;
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int c = 0; c < c_k; ++c) {
                acc += q.at(i, c) * k.at(j, c);
                if (counter) counter->madds += 1;
            }
            row[static_cast<size_t>(j)] = acc * inv_sqrt;
            m = std::max(m, row[static_cast<size_t>(j)]);
        }
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            row[static_cast<size_t>(j)] = std::exp(row[static_cast<size_t>(j)] - m);
            sum += row[static_cast<size_t>(j)];
            if (counter) counter->exps += 1;
        }
        for (int j = 0; j < n; ++j) {
            const double wj = row[static_cast<size_t>(j)] / sum;
            for (int c = 0; c < c_v; ++c) {
                out.at(i, c) += wj * v.at(j, c);
                if (counter) counter->madds += 1;
            }
        }
    }
    return out;
}

namespace {
Tensor random_flat(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}
} // namespace

std::vector<BenchRow> run_bench(const std::vector<int>& n_list, bool lambda_mode,
                                const BenchConfig& cfg, std::uint64_t seed) {
    std::vector<BenchRow> rows;
    for (int n : n_list) {
        Rng rng(seed ^ static_cast<std::uint64_t>(n));
        BenchRow row;
        row.n = n;
        row.lambda_mode = lambda_mode;
        std::vector<double> times;

        if (lambda_mode) {
            std::vector<Tensor> q;
            for (int h = 0; h < cfg.heads; ++h) q.push_back(random_flat({n, cfg.c_k}, rng));
            Tensor k = random_flat({n, cfg.k, cfg.c_k}, rng);
            Tensor v = random_flat({n, cfg.k, cfg.c_v}, rng);
            row.flops = count_flops_lambda(n, cfg.k, cfg.c_k, cfg.c_v, cfg.heads);
            volatile double sink = 0.0;
            for (int r = 0; r < cfg.runs; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                Tensor y = lambda_attention_kernel(q, k, v, n, cfg.k, nullptr);
                const auto t1 = std::chrono::steady_clock::now();
                sink = sink + y[0];
                times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            }
        } else {
            Tensor q = random_flat({n, cfg.c_k}, rng);
            Tensor k = random_flat({n, cfg.c_k}, rng);
            Tensor v = random_flat({n, cfg.c_v}, rng);
            row.flops = count_flops_naive(n, cfg.c_k, cfg.c_v);
            volatile double sink = 0.0;
            for (int r = 0; r < cfg.runs; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                Tensor y = naive_attention_kernel(q, k, v, nullptr);
                const auto t1 = std::chrono::steady_clock::now();
                sink = sink + y[0];
                times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            }
        }
        std::sort(times.begin(), times.end());
        row.wall_ms = times[times.size() / 2];
        rows.push_back(row);
    }
    return rows;
}

double fit_log_exponent(const std::vector<BenchRow>& rows) {
    if (rows.size() < 2) throw ArgumentError("fit_log_exponent: need at least two rows");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(rows.size());
    for (const BenchRow& r : rows) {
        const double x = std::log(static_cast<double>(r.n));
        const double y = std::log(std::max(r.wall_ms, 1e-9));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace pf
