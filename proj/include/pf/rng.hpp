#pragma once
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace pf {

// Seeded random stream. The distributions are written out by hand because
// std::uniform_real_distribution and friends are implementation-defined;
// every draw here is fully determined by the seed and the draw order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // [0, n)
    int uniform_int(int n) {
        const std::uint64_t bound = std::uint64_t(-1) - std::uint64_t(-1) % std::uint64_t(n);
        std::uint64_t v = gen_();
        while (v >= bound) v = gen_();
        return static_cast<int>(v % std::uint64_t(n));
    }

    double gaussian(double mean, double sigma) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sigma * spare_;
        }
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return mean + sigma * r * std::cos(a);
    }

    // Independent child stream (for per-sample seeds etc.).
    std::uint64_t fork() { return gen_(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[i], v[static_cast<size_t>(j)]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace pf
