#include "pf/params.hpp"

#include <cmath>

namespace pf {

int ParamStore::add(std::string name, Tensor init) {
    names_.push_back(std::move(name));
    values_.push_back(std::move(init));
    return static_cast<int>(values_.size()) - 1;
}

int ParamStore::find(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    return -1;
}

std::int64_t ParamStore::total_parameters() const {
    std::int64_t n = 0;
    for (const Tensor& t : values_) n += t.numel();
    return n;
}

std::vector<Value> bind_params(Tape& tape, const ParamStore& store) {
    std::vector<Value> out;
    out.reserve(static_cast<size_t>(store.count()));
    for (int i = 0; i < store.count(); ++i) out.push_back(tape.param(store.tensor(i)));
    return out;
}

Tensor init_weight(int fan_in, int fan_out, Rng& rng) {
    const double a = std::sqrt(1.0 / fan_in);
    Tensor w({fan_in, fan_out});
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-a, a);
    return w;
}

void perturb_params(ParamStore& store, double magnitude, std::uint64_t seed) {
    Rng rng(seed);
    for (int i = 0; i < store.count(); ++i) {
        Tensor& t = store.tensor(i);
        for (std::int64_t j = 0; j < t.numel(); ++j) t[j] += rng.uniform(-magnitude, magnitude);
    }
}

} // namespace pf
