#pragma once
#include <string>
#include <vector>

#include "pf/rng.hpp"
#include "pf/tape.hpp"
#include "pf/tensor.hpp"

namespace pf {

// Named collection of trainable tensors. Layers hold indices into the store;
// each forward pass binds the store onto a fresh tape in index order, so
// gradient maps line up with the store by construction.
class ParamStore {
public:
    int add(std::string name, Tensor init);

    int count() const { return static_cast<int>(values_.size()); }
    Tensor& tensor(int idx) { return values_[static_cast<size_t>(idx)]; }
    const Tensor& tensor(int idx) const { return values_[static_cast<size_t>(idx)]; }
    const std::string& name(int idx) const { return names_[static_cast<size_t>(idx)]; }
    int find(const std::string& name) const; // -1 when absent

    std::int64_t total_parameters() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
};

// Registers every store tensor as a trainable tape leaf, in store order.
std::vector<Value> bind_params(Tape& tape, const ParamStore& store);

// Weights uniform in [-a, a] with a = sqrt(1/fan_in); biases zero.
Tensor init_weight(int fan_in, int fan_out, Rng& rng);

// Adds seeded uniform noise in [-magnitude, magnitude] to every parameter.
// Gradient checks run at such a generic point so zero-initialized biases do
// not leave ReLU pre-activations exactly on the kink.
void perturb_params(ParamStore& store, double magnitude, std::uint64_t seed);

} // namespace pf
