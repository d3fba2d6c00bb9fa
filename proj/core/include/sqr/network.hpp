#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "sqr/architecture.hpp"
#include "sqr/layers.hpp"
#include "sqr/weights_io.hpp"

namespace sqr {

/// Sequential stack built from an ArchitectureConfig. Backpropagation is
/// hand-chained through the layers in reverse order.
template <typename T>
class Network {
public:
    explicit Network(ArchitectureConfig cfg);

    const ArchitectureConfig& config() const noexcept { return cfg_; }
    std::size_t size() const noexcept { return layers_.size(); }
    Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

    Tensor<T> forward(const Tensor<T>& input, Mode mode);
    /// Returns the gradient w.r.t. the network input.
    Tensor<T> backward(const Tensor<T>& grad_output);

    /// Every block in layer order, names prefixed "NN.kind." (e.g. "00.conv.weight").
    std::vector<ParamBlock<T>*> blocks();
    std::vector<ParamBlock<T>*> learnable_blocks();
    std::size_t parameter_count();

    /// He-uniform weights (layer i draws from Philox stream i of `seed`),
    /// zero biases, unit gains, zero shifts, running stats (0, 1).
    void init(std::uint64_t seed);

    ModelWeights export_weights();
    /// Throws FormatError if the digest, names or block sizes disagree.
    void import_weights(const ModelWeights& weights);

private:
    ArchitectureConfig cfg_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace sqr
