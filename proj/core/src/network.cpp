#include "sqr/network.hpp"

#include <cstdio>

#include "sqr/error.hpp"

namespace sqr {

template <typename T>
Network<T>::Network(ArchitectureConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
        const LayerSpec& l = cfg_.layers[i];
        const auto in = static_cast<std::size_t>(l.in_channels);
        const auto out = static_cast<std::size_t>(l.out_channels);
        std::unique_ptr<Layer<T>> layer;
        switch (l.kind) {
            case LayerKind::Conv:
                layer = std::make_unique<Conv2d<T>>(in, out, static_cast<std::size_t>(l.kernel),
                                                    static_cast<std::size_t>(l.stride));
                break;
            case LayerKind::BatchNorm: layer = std::make_unique<BatchNorm2d<T>>(in); break;
            case LayerKind::Relu: layer = std::make_unique<Relu<T>>(); break;
            case LayerKind::Flatten: layer = std::make_unique<Flatten<T>>(); break;
            case LayerKind::Dense: layer = std::make_unique<Dense<T>>(in, out); break;
        }
        char prefix[32];
        std::snprintf(prefix, sizeof prefix, "%02zu.%s.", i, std::string(to_string(l.kind)).c_str());
        for (auto* b : layer->blocks()) b->name = prefix + b->name;
        layers_.push_back(std::move(layer));
    }
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input, Mode mode) {
    const typename Tensor<T>::Shape expected{input.batch(), static_cast<std::size_t>(cfg_.input_channels),
                                             static_cast<std::size_t>(cfg_.input_height),
                                             static_cast<std::size_t>(cfg_.input_width)};
    if (input.shape() != expected) {
        throw ShapeError("network input " + shape_string(input.shape()) + " does not match architecture " +
                         shape_string(expected));
    }
    Tensor<T> x = layers_.front()->forward(input, mode);
    for (std::size_t i = 1; i < layers_.size(); ++i) x = layers_[i]->forward(x, mode);
    return x;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& grad_output) {
    Tensor<T> g = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
    return g;
}

template <typename T>
std::vector<ParamBlock<T>*> Network<T>::blocks() {
    std::vector<ParamBlock<T>*> out;
    for (auto& l : layers_) {
        for (auto* b : l->blocks()) out.push_back(b);
    }
    return out;
}

template <typename T>
std::vector<ParamBlock<T>*> Network<T>::learnable_blocks() {
    std::vector<ParamBlock<T>*> out;
    for (auto* b : blocks()) {
        if (b->learnable) out.push_back(b);
    }
    return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() {
    std::size_t n = 0;
    for (auto* b : learnable_blocks()) n += b->value.size();
    return n;
}

template <typename T>
void Network<T>::init(std::uint64_t seed) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Philox4x32 rng(seed, i);
        const LayerSpec& l = cfg_.layers[i];
        if (l.kind == LayerKind::Conv) {
            auto& conv = static_cast<Conv2d<T>&>(*layers_[i]);
            he_uniform_init<T>(conv.weight().value, static_cast<std::size_t>(l.in_channels * l.kernel * l.kernel), rng);
            std::fill(conv.bias().value.begin(), conv.bias().value.end(), T{});
        } else if (l.kind == LayerKind::Dense) {
            auto& dense = static_cast<Dense<T>&>(*layers_[i]);
            he_uniform_init<T>(dense.weight().value, static_cast<std::size_t>(l.in_channels), rng);
            std::fill(dense.bias().value.begin(), dense.bias().value.end(), T{});
        } else if (l.kind == LayerKind::BatchNorm) {
            auto& bn = static_cast<BatchNorm2d<T>&>(*layers_[i]);
            std::fill(bn.gain().value.begin(), bn.gain().value.end(), T(1));
            std::fill(bn.shift().value.begin(), bn.shift().value.end(), T(0));
            std::fill(bn.running_mean().value.begin(), bn.running_mean().value.end(), T(0));
            std::fill(bn.running_var().value.begin(), bn.running_var().value.end(), T(1));
        }
    }
}

template <typename T>
ModelWeights Network<T>::export_weights() {
    ModelWeights w;
    w.architecture = architecture_digest(cfg_);
    for (auto* b : blocks()) {
        NamedBlock nb{b->name, {}};
        nb.values.reserve(b->value.size());
        for (T v : b->value) nb.values.push_back(static_cast<float>(v));
        w.blocks.push_back(std::move(nb));
    }
    return w;
}

template <typename T>
void Network<T>::import_weights(const ModelWeights& w) {
    if (w.architecture != architecture_digest(cfg_)) {
        throw FormatError("weights were saved for a different architecture than '" + cfg_.preset + "'");
    }
    auto bs = blocks();
    if (bs.size() != w.blocks.size()) throw FormatError("weights: block count mismatch");
    for (std::size_t i = 0; i < bs.size(); ++i) {
        if (bs[i]->name != w.blocks[i].name || bs[i]->value.size() != w.blocks[i].values.size()) {
            throw FormatError("weights: block '" + w.blocks[i].name + "' does not match '" + bs[i]->name + "'");
        }
    }
    for (std::size_t i = 0; i < bs.size(); ++i) {
        for (std::size_t k = 0; k < bs[i]->value.size(); ++k) bs[i]->value[k] = static_cast<T>(w.blocks[i].values[k]);
        if (!bs[i]->learnable && bs[i]->name.ends_with("running_var")) {
            for (T v : bs[i]->value) {
                if (!(v > T{})) throw FormatError("weights: running variance must be positive");
            }
        }
    }
}

template class Network<float>;
template class Network<double>;

}  // namespace sqr
