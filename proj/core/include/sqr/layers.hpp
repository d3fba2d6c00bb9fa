#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sqr/rng.hpp"
#include "sqr/tensor.hpp"

namespace sqr {

enum class Mode { Train, Eval };

enum class LayerKind { Conv, BatchNorm, Relu, Flatten, Dense };

std::string_view to_string(LayerKind k);

/// One entry of a sequential architecture. For Conv: square `kernel`,
/// `stride`, `in_channels` -> `out_channels`. BatchNorm uses `in_channels`.
/// Dense maps `in_channels` features to `out_channels` outputs; `activation`
/// is false for the linear head.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int kernel = 0;
    int stride = 1;
    int in_channels = 0;
    int out_channels = 0;
    bool activation = false;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// A named parameter array and its gradient. Running statistics are blocks
/// with `learnable == false` and no gradient.
template <typename T>
struct ParamBlock {
    std::string name;
    AlignedVector<T> value;
    AlignedVector<T> grad;
    bool learnable = true;
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    /// Caches whatever backward() needs.
    virtual Tensor<T> forward(const Tensor<T>& input, Mode mode) = 0;

    /// Gradient w.r.t. the last forward input; overwrites parameter gradients.
    /// Throws Error if forward() has not run.
    virtual Tensor<T> backward(const Tensor<T>& grad_output) = 0;

    virtual std::vector<ParamBlock<T>*> blocks() { return {}; }
    virtual LayerSpec spec() const = 0;
};

/// Output size of a "same"-padded convolution: ceil(in / stride).
std::size_t conv_output_size(std::size_t in, std::size_t stride);
/// Zero rows/cols added before the input (the remainder goes after).
std::size_t conv_pad_before(std::size_t in, std::size_t kernel, std::size_t stride);

/// Cross-correlation with zero padding, computed as im2col + GEMM per sample.
template <typename T>
class Conv2d final : public Layer<T> {
public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride);

    Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<ParamBlock<T>*> blocks() override { return {&weight_, &bias_}; }
    LayerSpec spec() const override;

    /// Weight layout: [out][in][ky][kx].
    ParamBlock<T>& weight() { return weight_; }
    ParamBlock<T>& bias() { return bias_; }

private:
    std::size_t in_, out_, k_, s_;
    ParamBlock<T> weight_, bias_;
    Tensor<T> input_;
    AlignedVector<T> cols_;
    std::size_t out_h_ = 0, out_w_ = 0;
    bool cached_ = false;
};

/// Per-channel batch normalization. Train mode normalizes with biased batch
/// statistics and folds the unbiased variance into the running estimate;
/// eval mode uses the running estimates.
template <typename T>
class BatchNorm2d final : public Layer<T> {
public:
    explicit BatchNorm2d(std::size_t channels, T momentum = T(0.1), T epsilon = T(1e-5));

    Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<ParamBlock<T>*> blocks() override { return {&gain_, &shift_, &running_mean_, &running_var_}; }
    LayerSpec spec() const override;

    ParamBlock<T>& gain() { return gain_; }
    ParamBlock<T>& shift() { return shift_; }
    ParamBlock<T>& running_mean() { return running_mean_; }
    ParamBlock<T>& running_var() { return running_var_; }

private:
    std::size_t channels_;
    T momentum_, epsilon_;
    ParamBlock<T> gain_, shift_, running_mean_, running_var_;
    Tensor<T> normalized_;
    std::vector<T> inv_std_;
    Mode mode_ = Mode::Train;
    bool cached_ = false;
};

template <typename T>
class Relu final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    LayerSpec spec() const override { return {LayerKind::Relu}; }

private:
    Tensor<T> output_;
    bool cached_ = false;
};

/// (N, C, H, W) -> (N, C*H*W, 1, 1).
template <typename T>
class Flatten final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    LayerSpec spec() const override { return {LayerKind::Flatten}; }

private:
    typename Tensor<T>::Shape in_shape_{};
    bool cached_ = false;
};

/// Affine map y = W x + b on flattened inputs; W is [out][in].
template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(std::size_t in_features, std::size_t out_features);

    Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
    Tensor<T> backward(const Tensor<T>& grad_output) override;
    std::vector<ParamBlock<T>*> blocks() override { return {&weight_, &bias_}; }
    LayerSpec spec() const override;

    ParamBlock<T>& weight() { return weight_; }
    ParamBlock<T>& bias() { return bias_; }

private:
    std::size_t in_, out_;
    ParamBlock<T> weight_, bias_;
    Tensor<T> input_;
    bool cached_ = false;
};

/// Squared L2 distance per sample, averaged over the batch, with gradient
/// 2 (prediction - target) / batch w.r.t. the prediction.
template <typename T>
struct LossResult {
    T loss;
    Tensor<T> grad;
};

template <typename T>
LossResult<T> l2_loss(const Tensor<T>& prediction, const Tensor<T>& target);

/// Fills `out` with i.i.d. draws from U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
void he_uniform_init(std::span<T> out, std::size_t fan_in, Philox4x32& rng);

}  // namespace sqr
