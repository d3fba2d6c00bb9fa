#include "sqr/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace sqr {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void require_cache(bool cached, const char* layer) {
    if (!cached) throw Error(std::string(layer) + ": backward called before forward");
}

void require_shape(bool ok, const char* layer, const std::string& detail) {
    if (!ok) throw ShapeError(std::string(layer) + ": " + detail);
}

template <typename T>
ParamBlock<T> make_block(std::string name, std::size_t n, T fill, bool learnable = true) {
    ParamBlock<T> b;
    b.name = std::move(name);
    b.value.assign(n, fill);
    if (learnable) b.grad.assign(n, T{});
    b.learnable = learnable;
    return b;
}

}  // namespace

std::string_view to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::Relu: return "relu";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Dense: return "dense";
    }
    return "?";
}

std::size_t conv_output_size(std::size_t in, std::size_t stride) { return (in + stride - 1) / stride; }

std::size_t conv_pad_before(std::size_t in, std::size_t kernel, std::size_t stride) {
    const std::size_t out = conv_output_size(in, stride);
    const std::size_t needed = (out - 1) * stride + kernel;
    return needed > in ? (needed - in) / 2 : 0;
}

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride)
    : in_(in_channels), out_(out_channels), k_(kernel), s_(stride),
      weight_(make_block<T>("weight", out_channels * in_channels * kernel * kernel, T{})),
      bias_(make_block<T>("bias", out_channels, T{})) {
    if (in_ == 0 || out_ == 0 || k_ == 0 || s_ == 0) {
        throw InvalidArgument("conv: channels, kernel and stride must be positive");
    }
}

template <typename T>
LayerSpec Conv2d<T>::spec() const {
    return {LayerKind::Conv, static_cast<int>(k_), static_cast<int>(s_), static_cast<int>(in_),
            static_cast<int>(out_), false};
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& input, Mode) {
    require_shape(input.channels() == in_, "conv",
                  "expected " + std::to_string(in_) + " input channels, got " + shape_string(input.shape()));
    const std::size_t n = input.batch(), h = input.height(), w = input.width();
    require_shape(h > 0 && w > 0, "conv", "empty spatial dims");
    out_h_ = conv_output_size(h, s_);
    out_w_ = conv_output_size(w, s_);
    const std::size_t pad_t = conv_pad_before(h, k_, s_);
    const std::size_t pad_l = conv_pad_before(w, k_, s_);
    const std::size_t rows = in_ * k_ * k_;
    const std::size_t cols = out_h_ * out_w_;

    cols_.assign(n * rows * cols, T{});
    Tensor<T> out({n, out_, out_h_, out_w_});
    const ConstMapMat<T> wmat(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(rows));
    const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> bvec(bias_.value.data(), static_cast<Eigen::Index>(out_));

    for (std::size_t b = 0; b < n; ++b) {
        const T* src = input.sample(b);
        T* col = cols_.data() + b * rows * cols;
        for (std::size_t c = 0; c < in_; ++c) {
            for (std::size_t ky = 0; ky < k_; ++ky) {
                for (std::size_t kx = 0; kx < k_; ++kx) {
                    T* dst = col + ((c * k_ + ky) * k_ + kx) * cols;
                    for (std::size_t oy = 0; oy < out_h_; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s_ + ky) - static_cast<std::ptrdiff_t>(pad_t);
                        T* drow = dst + oy * out_w_;
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;  // already zero
                        const T* srow = src + (c * h + static_cast<std::size_t>(iy)) * w;
                        for (std::size_t ox = 0; ox < out_w_; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s_ + kx) - static_cast<std::ptrdiff_t>(pad_l);
                            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) drow[ox] = srow[ix];
                        }
                    }
                }
            }
        }
        const ConstMapMat<T> cmat(col, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        MapMat<T> omat(out.sample(b), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(cols));
        omat.noalias() = wmat * cmat;
        omat.colwise() += bvec;
    }
    input_ = input;
    cached_ = true;
    return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_output) {
    require_cache(cached_, "conv");
    const std::size_t n = input_.batch(), h = input_.height(), w = input_.width();
    require_shape(grad_output.shape() == typename Tensor<T>::Shape{n, out_, out_h_, out_w_}, "conv",
                  "gradient shape " + shape_string(grad_output.shape()) + " does not match output");
    const std::size_t pad_t = conv_pad_before(h, k_, s_);
    const std::size_t pad_l = conv_pad_before(w, k_, s_);
    const std::size_t rows = in_ * k_ * k_;
    const std::size_t cols = out_h_ * out_w_;
    const auto erows = static_cast<Eigen::Index>(rows);
    const auto ecols = static_cast<Eigen::Index>(cols);
    const auto eout = static_cast<Eigen::Index>(out_);

    MapMat<T> dw(weight_.grad.data(), eout, erows);
    dw.setZero();
    std::fill(bias_.grad.begin(), bias_.grad.end(), T{});
    const ConstMapMat<T> wmat(weight_.value.data(), eout, erows);
    Tensor<T> dx(input_.shape());
    RowMat<T> dcols(erows, ecols);

    for (std::size_t b = 0; b < n; ++b) {
        const ConstMapMat<T> g(grad_output.sample(b), eout, ecols);
        const ConstMapMat<T> cmat(cols_.data() + b * rows * cols, erows, ecols);
        dw.noalias() += g * cmat.transpose();
        for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += g.row(static_cast<Eigen::Index>(o)).sum();
        dcols.noalias() = wmat.transpose() * g;

        T* dst = dx.sample(b);
        for (std::size_t c = 0; c < in_; ++c) {
            for (std::size_t ky = 0; ky < k_; ++ky) {
                for (std::size_t kx = 0; kx < k_; ++kx) {
                    const T* src = dcols.data() + ((c * k_ + ky) * k_ + kx) * cols;
                    for (std::size_t oy = 0; oy < out_h_; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s_ + ky) - static_cast<std::ptrdiff_t>(pad_t);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                        T* drow = dst + (c * h + static_cast<std::size_t>(iy)) * w;
                        const T* srow = src + oy * out_w_;
                        for (std::size_t ox = 0; ox < out_w_; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s_ + kx) - static_cast<std::ptrdiff_t>(pad_l);
                            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) drow[ix] += srow[ox];
                        }
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels, T momentum, T epsilon)
    : channels_(channels), momentum_(momentum), epsilon_(epsilon),
      gain_(make_block<T>("gain", channels, T(1))),
      shift_(make_block<T>("shift", channels, T(0))),
      running_mean_(make_block<T>("running_mean", channels, T(0), false)),
      running_var_(make_block<T>("running_var", channels, T(1), false)) {
    if (channels == 0) throw InvalidArgument("batchnorm: channels must be positive");
}

template <typename T>
LayerSpec BatchNorm2d<T>::spec() const {
    return {LayerKind::BatchNorm, 0, 1, static_cast<int>(channels_), static_cast<int>(channels_), false};
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& input, Mode mode) {
    require_shape(input.channels() == channels_, "batchnorm",
                  "expected " + std::to_string(channels_) + " channels, got " + shape_string(input.shape()));
    const std::size_t n = input.batch();
    const std::size_t plane = input.height() * input.width();
    if (mode == Mode::Train && n < 2) throw InvalidArgument("batchnorm: train mode needs batch >= 2");
    const double count = static_cast<double>(n * plane);

    normalized_ = Tensor<T>(input.shape());
    Tensor<T> out(input.shape());
    inv_std_.assign(channels_, T{});
    for (std::size_t c = 0; c < channels_; ++c) {
        double mean, var;
        if (mode == Mode::Train) {
            double sum = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* x = input.sample(b) + c * plane;
                for (std::size_t i = 0; i < plane; ++i) sum += x[i];
            }
            mean = sum / count;
            double sq = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* x = input.sample(b) + c * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = x[i] - mean;
                    sq += d * d;
                }
            }
            var = sq / count;
            const double unbiased = count > 1 ? sq / (count - 1) : var;
            running_mean_.value[c] = static_cast<T>((1 - momentum_) * running_mean_.value[c] + momentum_ * mean);
            running_var_.value[c] = static_cast<T>((1 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
        } else {
            mean = running_mean_.value[c];
            var = running_var_.value[c];
        }
        const T inv_std = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(epsilon_)));
        inv_std_[c] = inv_std;
        const T m = static_cast<T>(mean);
        const T g = gain_.value[c];
        const T s = shift_.value[c];
        for (std::size_t b = 0; b < n; ++b) {
            const T* x = input.sample(b) + c * plane;
            T* xh = normalized_.sample(b) + c * plane;
            T* y = out.sample(b) + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                xh[i] = (x[i] - m) * inv_std;
                y[i] = g * xh[i] + s;
            }
        }
    }
    mode_ = mode;
    cached_ = true;
    return out;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_output) {
    require_cache(cached_, "batchnorm");
    require_shape(grad_output.shape() == normalized_.shape(), "batchnorm", "gradient shape mismatch");
    const std::size_t n = grad_output.batch();
    const std::size_t plane = grad_output.height() * grad_output.width();
    const double count = static_cast<double>(n * plane);
    Tensor<T> dx(grad_output.shape());
    for (std::size_t c = 0; c < channels_; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::size_t b = 0; b < n; ++b) {
            const T* dy = grad_output.sample(b) + c * plane;
            const T* xh = normalized_.sample(b) + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[i];
                sum_dy_xh += static_cast<double>(dy[i]) * xh[i];
            }
        }
        gain_.grad[c] = static_cast<T>(sum_dy_xh);
        shift_.grad[c] = static_cast<T>(sum_dy);
        const T scale = gain_.value[c] * inv_std_[c];
        for (std::size_t b = 0; b < n; ++b) {
            const T* dy = grad_output.sample(b) + c * plane;
            const T* xh = normalized_.sample(b) + c * plane;
            T* out = dx.sample(b) + c * plane;
            if (mode_ == Mode::Train) {
                const T mean_dy = static_cast<T>(sum_dy / count);
                const T mean_dy_xh = static_cast<T>(sum_dy_xh / count);
                for (std::size_t i = 0; i < plane; ++i) out[i] = scale * (dy[i] - mean_dy - xh[i] * mean_dy_xh);
            } else {
                for (std::size_t i = 0; i < plane; ++i) out[i] = scale * dy[i];
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Relu / Flatten

template <typename T>
Tensor<T> Relu<T>::forward(const Tensor<T>& input, Mode) {
    output_ = input;
    for (T& v : output_.values()) v = v > T{} ? v : T{};
    cached_ = true;
    return output_;
}

template <typename T>
Tensor<T> Relu<T>::backward(const Tensor<T>& grad_output) {
    require_cache(cached_, "relu");
    require_shape(grad_output.shape() == output_.shape(), "relu", "gradient shape mismatch");
    Tensor<T> dx = grad_output;
    auto out = output_.values();
    auto g = dx.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(out[i] > T{})) g[i] = T{};
    }
    return dx;
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& input, Mode) {
    in_shape_ = input.shape();
    cached_ = true;
    Tensor<T> out = input;
    out.reshape({input.batch(), input.stride(), 1, 1});
    return out;
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& grad_output) {
    require_cache(cached_, "flatten");
    Tensor<T> dx = grad_output;
    dx.reshape(in_shape_);
    return dx;
}

// ---------------------------------------------------------------------------
// Dense

template <typename T>
Dense<T>::Dense(std::size_t in_features, std::size_t out_features)
    : in_(in_features), out_(out_features),
      weight_(make_block<T>("weight", in_features * out_features, T{})),
      bias_(make_block<T>("bias", out_features, T{})) {
    if (in_ == 0 || out_ == 0) throw InvalidArgument("dense: feature counts must be positive");
}

template <typename T>
LayerSpec Dense<T>::spec() const {
    return {LayerKind::Dense, 0, 1, static_cast<int>(in_), static_cast<int>(out_), false};
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& input, Mode) {
    require_shape(input.stride() == in_, "dense",
                  "expected " + std::to_string(in_) + " features, got " + shape_string(input.shape()));
    const auto n = static_cast<Eigen::Index>(input.batch());
    Tensor<T> out({input.batch(), out_, 1, 1});
    const ConstMapMat<T> x(input.data(), n, static_cast<Eigen::Index>(in_));
    const ConstMapMat<T> wmat(weight_.value.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_));
    const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), static_cast<Eigen::Index>(out_));
    MapMat<T> y(out.data(), n, static_cast<Eigen::Index>(out_));
    // One matrix-vector product per sample, so a sample's output does not
    // depend on the batch it arrives in.
    for (Eigen::Index i = 0; i < n; ++i) y.row(i).noalias() = x.row(i) * wmat.transpose() + b;
    input_ = input;
    cached_ = true;
    return out;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_output) {
    require_cache(cached_, "dense");
    const auto n = static_cast<Eigen::Index>(input_.batch());
    require_shape(grad_output.batch() == input_.batch() && grad_output.stride() == out_, "dense",
                  "gradient shape mismatch");
    const auto ein = static_cast<Eigen::Index>(in_);
    const auto eout = static_cast<Eigen::Index>(out_);
    const ConstMapMat<T> g(grad_output.data(), n, eout);
    const ConstMapMat<T> x(input_.data(), n, ein);
    const ConstMapMat<T> wmat(weight_.value.data(), eout, ein);
    MapMat<T> dw(weight_.grad.data(), eout, ein);
    dw.noalias() = g.transpose() * x;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias_.grad.data(), eout);
    db = g.colwise().sum();
    Tensor<T> dx(input_.shape());
    MapMat<T> dxm(dx.data(), n, ein);
    dxm.noalias() = g * wmat;
    return dx;
}

// ---------------------------------------------------------------------------

template <typename T>
LossResult<T> l2_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
    if (prediction.shape() != target.shape()) {
        throw ShapeError("l2_loss: prediction " + shape_string(prediction.shape()) + " vs target " +
                         shape_string(target.shape()));
    }
    const std::size_t n = prediction.batch();
    if (n == 0) throw ShapeError("l2_loss: empty batch");
    LossResult<T> r{T{}, Tensor<T>(prediction.shape())};
    double sum = 0.0;
    auto p = prediction.values();
    auto t = target.values();
    auto g = r.grad.values();
    const T scale = T(2) / static_cast<T>(n);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const T d = p[i] - t[i];
        sum += static_cast<double>(d) * d;
        g[i] = scale * d;
    }
    r.loss = static_cast<T>(sum / static_cast<double>(n));
    return r;
}

template <typename T>
void he_uniform_init(std::span<T> out, std::size_t fan_in, Philox4x32& rng) {
    if (fan_in == 0) throw InvalidArgument("he_uniform_init: fan_in must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (T& v : out) v = static_cast<T>(rng.uniform(-bound, bound));
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Relu<float>;
template class Relu<double>;
template class Flatten<float>;
template class Flatten<double>;
template class Dense<float>;
template class Dense<double>;
template LossResult<float> l2_loss(const Tensor<float>&, const Tensor<float>&);
template LossResult<double> l2_loss(const Tensor<double>&, const Tensor<double>&);
template void he_uniform_init(std::span<float>, std::size_t, Philox4x32&);
template void he_uniform_init(std::span<double>, std::size_t, Philox4x32&);

}  // namespace sqr
