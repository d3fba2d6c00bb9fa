#include "sqr/regressor.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "sqr/error.hpp"

namespace sqr {

TensorDataset to_tensors(std::span<const Example> examples) {
    if (examples.empty()) throw InvalidArgument("empty example set");
    const auto h = static_cast<std::size_t>(examples.front().image.height());
    const auto w = static_cast<std::size_t>(examples.front().image.width());
    TensorDataset d{Tensor<float>({examples.size(), 1, h, w}), Tensor<float>({examples.size(), kParamCount, 1, 1})};
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& ex = examples[i];
        if (static_cast<std::size_t>(ex.image.height()) != h || static_cast<std::size_t>(ex.image.width()) != w) {
            throw ShapeError("examples have mixed image sizes");
        }
        float* dst = d.images.sample(i);
        const auto& src = ex.image.depths();
        for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] / static_cast<float>(kFrameSize);
        const ScaledParams s = scale_params(ex.params);
        for (std::size_t k = 0; k < kParamCount; ++k) d.targets.sample(i)[k] = static_cast<float>(s.values[k]);
    }
    return d;
}

std::vector<Example> load_examples(const DatasetManifest& manifest, Split split, int threads) {
    const auto idx = manifest.indices(split);
    std::vector<std::optional<Example>> slots(idx.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex mu;
    auto work = [&] {
        for (std::size_t i = next++; i < idx.size(); i = next++) {
            try {
                auto [img, params] = load_record(manifest, idx[i]);
                slots[i].emplace(Example{std::move(img), params});
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
                next = idx.size();
            }
        }
    };
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    }
    if (error) std::rethrow_exception(error);
    std::vector<Example> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

Regressor::Regressor(ArchitectureConfig cfg) : net_(std::move(cfg)) {}

Regressor Regressor::from_weights(const ModelWeights& weights) {
    for (auto preset : {kDeskScale, kPaperScale}) {
        ArchitectureConfig cfg = architecture_for(preset);
        if (architecture_digest(cfg) == weights.architecture) {
            Regressor r(std::move(cfg));
            r.load(weights);
            return r;
        }
    }
    throw FormatError("weights do not match any known architecture preset");
}

Tensor<float> Regressor::forward_eval(const Tensor<float>& images) { return net_.forward(images, Mode::Eval); }

std::vector<SuperquadricParams> Regressor::predict_batch(std::span<const RangeImage> imgs) {
    if (imgs.empty()) return {};
    const auto& cfg = net_.config();
    const auto h = static_cast<std::size_t>(cfg.input_height);
    const auto w = static_cast<std::size_t>(cfg.input_width);
    Tensor<float> x({imgs.size(), 1, h, w});
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        if (static_cast<std::size_t>(imgs[i].height()) != h || static_cast<std::size_t>(imgs[i].width()) != w) {
            throw ShapeError("image is " + std::to_string(imgs[i].width()) + "x" + std::to_string(imgs[i].height()) +
                             " but the " + cfg.preset + " model expects " + std::to_string(w) + "x" +
                             std::to_string(h));
        }
        const auto& src = imgs[i].depths();
        float* dst = x.sample(i);
        for (std::size_t k = 0; k < src.size(); ++k) dst[k] = src[k] / static_cast<float>(kFrameSize);
    }
    const Tensor<float> y = forward_eval(x);
    std::vector<SuperquadricParams> out;
    out.reserve(imgs.size());
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        ParamVector raw{};
        for (std::size_t k = 0; k < kParamCount; ++k) raw[k] = y.sample(i)[k];
        out.push_back(unscale_clamped(raw));
    }
    return out;
}

SuperquadricParams Regressor::predict(const RangeImage& img) {
    return predict_batch(std::span<const RangeImage>(&img, 1)).front();
}

Regressor build_model(const ArchitectureConfig& cfg, std::uint64_t seed) {
    Regressor r(cfg);
    r.network().init(seed);
    return r;
}

}  // namespace sqr
