#include <benchmark/benchmark.h>

#include <vector>

#include "sqr/architecture.hpp"
#include "sqr/baseline_fit.hpp"
#include "sqr/layers.hpp"
#include "sqr/regressor.hpp"
#include "sqr/renderer.hpp"
#include "sqr/rng.hpp"

namespace {

using namespace sqr;

const SuperquadricParams kShape(45, 30, 55, 0.3, 0.7, 120, 135, 128);

void BM_ConvForward(benchmark::State& state) {
    const auto size = static_cast<std::size_t>(state.range(0));
    Conv2d<float> conv(16, 32, 3, 1);
    Philox4x32 rng(1);
    he_uniform_init<float>(conv.weight().value, 16 * 9, rng);
    Tensor<float> x({8, 16, size, size});
    for (float& v : x.values()) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, Mode::Eval));
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_ConvForward)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_Render(benchmark::State& state) {
    const RenderConfig cfg = RenderConfig::with_size(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(render_range_image(kShape, cfg));
}
BENCHMARK(BM_Render)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FitRangeImage(benchmark::State& state) {
    const RenderConfig cfg = RenderConfig::with_size(static_cast<int>(state.range(0)));
    const RangeImage img = render_range_image(kShape, cfg);
    for (auto _ : state) benchmark::DoNotOptimize(fit_range_image(img, cfg, FitConfig{}));
}
BENCHMARK(BM_FitRangeImage)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_PredictDesk(benchmark::State& state) {
    Regressor model = build_model(desk_scale_architecture(), 3);
    const std::vector<RangeImage> imgs(static_cast<std::size_t>(state.range(0)),
                                       render_range_image(kShape, RenderConfig::with_size(64)));
    for (auto _ : state) benchmark::DoNotOptimize(model.predict_batch(imgs));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PredictDesk)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
