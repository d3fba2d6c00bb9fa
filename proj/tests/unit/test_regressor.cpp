#include <gtest/gtest.h>

#include <filesystem>

#include "sqr/architecture.hpp"
#include "sqr/dataset.hpp"
#include "sqr/error.hpp"
#include "sqr/regressor.hpp"
#include "sqr/weights_io.hpp"

using namespace sqr;

namespace {

std::vector<Example> render_examples(std::size_t n, std::uint64_t seed) {
    const RenderConfig cfg = RenderConfig::with_size(64);
    std::vector<Example> out;
    for (std::size_t i = 0; i < n; ++i) {
        Philox4x32 rng(seed, i);
        const auto p = sample_params(rng, SamplingRanges{});
        out.push_back({render_range_image(p, cfg), p});
    }
    return out;
}

}  // namespace

TEST(Architecture, PaperPresetStructure) {
    const auto cfg = paper_scale_architecture();
    EXPECT_EQ(conv_layer_count(cfg), 13u);
    const auto first = std::find_if(cfg.layers.begin(), cfg.layers.end(),
                                    [](const LayerSpec& s) { return s.kind == LayerKind::Conv; });
    EXPECT_EQ(first->kernel, 7);
    EXPECT_EQ(first->stride, 2);
    EXPECT_EQ(cfg.layers.back().kind, LayerKind::Dense);
    EXPECT_EQ(cfg.layers.back().out_channels, 8);
    EXPECT_FALSE(cfg.layers.back().activation);
    EXPECT_EQ(trace_shapes(cfg, 3).back(), (std::array<std::size_t, 4>{3, 8, 1, 1}));
    for (std::size_t i = 0; i + 1 < cfg.layers.size(); ++i) {
        if (cfg.layers[i].kind == LayerKind::Conv) EXPECT_EQ(cfg.layers[i + 1].kind, LayerKind::BatchNorm);
    }
}

TEST(Architecture, DeskPresetStructure) {
    const auto cfg = desk_scale_architecture();
    EXPECT_EQ(conv_layer_count(cfg), 8u);
    EXPECT_EQ(cfg.input_width, 64);
    EXPECT_EQ(trace_shapes(cfg, 2).back(), (std::array<std::size_t, 4>{2, 8, 1, 1}));
}

TEST(Architecture, InconsistentChainRejected) {
    auto cfg = desk_scale_architecture();
    cfg.layers[3].in_channels += 1;  // second convolution
    EXPECT_THROW(validate(cfg), InvalidArgument);
    cfg = desk_scale_architecture();
    cfg.layers.back().out_channels = 7;
    EXPECT_THROW(validate(cfg), InvalidArgument);
}

TEST(Regressor, PaperScaleForwardGivesEightOutputs) {
    Regressor model = build_model(paper_scale_architecture(), 1);
    const auto y = model.forward_eval(Tensor<float>({1, 1, 256, 256}, 0.3f));
    EXPECT_EQ(y.shape(), (Tensor<float>::Shape{1, 8, 1, 1}));
}

TEST(Regressor, DeskForwardAndSeedDeterminism) {
    Regressor a = build_model(desk_scale_architecture(), 5);
    Regressor b = build_model(desk_scale_architecture(), 5);
    Regressor c = build_model(desk_scale_architecture(), 6);
    EXPECT_EQ(a.weights(), b.weights());
    EXPECT_NE(a.weights(), c.weights());
    EXPECT_EQ(a.forward_eval(Tensor<float>({2, 1, 64, 64}, 0.5f)).shape(), (Tensor<float>::Shape{2, 8, 1, 1}));
}

TEST(Regressor, PredictionIsPureAndInRange) {
    Regressor model = build_model(desk_scale_architecture(), 7);
    const auto ex = render_examples(1, 3);
    const std::vector<RangeImage> imgs{ex[0].image, ex[0].image};
    const auto out = model.predict_batch(imgs);
    EXPECT_EQ(out[0], out[1]);
    EXPECT_EQ(model.predict(ex[0].image), out[0]);
    const auto zero = model.predict(RangeImage(64, 64));
    for (std::size_t k = 0; k < kParamCount; ++k) {
        EXPECT_GE(zero.values()[k], param_ranges()[k].lo);
        EXPECT_LE(zero.values()[k], param_ranges()[k].hi);
    }
    EXPECT_THROW(model.predict(RangeImage(32, 32)), ShapeError);
}

TEST(Weights, RoundTripAndRejections) {
    Regressor model = build_model(desk_scale_architecture(), 9);
    const ModelWeights w = model.weights();
    const auto bytes = encode_weights(w);
    EXPECT_EQ(decode_weights(bytes), w);
    EXPECT_EQ(encode_weights(decode_weights(bytes)), bytes);
    const auto path = std::filesystem::temp_directory_path() / "sqr_test_weights.sqwt";
    write_weights(path, w);
    EXPECT_EQ(read_weights(path), w);
    std::filesystem::remove(path);

    auto bad = bytes;
    bad[1] = 'X';
    EXPECT_THROW(decode_weights(bad), FormatError);
    bad = bytes;
    bad.push_back(0);
    EXPECT_THROW(decode_weights(bad), FormatError);
    bad = bytes;
    bad.resize(bytes.size() - 3);
    EXPECT_THROW(decode_weights(bad), FormatError);

    Regressor other = build_model(paper_scale_architecture(), 1);
    EXPECT_THROW(other.load(w), FormatError);
    ModelWeights neg = w;
    for (auto& b : neg.blocks) {
        if (b.name.find("running_var") != std::string::npos) {
            b.values[0] = 0.0f;
            break;
        }
    }
    EXPECT_THROW(model.load(neg), FormatError);
    EXPECT_EQ(Regressor::from_weights(w).weights(), w);
}

TEST(Schedule, StepDecayAtEpochBoundaries) {
    const TrainConfig c = TrainConfig::paper_scale();
    EXPECT_EQ(c.batch_size, 256u);
    EXPECT_EQ(c.patience, 15);
    EXPECT_DOUBLE_EQ(scheduled_learning_rate(c, 1), 1e-3);
    EXPECT_DOUBLE_EQ(scheduled_learning_rate(c, 250), 1e-3);
    EXPECT_NEAR(scheduled_learning_rate(c, 251), 1e-4, 1e-18);
    EXPECT_NEAR(scheduled_learning_rate(c, 500), 1e-4, 1e-18);
    EXPECT_NEAR(scheduled_learning_rate(c, 501), 1e-5, 1e-19);
    EXPECT_NEAR(scheduled_learning_rate(c, 650), 1e-5, 1e-19);
}

TEST(Train, ConfigValidation) {
    TrainConfig c = TrainConfig::desk_scale();
    c.batch_size = 1;
    EXPECT_THROW(validate(c), InvalidArgument);
    c = TrainConfig::desk_scale();
    c.patience = 0;
    EXPECT_THROW(validate(c), InvalidArgument);
}

class TrainSmall : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        train_ = new TensorDataset(to_tensors(render_examples(24, 100)));
        val_ = new TensorDataset(to_tensors(render_examples(8, 200)));
    }
    static void TearDownTestSuite() {
        delete train_;
        delete val_;
    }
    static TrainConfig config() {
        TrainConfig c = TrainConfig::desk_scale();
        c.batch_size = 8;
        c.max_epochs = 3;
        c.seed = 4;
        return c;
    }
    static TensorDataset* train_;
    static TensorDataset* val_;
};
TensorDataset* TrainSmall::train_ = nullptr;
TensorDataset* TrainSmall::val_ = nullptr;

TEST_F(TrainSmall, DeterministicLogAndWeights) {
    Regressor a = build_model(desk_scale_architecture(), 1);
    Regressor b = build_model(desk_scale_architecture(), 1);
    const auto ra = train(a, *train_, *val_, config());
    const auto rb = train(b, *train_, *val_, config());
    ASSERT_EQ(ra.log.epochs.size(), rb.log.epochs.size());
    for (std::size_t i = 0; i < ra.log.epochs.size(); ++i) {
        EXPECT_EQ(ra.log.epochs[i].train_loss, rb.log.epochs[i].train_loss);
        EXPECT_EQ(ra.log.epochs[i].val_loss, rb.log.epochs[i].val_loss);
        EXPECT_EQ(ra.log.epochs[i].learning_rate, rb.log.epochs[i].learning_rate);
        EXPECT_EQ(ra.log.epochs[i].epoch, static_cast<int>(i) + 1);
    }
    EXPECT_EQ(ra.best, rb.best);
}

TEST_F(TrainSmall, FirstEpochImprovesOnUntrainedLoss) {
    Regressor m = build_model(desk_scale_architecture(), 2);
    const auto r = train(m, *train_, *val_, config());
    EXPECT_LT(r.log.epochs.front().train_loss, r.log.initial_loss);
}

TEST_F(TrainSmall, LongWarmupBarelyMovesWeights) {
    TrainConfig c = config();
    c.max_epochs = 1;
    c.weight_decay = 0.0;
    const auto moved = [&](std::size_t warmup) {
        Regressor m = build_model(desk_scale_architecture(), 5);
        std::vector<std::vector<float>> start;
        for (auto* b : m.network().learnable_blocks()) start.emplace_back(b->value.begin(), b->value.end());
        c.warmup_steps = warmup;
        train(m, *train_, *val_, c);
        double d = 0.0;
        const auto blocks = m.network().learnable_blocks();
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            for (std::size_t k = 0; k < start[i].size(); ++k) {
                d = std::max(d, std::abs(double(blocks[i]->value[k]) - double(start[i][k])));
            }
        }
        return d;
    };
    // Three Adam steps move a weight by up to about 3 lr; a long ramp scales that by ~1e-6.
    EXPECT_GT(moved(0), 0.5 * c.learning_rate);
    EXPECT_LT(moved(1000000), 1e-5 * c.learning_rate);
}

TEST_F(TrainSmall, BestWeightsReproduceBestValidationLoss) {
    Regressor m = build_model(desk_scale_architecture(), 3);
    const auto r = train(m, *train_, *val_, config());
    double best = r.log.epochs.front().val_loss;
    for (const auto& e : r.log.epochs) best = std::min(best, e.val_loss);
    EXPECT_EQ(r.log.best_val_loss, best);
    Regressor reloaded = Regressor::from_weights(r.best);
    EXPECT_NEAR(evaluate_loss(reloaded, *val_), r.log.best_val_loss, 1e-6);
}

TEST_F(TrainSmall, EarlyStoppingHonoursPatience) {
    Regressor m = build_model(desk_scale_architecture(), 3);
    TrainConfig c = config();
    c.max_epochs = 40;
    c.patience = 1;
    c.learning_rate = 0.05;
    const auto r = train(m, *train_, *val_, c);
    if (r.log.early_stopped) {
        EXPECT_EQ(static_cast<int>(r.log.epochs.size()), r.log.best_epoch + c.patience);
    } else {
        EXPECT_EQ(r.log.epochs.size(), 40u);
    }
}

TEST_F(TrainSmall, StepCapAndCheckpoint) {
    Regressor m = build_model(desk_scale_architecture(), 3);
    TrainHooks hooks;
    hooks.max_steps = 4;
    hooks.checkpoint = std::filesystem::temp_directory_path() / "sqr_test_ckpt.sqwt";
    int calls = 0;
    hooks.on_epoch = [&](const EpochRecord&) { ++calls; };
    const auto r = train(m, *train_, *val_, config(), hooks);
    EXPECT_EQ(r.log.steps, 4u);
    EXPECT_EQ(calls, static_cast<int>(r.log.epochs.size()));
    EXPECT_EQ(read_weights(*hooks.checkpoint), r.best);
    std::filesystem::remove(*hooks.checkpoint);
}

TEST_F(TrainSmall, NonFiniteLossAbortsWithBatchIndex) {
    TensorDataset poisoned = *train_;
    poisoned.targets.data()[3] = std::numeric_limits<float>::quiet_NaN();
    Regressor m = build_model(desk_scale_architecture(), 3);
    try {
        train(m, poisoned, *val_, config());
        FAIL() << "expected EvaluationError";
    } catch (const EvaluationError& e) {
        EXPECT_NE(std::string(e.what()).find("batch"), std::string::npos);
    }
}

TEST_F(TrainSmall, EmptySplitsRejected) {
    Regressor m = build_model(desk_scale_architecture(), 3);
    EXPECT_THROW(train(m, TensorDataset{}, *val_, config()), InvalidArgument);
    EXPECT_THROW(train(m, *train_, TensorDataset{}, config()), InvalidArgument);
}
