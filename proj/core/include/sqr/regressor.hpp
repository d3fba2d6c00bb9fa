#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqr/architecture.hpp"
#include "sqr/dataset.hpp"
#include "sqr/network.hpp"
#include "sqr/range_image.hpp"
#include "sqr/superquadric.hpp"
#include "sqr/weights_io.hpp"

namespace sqr {

/// A range image with its ground truth.
struct Example {
    RangeImage image;
    SuperquadricParams params;
};

/// Images scaled to [0, 1] (depth / 256) and targets in scaled parameter space.
struct TensorDataset {
    Tensor<float> images;   // (N, 1, H, W)
    Tensor<float> targets;  // (N, 8, 1, 1)
    std::size_t size() const noexcept { return images.batch(); }
};

TensorDataset to_tensors(std::span<const Example> examples);

/// Decodes every record of `split`, in manifest order. Decoding fans out over
/// `threads` workers but writes into fixed slots, so the result is identical
/// for any worker count.
std::vector<Example> load_examples(const DatasetManifest& manifest, Split split, int threads = 1);

/// CNN regressor: a float network plus input/output conventions.
class Regressor {
public:
    explicit Regressor(ArchitectureConfig cfg);

    /// Architecture is recovered by matching the weights' digest against the
    /// known presets.
    static Regressor from_weights(const ModelWeights& weights);

    Network<float>& network() noexcept { return net_; }
    const ArchitectureConfig& architecture() const noexcept { return net_.config(); }

    /// Eval-mode forward pass, output clamped into the parameter ranges and
    /// unscaled. Throws ShapeError when the image size does not match.
    SuperquadricParams predict(const RangeImage& img);
    std::vector<SuperquadricParams> predict_batch(std::span<const RangeImage> imgs);

    /// Raw scaled network outputs, (N, 8, 1, 1), eval mode.
    Tensor<float> forward_eval(const Tensor<float>& images);

    ModelWeights weights() { return net_.export_weights(); }
    void load(const ModelWeights& w) { net_.import_weights(w); }

private:
    Network<float> net_;
};

/// He-uniform-initialized model for `cfg`.
Regressor build_model(const ArchitectureConfig& cfg, std::uint64_t seed);

struct TrainConfig {
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    /// Learning rate is multiplied by `decay_factor` after each listed epoch.
    std::vector<int> decay_epochs{250, 500};
    double decay_factor = 0.1;
    /// The rate ramps linearly from lr/warmup_steps up to lr over the first
    /// warmup_steps optimizer steps (0 disables the ramp).
    std::size_t warmup_steps = 0;
    /// Decoupled weight decay passed to Adam (0 disables it).
    double weight_decay = 0.0;
    int patience = 15;
    int max_epochs = 1000;
    std::uint64_t seed = 0;

    static TrainConfig paper_scale();
    static TrainConfig desk_scale();
    static TrainConfig for_preset(std::string_view preset);
};

void validate(const TrainConfig& cfg);

/// Learning rate in effect during (1-based) `epoch`.
double scheduled_learning_rate(const TrainConfig& cfg, int epoch);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;
    double wall_seconds = 0.0;
};

struct TrainLog {
    /// Train-mode loss of the untrained model over the first epoch's batches.
    double initial_loss = 0.0;
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    bool early_stopped = false;
    std::size_t steps = 0;
};

struct TrainResult {
    ModelWeights best;
    TrainLog log;
};

struct TrainHooks {
    std::function<void(const EpochRecord&)> on_epoch;
    /// When set, the best-so-far weights are written here after each improvement.
    std::optional<std::filesystem::path> checkpoint;
    /// Stop after this many optimizer steps (0 = unlimited).
    std::size_t max_steps = 0;
    /// Checked after each epoch's bookkeeping; returning true ends training.
    std::function<bool(const EpochRecord&)> stop_when;
};

/// Shuffled minibatch Adam on the mean squared L2 loss; validation loss in
/// eval mode every epoch; stops after `patience` epochs without a strictly
/// lower validation loss or at `max_epochs`. Leaves the best-epoch weights
/// loaded in `model` and returns them.
TrainResult train(Regressor& model, const TensorDataset& train_set, const TensorDataset& val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Mean L2 loss over `data` in eval mode.
double evaluate_loss(Regressor& model, const TensorDataset& data, std::size_t batch_size = 64);

/// Line-delimited log: a header line, then one tab-separated line per epoch
/// (epoch, train_loss, val_loss, learning_rate, wall_seconds), then a
/// "best" line.
void write_train_log(const std::filesystem::path& path, const TrainLog& log);

}  // namespace sqr
