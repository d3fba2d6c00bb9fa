#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "sqr/adam.hpp"
#include "sqr/error.hpp"
#include "sqr/regressor.hpp"

namespace sqr {

namespace {

constexpr std::uint64_t kShuffleStream = 0x7261'696e'0000'0001ull;

void gather(const TensorDataset& d, std::span<const std::size_t> idx, Tensor<float>& x, Tensor<float>& y) {
    const std::size_t xs = d.images.stride(), ys = d.targets.stride();
    x = Tensor<float>({idx.size(), d.images.channels(), d.images.height(), d.images.width()});
    y = Tensor<float>({idx.size(), kParamCount, 1, 1});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        std::copy_n(d.images.sample(idx[i]), xs, x.sample(i));
        std::copy_n(d.targets.sample(idx[i]), ys, y.sample(i));
    }
}

// Batches of the permuted index list; a trailing batch of one sample is
// dropped because batchnorm needs two in train mode.
std::vector<std::span<const std::size_t>> make_batches(const std::vector<std::size_t>& perm, std::size_t batch) {
    std::vector<std::span<const std::size_t>> out;
    for (std::size_t start = 0; start < perm.size(); start += batch) {
        const std::size_t n = std::min(batch, perm.size() - start);
        if (n >= 2) out.emplace_back(perm.data() + start, n);
    }
    return out;
}

std::vector<AlignedVector<float>> snapshot_state(Network<float>& net) {
    std::vector<AlignedVector<float>> s;
    for (auto* b : net.blocks()) {
        if (!b->learnable) s.push_back(b->value);
    }
    return s;
}

void restore_state(Network<float>& net, const std::vector<AlignedVector<float>>& s) {
    std::size_t i = 0;
    for (auto* b : net.blocks()) {
        if (!b->learnable) b->value = s[i++];
    }
}

}  // namespace

TrainConfig TrainConfig::paper_scale() { return {}; }

TrainConfig TrainConfig::desk_scale() {
    TrainConfig c;
    c.batch_size = 8;
    c.learning_rate = 5e-3;
    c.decay_epochs = {36, 51};
    c.warmup_steps = 250;
    c.weight_decay = 0.1;
    c.patience = 40;
    c.max_epochs = 60;
    return c;
}

TrainConfig TrainConfig::for_preset(std::string_view preset) {
    if (preset == kPaperScale) return paper_scale();
    if (preset == kDeskScale) return desk_scale();
    throw InvalidArgument("unknown preset '" + std::string(preset) + "'");
}

void validate(const TrainConfig& c) {
    if (c.batch_size < 2) throw InvalidArgument("batch size must be at least 2 (batchnorm)");
    if (c.patience < 1) throw InvalidArgument("patience must be at least 1");
    if (c.max_epochs < 1) throw InvalidArgument("max epochs must be at least 1");
    if (!(c.weight_decay >= 0.0) || c.learning_rate * c.weight_decay >= 1.0) {
        throw InvalidArgument("weight decay must be non-negative and below 1 / learning rate");
    }
    if (!(c.learning_rate > 0.0) || !(c.decay_factor > 0.0)) {
        throw InvalidArgument("learning rate and decay factor must be positive");
    }
}

double scheduled_learning_rate(const TrainConfig& cfg, int epoch) {
    double lr = cfg.learning_rate;
    for (int boundary : cfg.decay_epochs) {
        if (epoch > boundary) lr *= cfg.decay_factor;
    }
    return lr;
}

double evaluate_loss(Regressor& model, const TensorDataset& data, std::size_t batch_size) {
    if (data.size() == 0) throw InvalidArgument("evaluate_loss: empty dataset");
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    double total = 0.0;
    Tensor<float> x, y;
    for (std::size_t start = 0; start < all.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, all.size() - start);
        gather(data, std::span<const std::size_t>(all.data() + start, n), x, y);
        const auto r = l2_loss(model.forward_eval(x), y);
        total += static_cast<double>(r.loss) * static_cast<double>(n);
    }
    return total / static_cast<double>(data.size());
}

TrainResult train(Regressor& model, const TensorDataset& train_set, const TensorDataset& val_set,
                  const TrainConfig& cfg, const TrainHooks& hooks) {
    validate(cfg);
    if (train_set.size() < 2) throw InvalidArgument("training split needs at least two images");
    if (val_set.size() == 0) throw InvalidArgument("validation split is empty");

    Network<float>& net = model.network();
    AdamConfig acfg;
    acfg.learning_rate = cfg.learning_rate;
    acfg.weight_decay = cfg.weight_decay;
    Adam<float> adam(acfg);
    Philox4x32 shuffle_rng(cfg.seed, kShuffleStream);
    auto permute = [&] {
        std::vector<std::size_t> perm(train_set.size());
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[shuffle_rng.below(i)]);
        return perm;
    };

    TrainResult result;
    TrainLog& log = result.log;
    Tensor<float> x, y;
    std::vector<std::size_t> perm = permute();

    {
        // Untrained train-mode loss over the first epoch's batches; running
        // statistics are restored afterwards.
        const auto saved = snapshot_state(net);
        double sum = 0.0;
        std::size_t count = 0;
        for (auto batch : make_batches(perm, cfg.batch_size)) {
            gather(train_set, batch, x, y);
            sum += static_cast<double>(l2_loss(net.forward(x, Mode::Train), y).loss) * static_cast<double>(batch.size());
            count += batch.size();
        }
        restore_state(net, saved);
        log.initial_loss = sum / static_cast<double>(count);
    }

    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    bool step_limit_hit = false;
    for (int epoch = 1; epoch <= cfg.max_epochs && !step_limit_hit; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        if (epoch > 1) perm = permute();
        const double lr = scheduled_learning_rate(cfg, epoch);

        double sum = 0.0;
        std::size_t count = 0;
        const auto batches = make_batches(perm, cfg.batch_size);
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const double ramp = log.steps < cfg.warmup_steps
                                    ? static_cast<double>(log.steps + 1) / static_cast<double>(cfg.warmup_steps)
                                    : 1.0;
            adam.set_learning_rate(lr * ramp);
            gather(train_set, batches[bi], x, y);
            const auto out = net.forward(x, Mode::Train);
            const auto loss = l2_loss(out, y);
            if (!std::isfinite(loss.loss)) {
                throw EvaluationError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(bi));
            }
            net.backward(loss.grad);
            adam.step(net.learnable_blocks());
            ++log.steps;
            sum += static_cast<double>(loss.loss) * static_cast<double>(batches[bi].size());
            count += batches[bi].size();
            if (hooks.max_steps != 0 && log.steps >= hooks.max_steps) {
                step_limit_hit = true;
                break;
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = sum / static_cast<double>(count);
        rec.val_loss = evaluate_loss(model, val_set);
        rec.learning_rate = lr;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(rec);

        if (rec.val_loss < best) {
            best = rec.val_loss;
            log.best_epoch = epoch;
            log.best_val_loss = rec.val_loss;
            result.best = net.export_weights();
            if (hooks.checkpoint) write_weights(*hooks.checkpoint, result.best);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            log.early_stopped = true;
            break;
        }
        if (hooks.stop_when && hooks.stop_when(rec)) break;
    }
    if (log.best_epoch == 0) throw EvaluationError("validation loss never became finite");
    net.import_weights(result.best);
    return result;
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    char buf[256];
    std::snprintf(buf, sizeof buf, "#epoch\ttrain_loss\tval_loss\tlearning_rate\twall_seconds\t(initial_loss=%.9g)\n",
                  log.initial_loss);
    out << buf;
    for (const auto& e : log.epochs) {
        std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.9g\t%.9g\t%.3f\n", e.epoch, e.train_loss, e.val_loss,
                      e.learning_rate, e.wall_seconds);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "best\t%d\t%.9g\tearly_stopped=%d\tsteps=%zu\n", log.best_epoch,
                  log.best_val_loss, log.early_stopped ? 1 : 0, log.steps);
    out << buf;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sqr
