#include "sqr_cli/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>

#include "sqr/architecture.hpp"
#include "sqr/baseline_fit.hpp"
#include "sqr/dataset.hpp"
#include "sqr/digest.hpp"
#include "sqr/error.hpp"
#include "sqr/eval.hpp"
#include "sqr/regressor.hpp"
#include "sqr/renderer.hpp"
#include "sqr/weights_io.hpp"

namespace sqr::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Globals {
    std::string preset{kDeskScale};
    int threads = 1;
    std::uint64_t seed = 0;
};

struct PresetDefaults {
    int image_size;
    std::size_t dataset_count;
    std::vector<double> split;
};

PresetDefaults preset_defaults(const std::string& preset) {
    if (preset == kPaperScale) return {256, 120000, {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}};
    if (preset == kDeskScale) return {64, 3000, {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}};
    throw InvalidArgument("unknown preset '" + preset + "'");
}

json params_json(const SuperquadricParams& p) {
    json j;
    for (std::size_t k = 0; k < kParamCount; ++k) j[std::string(kParamNames[k])] = p.values()[k];
    return j;
}

void write_snapshot(const fs::path& path, const std::string& command, const Globals& g, json options) {
    json j;
    j["tool"] = "sqr";
    j["version"] = kVersion;
    j["subcommand"] = command;
    j["preset"] = g.preset;
    j["seed"] = g.seed;
    j["threads"] = g.threads;
    j["options"] = std::move(options);
    std::ofstream out(path, std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write config snapshot " + path.string());
}

fs::path snapshot_for_file(const fs::path& output) { return fs::path(output.string() + ".config.json"); }

// Marks a directory as holding partial outputs until the command completes.
class PartialMarker {
public:
    explicit PartialMarker(fs::path dir) : path_(std::move(dir) / kIncompleteMarker) {
        std::ofstream(path_) << "command did not finish\n";
    }
    void done() { fs::remove(path_); }

private:
    fs::path path_;
};

RenderConfig render_config_for(const RangeImage& img) {
    RenderConfig cfg;
    cfg.width = img.width();
    cfg.height = img.height();
    return cfg;
}

std::vector<RangeImage> test_images(const DatasetManifest& m, std::size_t limit, int threads,
                                    std::vector<SuperquadricParams>* truths) {
    std::vector<Example> examples = load_examples(m, Split::Test, threads);
    if (examples.empty()) throw InvalidArgument("dataset has no test split: " + m.root.string());
    if (limit > 0 && limit < examples.size()) examples.erase(examples.begin() + static_cast<std::ptrdiff_t>(limit), examples.end());
    std::vector<RangeImage> images;
    images.reserve(examples.size());
    for (auto& e : examples) {
        images.push_back(std::move(e.image));
        if (truths) truths->push_back(e.params);
    }
    return images;
}

Regressor load_regressor(const fs::path& model_path, const DatasetManifest& m) {
    Regressor model = Regressor::from_weights(read_weights(model_path));
    const auto& arch = model.architecture();
    if (static_cast<int>(arch.input_width) != m.render.width || static_cast<int>(arch.input_height) != m.render.height) {
        throw InvalidArgument("model expects " + std::to_string(arch.input_width) + "x" +
                              std::to_string(arch.input_height) + " images but the dataset has " +
                              std::to_string(m.render.width) + "x" + std::to_string(m.render.height));
    }
    return model;
}

json timing_json(const TimingStats& t) {
    return json{{"mean_ms", t.mean_ms},   {"median_ms", t.median_ms}, {"stddev_ms", t.stddev_ms},
                {"count", t.count},       {"excluded", t.excluded},   {"repetitions", t.repetitions},
                {"warmup", t.warmup}};
}

// ---------------------------------------------------------------- render

struct RenderOpts {
    std::vector<double> params;
    int size = 0;
    std::string out;
    std::string pgm;
};

int cmd_render(const Globals& g, const RenderOpts& o, std::ostream& out) {
    ParamVector v{};
    std::copy(o.params.begin(), o.params.end(), v.begin());
    const SuperquadricParams params(v);
    const int size = o.size > 0 ? o.size : preset_defaults(g.preset).image_size;
    const RenderConfig cfg = RenderConfig::with_size(size);
    const RangeImage img = render_range_image(params, cfg, g.threads);
    write_range_image(o.out, img);
    if (!o.pgm.empty()) write_pgm16(o.pgm, img);
    write_snapshot(snapshot_for_file(o.out), "render", g,
                   json{{"params", params_json(params)}, {"size", size}, {"render", describe(cfg)},
                        {"out", o.out}, {"pgm", o.pgm}});
    out << "wrote " << o.out << " (" << size << "x" << size << ", " << img.nonzero_count() << " foreground pixels)\n";
    return kOk;
}

// ----------------------------------------------------------- gen-dataset

struct GenOpts {
    std::string out;
    std::size_t count = 0;
    int size = 0;
    std::vector<double> split;
};

int cmd_gen_dataset(const Globals& g, const GenOpts& o, std::ostream& out) {
    const PresetDefaults d = preset_defaults(g.preset);
    const std::size_t count = o.count > 0 ? o.count : d.dataset_count;
    const int size = o.size > 0 ? o.size : d.image_size;
    const std::vector<double> split = o.split.empty() ? d.split : o.split;
    const RenderConfig cfg = RenderConfig::with_size(size);
    const auto t0 = std::chrono::steady_clock::now();
    DatasetManifest m = generate_dataset(count, g.seed, SamplingRanges{}, cfg, o.out, g.threads);
    m = split_dataset(m, split, g.seed);
    write_manifest(m);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string digest = manifest_digest(m);
    write_snapshot(fs::path(o.out) / "config.json", "gen-dataset", g,
                   json{{"out", o.out}, {"count", count}, {"size", size}, {"split", split},
                        {"render", describe(cfg)}, {"manifest_digest", digest}});
    out << "generated " << count << " images in " << secs << " s: train " << m.count(Split::Train) << ", validation "
        << m.count(Split::Validation) << ", test " << m.count(Split::Test) << "\nmanifest digest " << digest << '\n';
    return kOk;
}

// ----------------------------------------------------------------- train

struct TrainOpts {
    std::string data;
    std::string out;
    int epochs = 0;
    std::size_t batch = 0;
    double lr = 0.0;
    std::optional<double> weight_decay;
    std::optional<std::size_t> warmup_steps;
    int patience = 0;
    std::size_t max_steps = 0;
};

int cmd_train(const Globals& g, const TrainOpts& o, std::ostream& out) {
    const DatasetManifest m = read_manifest(o.data);
    ArchitectureConfig arch = architecture_for(g.preset);
    if (static_cast<int>(arch.input_width) != m.render.width || static_cast<int>(arch.input_height) != m.render.height) {
        throw InvalidArgument("preset " + g.preset + " expects " + std::to_string(arch.input_width) +
                              "-pixel images; dataset has " + std::to_string(m.render.width));
    }
    TrainConfig tc = TrainConfig::for_preset(g.preset);
    tc.seed = g.seed;
    if (o.epochs > 0) tc.max_epochs = o.epochs;
    if (o.batch > 0) tc.batch_size = o.batch;
    if (o.lr > 0) tc.learning_rate = o.lr;
    if (o.weight_decay) tc.weight_decay = *o.weight_decay;
    if (o.warmup_steps) tc.warmup_steps = *o.warmup_steps;
    if (o.patience > 0) tc.patience = o.patience;
    validate(tc);

    fs::create_directories(o.out);
    PartialMarker marker(o.out);
    const TensorDataset train_set = to_tensors(load_examples(m, Split::Train, g.threads));
    const TensorDataset val_set = to_tensors(load_examples(m, Split::Validation, g.threads));
    Regressor model = build_model(arch, g.seed);

    TrainHooks hooks;
    hooks.checkpoint = fs::path(o.out) / "checkpoint.sqwt";
    hooks.max_steps = o.max_steps;
    hooks.on_epoch = [&out](const EpochRecord& e) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "epoch %4d  train %.6g  val %.6g  lr %.1e  %.1f s\n", e.epoch, e.train_loss,
                      e.val_loss, e.learning_rate, e.wall_seconds);
        out << buf << std::flush;
    };
    const TrainResult r = train(model, train_set, val_set, tc, hooks);
    const fs::path model_path = fs::path(o.out) / "model.sqwt";
    write_weights(model_path, r.best);
    write_train_log(fs::path(o.out) / "train_log.tsv", r.log);
    write_snapshot(fs::path(o.out) / "config.json", "train", g,
                   json{{"data", o.data},
                        {"out", o.out},
                        {"architecture", describe(arch)},
                        {"batch_size", tc.batch_size},
                        {"learning_rate", tc.learning_rate},
                        {"decay_epochs", tc.decay_epochs},
                        {"decay_factor", tc.decay_factor},
                        {"warmup_steps", tc.warmup_steps},
                        {"weight_decay", tc.weight_decay},
                        {"patience", tc.patience},
                        {"max_epochs", tc.max_epochs},
                        {"max_steps", o.max_steps},
                        {"dataset_digest", manifest_digest(m)},
                        {"best_epoch", r.log.best_epoch},
                        {"best_val_loss", r.log.best_val_loss}});
    marker.done();
    out << "best epoch " << r.log.best_epoch << " (val loss " << r.log.best_val_loss << "), model " << model_path.string()
        << '\n';
    return kOk;
}

// ------------------------------------------------------------------- fit

struct FitOpts {
    std::string image;
    std::string out;
    int max_iterations = 0;
};

int cmd_fit(const Globals& g, const FitOpts& o, std::ostream& out) {
    const RangeImage img = read_range_image(o.image);
    FitConfig fc;
    if (o.max_iterations > 0) fc.max_iterations = o.max_iterations;
    const FitResult r = fit_range_image(img, render_config_for(img), fc);
    const std::string record = format_fit_result(r);
    if (o.out.empty()) {
        out << record;
    } else {
        std::ofstream f(o.out, std::ios::trunc);
        f << record;
        if (!f) throw IoError("cannot write " + o.out);
        write_snapshot(snapshot_for_file(o.out), "fit", g,
                       json{{"image", o.image}, {"out", o.out}, {"max_iterations", fc.max_iterations}});
    }
    return kOk;
}

// ------------------------------------------------------------- eval/bench

struct EvalOpts {
    std::string data;
    std::string model;
    std::string out;
    std::size_t limit = 0;
    int repetitions = 1;
    int warmup = 1;
    int bins = kDefaultHistogramBins;
    bool scaled = false;
    std::string method = "both";
};

MethodReport evaluate_method(const std::string& name, const EstimateFn& fn, std::span<const RangeImage> images,
                             std::span<const SuperquadricParams> truths, const EvalOpts& o) {
    std::vector<std::optional<SuperquadricParams>> outputs;
    const TimingStats t = benchmark(fn, images, o.repetitions, o.warmup, &outputs);
    std::vector<SuperquadricParams> kept_truth, kept_pred;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        if (outputs[i]) {
            kept_truth.push_back(truths[i]);
            kept_pred.push_back(*outputs[i]);
        }
    }
    if (kept_pred.empty()) throw EvaluationError(name + " failed on every image");
    MethodReport r = make_method_report(name, kept_truth, kept_pred, t, o.bins);
    return o.scaled ? to_scaled_units(r) : r;
}

EstimateFn learned_fn(Regressor& model) {
    return [&model](const RangeImage& img) { return model.predict(img); };
}

EstimateFn iterative_fn(const RenderConfig& render) {
    return [render](const RangeImage& img) { return fit_range_image(img, render, FitConfig{}).params; };
}

int cmd_eval(const Globals& g, const EvalOpts& o, std::ostream& out) {
    const DatasetManifest m = read_manifest(o.data);
    std::vector<SuperquadricParams> truths;
    const std::vector<RangeImage> images = test_images(m, o.limit, g.threads, &truths);
    Regressor model = load_regressor(o.model, m);

    fs::create_directories(o.out);
    PartialMarker marker(o.out);
    EvalReport report;
    report.environment = describe_environment(g.threads);
    report.scaled_units = o.scaled;
    report.methods.push_back(evaluate_method("cnn", learned_fn(model), images, truths, o));
    report.methods.push_back(evaluate_method("iterative", iterative_fn(m.render), images, truths, o));

    emit_report(report, ReportFormat::Text, o.out);
    emit_report(report, ReportFormat::Delimited, o.out);
    emit_report(report, ReportFormat::PlotData, o.out);
    write_snapshot(fs::path(o.out) / "config.json", "eval", g,
                   json{{"data", o.data},
                        {"model", o.model},
                        {"out", o.out},
                        {"images", images.size()},
                        {"repetitions", o.repetitions},
                        {"warmup", o.warmup},
                        {"bins", o.bins},
                        {"scaled", o.scaled},
                        {"dataset_digest", manifest_digest(m)},
                        {"model_digest", to_hex(sha256_file(o.model))}});
    marker.done();
    out << format_text(report);
    return kOk;
}

int cmd_bench(const Globals& g, const EvalOpts& o, std::ostream& out) {
    if (o.method != "learned" && o.method != "iterative" && o.method != "both") {
        throw InvalidArgument("--method must be learned, iterative or both");
    }
    const DatasetManifest m = read_manifest(o.data);
    const std::vector<RangeImage> images = test_images(m, o.limit, g.threads, nullptr);
    std::optional<Regressor> model;
    if (o.method != "iterative") {
        if (o.model.empty()) throw InvalidArgument("--model is required for the learned method");
        model.emplace(load_regressor(o.model, m));
    }
    json results;
    results["environment"] = describe_environment(g.threads).cpu;
    auto run = [&](const std::string& name, const EstimateFn& fn) {
        const TimingStats t = benchmark(fn, images, o.repetitions, o.warmup);
        results[name] = timing_json(t);
        char buf[200];
        std::snprintf(buf, sizeof buf, "%-10s mean %.3f ms  median %.3f ms  sd %.3f ms  (%zu images, %zu excluded)\n",
                      name.c_str(), t.mean_ms, t.median_ms, t.stddev_ms, t.count, t.excluded);
        out << buf;
    };
    if (model) run("learned", learned_fn(*model));
    if (o.method != "learned") run("iterative", iterative_fn(m.render));
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        std::ofstream(fs::path(o.out) / "bench.json") << results.dump(2) << '\n';
        write_snapshot(fs::path(o.out) / "config.json", "bench", g,
                       json{{"data", o.data}, {"model", o.model}, {"method", o.method}, {"images", images.size()},
                            {"repetitions", o.repetitions}, {"warmup", o.warmup}});
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Superquadric recovery from range images: render, dataset, training, fitting and evaluation", "sqr"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Globals g;
    app.add_option("--preset", g.preset, "Configuration preset")
        ->check(CLI::IsMember({std::string(kDeskScale), std::string(kPaperScale)}))
        ->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::Range(1, 1024))->capture_default_str();
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();

    RenderOpts ro;
    auto* render = app.add_subcommand("render", "Render a superquadric to a range image file");
    render->add_option("--params", ro.params, "a1,a2,a3,eps1,eps2,x0,y0,z0")
        ->required()
        ->delimiter(',')
        ->expected(8);
    render->add_option("--size", ro.size, "Image width and height (default from preset)");
    render->add_option("-o,--out", ro.out, "Output range image")->required();
    render->add_option("--pgm", ro.pgm, "Optional 16-bit PGM preview");

    GenOpts go;
    auto* gen = app.add_subcommand("gen-dataset", "Generate and split a synthetic dataset");
    gen->add_option("-o,--out", go.out, "Dataset directory")->required();
    gen->add_option("--count", go.count, "Number of images (default from preset)");
    gen->add_option("--size", go.size, "Image width and height (default from preset)");
    gen->add_option("--split", go.split, "train,validation,test fractions")->delimiter(',')->expected(3);

    TrainOpts to;
    auto* tr = app.add_subcommand("train", "Train the CNN regressor");
    tr->add_option("--data", to.data, "Dataset directory")->required();
    tr->add_option("-o,--out", to.out, "Output directory")->required();
    tr->add_option("--epochs", to.epochs, "Maximum epochs (default from preset)");
    tr->add_option("--batch", to.batch, "Batch size (default from preset)");
    tr->add_option("--lr", to.lr, "Initial learning rate");
    tr->add_option("--warmup-steps", to.warmup_steps, "Linear learning-rate warmup length (default from preset)");
    tr->add_option("--weight-decay", to.weight_decay, "Decoupled weight decay (default from preset)");
    tr->add_option("--patience", to.patience, "Early-stopping patience in epochs");
    tr->add_option("--max-steps", to.max_steps, "Stop after this many optimizer steps (0 = unlimited)");

    FitOpts fo;
    auto* fit = app.add_subcommand("fit", "Fit a superquadric to a range image iteratively");
    fit->add_option("image", fo.image, "Range image file")->required();
    fit->add_option("-o,--out", fo.out, "Write the result record here instead of stdout");
    fit->add_option("--max-iterations", fo.max_iterations, "Iteration cap");

    EvalOpts eo;
    auto* ev = app.add_subcommand("eval", "Compare the CNN and the iterative fit on the test split");
    ev->add_option("--data", eo.data, "Dataset directory")->required();
    ev->add_option("--model", eo.model, "Model weights")->required();
    ev->add_option("-o,--out", eo.out, "Report directory")->required();
    ev->add_option("--limit", eo.limit, "Use only the first N test images (0 = all)");
    ev->add_option("--reps", eo.repetitions, "Timing repetitions per image")->check(CLI::PositiveNumber);
    ev->add_option("--warmup", eo.warmup, "Untimed warmup calls")->check(CLI::NonNegativeNumber);
    ev->add_option("--bins", eo.bins, "Histogram bins")->check(CLI::Range(2, 100000));
    ev->add_flag("--scaled", eo.scaled, "Report errors in scaled [0,1] units");

    EvalOpts bo;
    auto* bench = app.add_subcommand("bench", "Time per-image estimation on the test split");
    bench->add_option("--data", bo.data, "Dataset directory")->required();
    bench->add_option("--model", bo.model, "Model weights (learned method)");
    bench->add_option("--method", bo.method, "learned | iterative | both")->capture_default_str();
    bench->add_option("-o,--out", bo.out, "Directory for bench.json");
    bench->add_option("--limit", bo.limit, "Use only the first N test images (0 = all)");
    bench->add_option("--reps", bo.repetitions, "Timing repetitions per image")->check(CLI::PositiveNumber);
    bench->add_option("--warmup", bo.warmup, "Untimed warmup calls")->check(CLI::NonNegativeNumber);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUserError;
    }

    try {
        if (render->parsed()) return cmd_render(g, ro, out);
        if (gen->parsed()) return cmd_gen_dataset(g, go, out);
        if (tr->parsed()) return cmd_train(g, to, out);
        if (fit->parsed()) return cmd_fit(g, fo, out);
        if (ev->parsed()) return cmd_eval(g, eo, out);
        if (bench->parsed()) return cmd_bench(g, bo, out);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kUserError;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kUserError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kUserError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
    err << "internal error: no subcommand handled\n";
    return kInternalError;
}

}  // namespace sqr::cli
