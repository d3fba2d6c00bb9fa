#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sqr/range_image.hpp"
#include "sqr/superquadric.hpp"

namespace sqr {

/// Per-parameter mean of |truth - prediction|, in the units of the inputs.
ParamVector mae(std::span<const SuperquadricParams> truths,
                std::span<const SuperquadricParams> predictions);

/// Same metric on already-scaled vectors.
ParamVector mae_scaled(std::span<const ScaledParams> truths, std::span<const ScaledParams> predictions);

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::uint64_t> counts;

    double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
    double bin_center(std::size_t i) const { return lo + (static_cast<double>(i) + 0.5) * bin_width(); }
    std::uint64_t total() const;
    friend bool operator==(const Histogram&, const Histogram&) = default;
};

inline constexpr int kDefaultHistogramBins = 64;
inline constexpr double kHistogramSigmaSpan = 4.0;

/// Signed errors (prediction - truth): mean, population standard deviation and
/// a histogram over mean +- 4 sigma. Values outside land in the edge bins.
struct ErrorDistribution {
    std::size_t samples = 0;
    ParamVector mean{};
    ParamVector stddev{};
    std::array<Histogram, kParamCount> histograms;
    friend bool operator==(const ErrorDistribution&, const ErrorDistribution&) = default;
};

ErrorDistribution error_distribution(std::span<const SuperquadricParams> truths,
                                     std::span<const SuperquadricParams> predictions,
                                     int bins = kDefaultHistogramBins);
ErrorDistribution error_distribution_from_errors(std::span<const ParamVector> errors,
                                                 int bins = kDefaultHistogramBins);

struct TimingStats {
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double stddev_ms = 0.0;
    std::size_t count = 0;
    std::size_t excluded = 0;
    int repetitions = 1;
    int warmup = 0;
    friend bool operator==(const TimingStats&, const TimingStats&) = default;
};

struct EnvironmentInfo {
    std::string cpu;
    int threads = 1;
    friend bool operator==(const EnvironmentInfo&, const EnvironmentInfo&) = default;
};

EnvironmentInfo describe_environment(int threads);

using EstimateFn = std::function<SuperquadricParams(const RangeImage&)>;

/// Times `estimate` per image. The first `warmup` images are run once untimed.
/// Each remaining measurement is the mean over `repetitions` calls on that
/// image; images whose estimate throws are excluded and counted. When
/// `outputs` is given it receives the last estimate per image (empty when the
/// image was excluded).
TimingStats benchmark(const EstimateFn& estimate, std::span<const RangeImage> images,
                      int repetitions = 1, int warmup = 1,
                      std::vector<std::optional<SuperquadricParams>>* outputs = nullptr);

struct MethodReport {
    std::string method;
    ParamVector mae{};
    ErrorDistribution errors;
    TimingStats timing;
    friend bool operator==(const MethodReport&, const MethodReport&) = default;
};

struct EvalReport {
    EnvironmentInfo environment;
    bool scaled_units = false;
    std::vector<MethodReport> methods;
    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

MethodReport make_method_report(std::string method, std::span<const SuperquadricParams> truths,
                                std::span<const SuperquadricParams> predictions, TimingStats timing,
                                int bins = kDefaultHistogramBins);

/// Rescales MAE and error statistics by each parameter's range width, giving
/// the same numbers as evaluating in scaled [0,1] space.
MethodReport to_scaled_units(const MethodReport& report);

/// Full-scale published figures, kept as context next to desk-scale results.
struct ReferenceRow {
    std::string method;
    ParamVector mae;
    double time_ms;
};
const std::vector<ReferenceRow>& reference_rows();
/// Published error standard deviations for x0, y0, z0.
std::array<double, 3> reference_center_stddev();

enum class ReportFormat { Text, Delimited, PlotData };

std::string format_text(const EvalReport& report);
std::string encode_delimited(const EvalReport& report);
EvalReport decode_delimited(const std::string& text);

/// Writes report.txt, report.tsv or hist_<method>_<param>.dat files under
/// `dir` (created if needed). Returns the files written.
std::vector<std::filesystem::path> emit_report(const EvalReport& report, ReportFormat format,
                                               const std::filesystem::path& dir);

}  // namespace sqr
