#include "sqr/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "byte_io.hpp"
#include "sqr/error.hpp"

namespace sqr {

namespace {

void check_aligned(std::size_t truths, std::size_t predictions) {
    if (truths != predictions) {
        throw InvalidArgument("truths and predictions differ in length: " + std::to_string(truths) + " vs " +
                              std::to_string(predictions));
    }
    if (truths == 0) throw InvalidArgument("no samples to evaluate");
}

template <class V>
ParamVector mean_abs(std::span<const V> t, std::span<const V> p) {
    check_aligned(t.size(), p.size());
    ParamVector sum{};
    for (std::size_t i = 0; i < t.size(); ++i) {
        for (std::size_t k = 0; k < kParamCount; ++k) sum[k] += std::abs(t[i].values()[k] - p[i].values()[k]);
    }
    for (double& s : sum) s /= static_cast<double>(t.size());
    return sum;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Display order of the comparison table: extents, center, shape.
constexpr std::array<std::size_t, kParamCount> kTableOrder{0, 1, 2, 5, 6, 7, 3, 4};

}  // namespace

ParamVector mae(std::span<const SuperquadricParams> truths, std::span<const SuperquadricParams> predictions) {
    return mean_abs(truths, predictions);
}

ParamVector mae_scaled(std::span<const ScaledParams> truths, std::span<const ScaledParams> predictions) {
    check_aligned(truths.size(), predictions.size());
    ParamVector sum{};
    for (std::size_t i = 0; i < truths.size(); ++i) {
        for (std::size_t k = 0; k < kParamCount; ++k) sum[k] += std::abs(truths[i].values[k] - predictions[i].values[k]);
    }
    for (double& s : sum) s /= static_cast<double>(truths.size());
    return sum;
}

std::uint64_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

ErrorDistribution error_distribution(std::span<const SuperquadricParams> truths,
                                     std::span<const SuperquadricParams> predictions, int bins) {
    check_aligned(truths.size(), predictions.size());
    std::vector<ParamVector> errors(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) {
        for (std::size_t k = 0; k < kParamCount; ++k) {
            errors[i][k] = predictions[i].values()[k] - truths[i].values()[k];
        }
    }
    return error_distribution_from_errors(errors, bins);
}

ErrorDistribution error_distribution_from_errors(std::span<const ParamVector> errors, int bins) {
    if (bins < 2) throw InvalidArgument("histogram needs at least 2 bins, got " + std::to_string(bins));
    if (errors.empty()) throw InvalidArgument("no samples to evaluate");
    ErrorDistribution d;
    d.samples = errors.size();
    const double n = static_cast<double>(errors.size());
    for (std::size_t k = 0; k < kParamCount; ++k) {
        double sum = 0.0;
        for (const auto& e : errors) sum += e[k];
        const double mean = sum / n;
        double sq = 0.0;
        for (const auto& e : errors) sq += (e[k] - mean) * (e[k] - mean);
        const double sd = std::sqrt(sq / n);
        d.mean[k] = mean;
        d.stddev[k] = sd;

        double half = kHistogramSigmaSpan * sd;
        if (!(half > 0.0)) half = std::max(std::abs(mean) * 1e-9, 1e-12);
        Histogram& h = d.histograms[k];
        h.lo = mean - half;
        h.hi = mean + half;
        h.counts.assign(static_cast<std::size_t>(bins), 0);
        for (const auto& e : errors) {
            const double pos = (e[k] - h.lo) / (h.hi - h.lo) * bins;
            const long idx = std::isfinite(pos) ? std::clamp(static_cast<long>(std::floor(pos)), 0L, long(bins) - 1)
                                                : (pos > 0 ? long(bins) - 1 : 0L);
            ++h.counts[static_cast<std::size_t>(idx)];
        }
    }
    return d;
}

EnvironmentInfo describe_environment(int threads) {
    EnvironmentInfo env;
    env.threads = threads;
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) env.cpu = line.substr(line.find_first_not_of(' ', colon + 1));
            break;
        }
    }
    if (env.cpu.empty()) env.cpu = "unknown";
    env.cpu += " (" + std::to_string(std::max(1u, std::thread::hardware_concurrency())) + " hw threads)";
    return env;
}

TimingStats benchmark(const EstimateFn& estimate, std::span<const RangeImage> images, int repetitions, int warmup,
                      std::vector<std::optional<SuperquadricParams>>* outputs) {
    if (images.empty()) throw InvalidArgument("benchmark needs at least one image");
    if (repetitions < 1) throw InvalidArgument("repetitions must be >= 1");
    if (warmup < 0) throw InvalidArgument("warmup must be >= 0");
    TimingStats st;
    st.repetitions = repetitions;
    st.warmup = warmup;
    for (int i = 0; i < warmup; ++i) {
        try {
            (void)estimate(images[static_cast<std::size_t>(i) % images.size()]);
        } catch (const std::exception&) {
            // failures are counted in the timed pass
        }
    }
    if (outputs) outputs->assign(images.size(), std::nullopt);
    std::vector<double> per_image;
    per_image.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        try {
            const auto t0 = std::chrono::steady_clock::now();
            std::optional<SuperquadricParams> last;
            for (int r = 0; r < repetitions; ++r) last = estimate(images[i]);
            const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            per_image.push_back(ms / repetitions);
            if (outputs) (*outputs)[i] = last;
        } catch (const std::exception&) {
            ++st.excluded;
        }
    }
    st.count = per_image.size();
    if (per_image.empty()) return st;
    const double n = static_cast<double>(per_image.size());
    st.mean_ms = std::accumulate(per_image.begin(), per_image.end(), 0.0) / n;
    double sq = 0.0;
    for (double t : per_image) sq += (t - st.mean_ms) * (t - st.mean_ms);
    st.stddev_ms = std::sqrt(sq / n);
    std::vector<double> sorted = per_image;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t mid = sorted.size() / 2;
    st.median_ms = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return st;
}

MethodReport make_method_report(std::string method, std::span<const SuperquadricParams> truths,
                                std::span<const SuperquadricParams> predictions, TimingStats timing, int bins) {
    MethodReport r;
    r.method = std::move(method);
    r.mae = mae(truths, predictions);
    r.errors = error_distribution(truths, predictions, bins);
    r.timing = timing;
    return r;
}

MethodReport to_scaled_units(const MethodReport& report) {
    MethodReport r = report;
    for (std::size_t k = 0; k < kParamCount; ++k) {
        const double w = param_ranges()[k].width();
        r.mae[k] /= w;
        r.errors.mean[k] /= w;
        r.errors.stddev[k] /= w;
        r.errors.histograms[k].lo /= w;
        r.errors.histograms[k].hi /= w;
    }
    return r;
}

const std::vector<ReferenceRow>& reference_rows() {
    static const std::vector<ReferenceRow> rows{
        {"CNN (full scale)", {1.014, 1.024, 0.965, 0.015, 0.018, 0.703, 0.859, 1.834}, 3.6},
        {"Solina-Bajcsy (full scale)", {7.958, 7.461, 12.315, 0.155, 0.279, 0.744, 0.745, 1.888}, 988.9},
    };
    return rows;
}

std::array<double, 3> reference_center_stddev() { return {0.85, 0.97, 1.92}; }

std::string format_text(const EvalReport& report) {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-28s", "method");
    os << buf;
    for (std::size_t k : kTableOrder) {
        std::snprintf(buf, sizeof buf, "%10s", std::string(kParamNames[k]).c_str());
        os << buf;
    }
    os << "   time[ms]\n";
    auto row = [&](const std::string& name, const ParamVector& v, double t) {
        std::snprintf(buf, sizeof buf, "%-28s", name.c_str());
        os << buf;
        for (std::size_t k : kTableOrder) {
            std::snprintf(buf, sizeof buf, "%10.3f", v[k]);
            os << buf;
        }
        std::snprintf(buf, sizeof buf, "%11.3f\n", t);
        os << buf;
    };
    for (const auto& m : report.methods) row(m.method, m.mae, m.timing.mean_ms);
    os << "-- reference --\n";
    for (const auto& r : reference_rows()) row(r.method, r.mae, r.time_ms);

    os << "\nMAE units: " << (report.scaled_units ? "scaled [0,1]" : "voxels / shape exponent") << "\n";
    for (const auto& m : report.methods) {
        os << "\n" << m.method << ": N = " << m.errors.samples << ", timing over " << m.timing.count << " images ("
           << m.timing.excluded << " excluded, " << m.timing.repetitions << " reps, " << m.timing.warmup
           << " warmup)\n";
        std::snprintf(buf, sizeof buf, "  time ms: mean %.3f  median %.3f  sd %.3f\n", m.timing.mean_ms,
                      m.timing.median_ms, m.timing.stddev_ms);
        os << buf;
        for (std::size_t k : kTableOrder) {
            std::snprintf(buf, sizeof buf, "  %-5s error mean %+10.4f  sd %10.4f\n",
                          std::string(kParamNames[k]).c_str(), m.errors.mean[k], m.errors.stddev[k]);
            os << buf;
        }
    }
    const auto ref_sd = reference_center_stddev();
    std::snprintf(buf, sizeof buf, "%.2f / %.2f / %.2f", ref_sd[0], ref_sd[1], ref_sd[2]);
    os << "\nreference full-scale CNN error sd x0 / y0 / z0: " << buf << "\n";
    os << "environment: " << report.environment.cpu << ", threads " << report.environment.threads << "\n";
    return os.str();
}

// Delimited layout, one tab-separated record per line:
//   format  sqr-report  1
//   env     <threads>  <cpu>
//   units   scaled|unscaled
//   methods <count>
// then for each method, in order:
//   method      <name>  <samples>
//   mae         a1 .. z0
//   err_mean    a1 .. z0
//   err_std     a1 .. z0
//   hist        <param>  <lo>  <hi>  <count_0> .. <count_{B-1}>   (8 lines)
//   time_ms     mean  median  sd  count  excluded  repetitions  warmup
std::string encode_delimited(const EvalReport& report) {
    for (const auto& m : report.methods) {
        if (m.method.find_first_of("\t\n") != std::string::npos) {
            throw InvalidArgument("method name must not contain tabs or newlines");
        }
    }
    std::string cpu = report.environment.cpu;
    std::replace_if(cpu.begin(), cpu.end(), [](char c) { return c == '\t' || c == '\n'; }, ' ');
    std::ostringstream os;
    os << "format\tsqr-report\t1\n";
    os << "env\t" << report.environment.threads << '\t' << cpu << '\n';
    os << "units\t" << (report.scaled_units ? "scaled" : "unscaled") << '\n';
    os << "methods\t" << report.methods.size() << '\n';
    auto vec = [&](const char* key, const ParamVector& v) {
        os << key;
        for (double x : v) os << '\t' << num(x);
        os << '\n';
    };
    for (const auto& m : report.methods) {
        os << "method\t" << m.method << '\t' << m.errors.samples << '\n';
        vec("mae", m.mae);
        vec("err_mean", m.errors.mean);
        vec("err_std", m.errors.stddev);
        for (std::size_t k = 0; k < kParamCount; ++k) {
            const Histogram& h = m.errors.histograms[k];
            os << "hist\t" << kParamNames[k] << '\t' << num(h.lo) << '\t' << num(h.hi);
            for (auto c : h.counts) os << '\t' << c;
            os << '\n';
        }
        const TimingStats& t = m.timing;
        os << "time_ms\t" << num(t.mean_ms) << '\t' << num(t.median_ms) << '\t' << num(t.stddev_ms) << '\t'
           << t.count << '\t' << t.excluded << '\t' << t.repetitions << '\t' << t.warmup << '\n';
    }
    return os.str();
}

namespace {

class LineParser {
public:
    explicit LineParser(const std::string& text) : in_(text) {}

    std::vector<std::string> next(std::string_view key) {
        std::string line;
        if (!std::getline(in_, line)) throw FormatError("report: missing '" + std::string(key) + "' record");
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.front() != key) {
            throw FormatError("report: expected '" + std::string(key) + "' record, got '" + fields.front() + "'");
        }
        fields.erase(fields.begin());
        return fields;
    }

    void expect_end() {
        std::string line;
        while (std::getline(in_, line)) {
            if (!line.empty()) throw FormatError("report: trailing content");
        }
    }

private:
    std::istringstream in_;
};

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw FormatError("report: bad number '" + s + "'");
    return v;
}

std::uint64_t parse_count(const std::string& s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (s.empty() || s[0] == '-' || end != s.c_str() + s.size()) {
        throw FormatError("report: bad count '" + s + "'");
    }
    return v;
}

void need(const std::vector<std::string>& f, std::size_t n, const char* key) {
    if (f.size() != n) throw FormatError(std::string("report: wrong field count in '") + key + "'");
}

ParamVector parse_vec(LineParser& p, const char* key) {
    auto f = p.next(key);
    need(f, kParamCount, key);
    ParamVector v{};
    for (std::size_t k = 0; k < kParamCount; ++k) v[k] = parse_double(f[k]);
    return v;
}

}  // namespace

EvalReport decode_delimited(const std::string& text) {
    LineParser p(text);
    auto f = p.next("format");
    need(f, 2, "format");
    if (f[0] != "sqr-report" || f[1] != "1") throw FormatError("report: unsupported format header");
    EvalReport r;
    f = p.next("env");
    need(f, 2, "env");
    r.environment.threads = static_cast<int>(parse_count(f[0]));
    r.environment.cpu = f[1];
    f = p.next("units");
    need(f, 1, "units");
    if (f[0] != "scaled" && f[0] != "unscaled") throw FormatError("report: bad units '" + f[0] + "'");
    r.scaled_units = f[0] == "scaled";
    f = p.next("methods");
    need(f, 1, "methods");
    const auto count = parse_count(f[0]);
    for (std::uint64_t i = 0; i < count; ++i) {
        MethodReport m;
        f = p.next("method");
        need(f, 2, "method");
        m.method = f[0];
        m.errors.samples = parse_count(f[1]);
        m.mae = parse_vec(p, "mae");
        m.errors.mean = parse_vec(p, "err_mean");
        m.errors.stddev = parse_vec(p, "err_std");
        for (std::size_t k = 0; k < kParamCount; ++k) {
            f = p.next("hist");
            if (f.size() < 5 || f[0] != kParamNames[k]) throw FormatError("report: bad histogram record");
            Histogram& h = m.errors.histograms[k];
            h.lo = parse_double(f[1]);
            h.hi = parse_double(f[2]);
            for (std::size_t j = 3; j < f.size(); ++j) h.counts.push_back(parse_count(f[j]));
        }
        f = p.next("time_ms");
        need(f, 7, "time_ms");
        m.timing.mean_ms = parse_double(f[0]);
        m.timing.median_ms = parse_double(f[1]);
        m.timing.stddev_ms = parse_double(f[2]);
        m.timing.count = parse_count(f[3]);
        m.timing.excluded = parse_count(f[4]);
        m.timing.repetitions = static_cast<int>(parse_count(f[5]));
        m.timing.warmup = static_cast<int>(parse_count(f[6]));
        r.methods.push_back(std::move(m));
    }
    p.expect_end();
    return r;
}

std::vector<std::filesystem::path> emit_report(const EvalReport& report, ReportFormat format,
                                               const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());
    auto write = [](const std::filesystem::path& path, const std::string& text) {
        detail::write_file_bytes(path.string(), std::vector<std::uint8_t>(text.begin(), text.end()));
        return path;
    };
    switch (format) {
        case ReportFormat::Text:
            return {write(dir / "report.txt", format_text(report))};
        case ReportFormat::Delimited:
            return {write(dir / "report.tsv", encode_delimited(report))};
        case ReportFormat::PlotData: {
            std::vector<std::filesystem::path> files;
            for (const auto& m : report.methods) {
                std::string safe = m.method;
                for (char& c : safe) {
                    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
                }
                for (std::size_t k = 0; k < kParamCount; ++k) {
                    const Histogram& h = m.errors.histograms[k];
                    std::ostringstream os;
                    for (std::size_t b = 0; b < h.counts.size(); ++b) {
                        os << num(h.bin_center(b)) << '\t' << h.counts[b] << '\n';
                    }
                    files.push_back(
                        write(dir / ("hist_" + safe + "_" + std::string(kParamNames[k]) + ".dat"), os.str()));
                }
            }
            return files;
        }
    }
    throw InvalidArgument("unknown report format");
}

}  // namespace sqr
