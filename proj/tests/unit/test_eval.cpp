#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "sqr/dataset.hpp"
#include "sqr/error.hpp"
#include "sqr/eval.hpp"
#include "sqr/rng.hpp"

using namespace sqr;
namespace fs = std::filesystem;

namespace {

std::vector<SuperquadricParams> draw(std::size_t n, std::uint64_t seed) {
    Philox4x32 rng(seed);
    std::vector<SuperquadricParams> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(sample_params(rng, SamplingRanges{}));
    return v;
}

SuperquadricParams shifted(const SuperquadricParams& p, std::size_t k, double d) {
    ParamVector v = p.values();
    v[k] += d;
    return SuperquadricParams(v);
}

EvalReport sample_report() {
    const auto truth = draw(200, 1);
    std::vector<SuperquadricParams> pred;
    Philox4x32 rng(2);
    for (const auto& t : truth) {
        ParamVector v = t.values();
        for (std::size_t k = 0; k < kParamCount; ++k) v[k] += (k < 3 || k > 4 ? 1.0 : 0.01) * rng.normal();
        for (std::size_t k = 0; k < kParamCount; ++k) v[k] = std::max(v[k], 0.02);
        pred.emplace_back(v);
    }
    TimingStats t;
    t.mean_ms = 1.25;
    t.median_ms = 1.0 / 3.0;
    t.stddev_ms = 0.1;
    t.count = 200;
    t.excluded = 1;
    t.repetitions = 2;
    t.warmup = 1;
    EvalReport r;
    r.environment = {"Test CPU\twith tab", 1};
    r.methods.push_back(make_method_report("cnn", truth, pred, t));
    r.methods.push_back(make_method_report("iterative", truth, truth, t, 16));
    return r;
}

}  // namespace

TEST(Mae, ZeroAndHandValue) {
    const auto t = draw(10, 3);
    for (double v : mae(t, t)) EXPECT_EQ(v, 0.0);
    const std::vector<SuperquadricParams> truth{t[0], t[1]};
    const std::vector<SuperquadricParams> pred{shifted(t[0], 0, 1.0), shifted(t[1], 0, -3.0)};
    const auto m = mae(truth, pred);
    EXPECT_DOUBLE_EQ(m[0], 2.0);
    for (std::size_t k = 1; k < kParamCount; ++k) EXPECT_EQ(m[k], 0.0);
}

TEST(Mae, ErrorsAndInvariances) {
    const auto t = draw(50, 4), p = draw(50, 5);
    EXPECT_THROW(mae(t, std::span(p).first(49)), InvalidArgument);
    EXPECT_THROW(mae({}, {}), InvalidArgument);
    auto tp = t, pp = p;
    std::reverse(tp.begin(), tp.end());
    std::reverse(pp.begin(), pp.end());
    const auto a = mae(t, p), b = mae(tp, pp);
    for (std::size_t k = 0; k < kParamCount; ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
    std::vector<ScaledParams> ts, ps;
    for (std::size_t i = 0; i < t.size(); ++i) {
        ts.push_back(scale_params(t[i]));
        ps.push_back(scale_params(p[i]));
    }
    const auto s = mae_scaled(ts, ps);
    for (std::size_t k = 0; k < kParamCount; ++k) EXPECT_NEAR(s[k] * param_ranges()[k].width(), a[k], 1e-9);
}

TEST(Distribution, SymmetricErrors) {
    std::vector<ParamVector> e;
    for (int i = 0; i < 10; ++i) {
        ParamVector v{};
        v.fill(i % 2 ? 0.7 : -0.7);
        e.push_back(v);
    }
    const auto d = error_distribution_from_errors(e);
    for (std::size_t k = 0; k < kParamCount; ++k) {
        EXPECT_NEAR(d.mean[k], 0.0, 1e-15);
        EXPECT_NEAR(d.stddev[k], 0.7, 1e-15);
        EXPECT_EQ(d.histograms[k].total(), 10u);
    }
}

TEST(Distribution, AllZeroErrorsOccupyOneBinAtZero) {
    const auto t = draw(20, 6);
    const auto d = error_distribution(t, t);
    for (const auto& h : d.histograms) {
        int occupied = 0;
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            if (h.counts[b] == 0) continue;
            ++occupied;
            EXPECT_EQ(h.counts[b], 20u);
            EXPECT_LE(h.lo + b * h.bin_width(), 0.0);
            EXPECT_GE(h.lo + (b + 1) * h.bin_width(), 0.0);
        }
        EXPECT_EQ(occupied, 1);
    }
}

TEST(Distribution, GaussianMomentsRecovered) {
    Philox4x32 rng(7);
    // Offsets are at least as large as the spread, so the standard error of
    // the sample mean (sd / sqrt(n)) sits far inside the 3% band.
    const ParamVector mu{1, -2, 0.5, 0.015, -0.02, 0.85, -0.97, 1.92};
    const ParamVector sd{1.0, 2.0, 0.5, 0.015, 0.02, 0.85, 0.97, 1.92};
    std::vector<ParamVector> e(50000);
    for (auto& v : e)
        for (std::size_t k = 0; k < kParamCount; ++k) v[k] = mu[k] + sd[k] * rng.normal();
    const auto d = error_distribution_from_errors(e);
    for (std::size_t k = 0; k < kParamCount; ++k) {
        EXPECT_NEAR(d.mean[k], mu[k], 0.03 * std::abs(mu[k]));
        EXPECT_NEAR(d.stddev[k], sd[k], 0.03 * sd[k]);
        EXPECT_EQ(d.histograms[k].total(), e.size());
        EXPECT_EQ(d.histograms[k].counts.size(), 64u);
        EXPECT_NEAR(d.histograms[k].lo, d.mean[k] - 4 * d.stddev[k], 1e-12);
    }
    EXPECT_THROW(error_distribution_from_errors(e, 1), InvalidArgument);
}

TEST(Benchmark, ContractAndExclusions) {
    const RangeImage good(4, 4), bad(2, 2);
    const std::vector<RangeImage> imgs{good, bad, good};
    int calls = 0;
    const EstimateFn fn = [&](const RangeImage& img) {
        ++calls;
        if (img.width() == 2) throw EvaluationError("cannot");
        return SuperquadricParams::sphere(1, {0, 0, 0});
    };
    std::vector<std::optional<SuperquadricParams>> out;
    const auto t1 = benchmark(fn, imgs, 1, 1, &out);
    EXPECT_EQ(t1.count, 2u);
    EXPECT_EQ(t1.excluded, 1u);
    EXPECT_EQ(calls, 1 + 3);
    EXPECT_TRUE(out[0] && !out[1] && out[2]);
    EXPECT_GE(t1.mean_ms, 0.0);
    EXPECT_GE(t1.median_ms, 0.0);
    const auto t5 = benchmark(fn, imgs, 5, 0);
    EXPECT_EQ(t5.repetitions, 5);
    EXPECT_EQ(t5.count, 2u);
    EXPECT_THROW(benchmark(fn, {}, 1, 0), InvalidArgument);
}

TEST(Report, DelimitedRoundTrip) {
    const EvalReport r = sample_report();
    const EvalReport back = decode_delimited(encode_delimited(r));
    EvalReport expected = r;
    expected.environment.cpu = "Test CPU with tab";
    EXPECT_EQ(back, expected);
    EXPECT_EQ(encode_delimited(back), encode_delimited(r));
    std::string text = encode_delimited(r);
    text[0] = 'F';
    EXPECT_THROW(decode_delimited(text), FormatError);
    EXPECT_THROW(decode_delimited(encode_delimited(r) + "junk\n"), FormatError);
}

TEST(Report, TextTableAndPlotFiles) {
    const EvalReport r = sample_report();
    const std::string text = format_text(r);
    for (auto name : kParamNames) EXPECT_NE(text.find(std::string(name)), std::string::npos);
    EXPECT_NE(text.find("time[ms]"), std::string::npos);
    EXPECT_NE(text.find("988.900"), std::string::npos);

    const fs::path dir = fs::temp_directory_path() / "sqr_test_report";
    fs::remove_all(dir);
    const auto files = emit_report(r, ReportFormat::PlotData, dir);
    EXPECT_EQ(files.size(), 16u);
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string line;
        std::size_t rows = 0;
        while (std::getline(in, line)) ++rows;
        EXPECT_EQ(rows, f.filename().string().find("iterative") != std::string::npos ? 16u : 64u) << f;
    }
    const auto tsv = emit_report(r, ReportFormat::Delimited, dir);
    std::ifstream in(tsv.front());
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(decode_delimited(content), decode_delimited(encode_delimited(r)));
    EXPECT_EQ(emit_report(r, ReportFormat::Text, dir).front().filename(), "report.txt");
    fs::remove_all(dir);
}

TEST(Report, ReferenceContext) {
    const auto& rows = reference_rows();
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_DOUBLE_EQ(rows[0].mae[0], 1.014);
    EXPECT_DOUBLE_EQ(rows[0].mae[3], 0.015);
    EXPECT_DOUBLE_EQ(rows[0].mae[7], 1.834);
    EXPECT_DOUBLE_EQ(rows[0].time_ms, 3.6);
    EXPECT_DOUBLE_EQ(rows[1].time_ms, 988.9);
    EXPECT_DOUBLE_EQ(reference_center_stddev()[2], 1.92);
}

TEST(Report, ScaledUnitsDivideByRangeWidth) {
    const EvalReport r = sample_report();
    const MethodReport s = to_scaled_units(r.methods[0]);
    for (std::size_t k = 0; k < kParamCount; ++k) {
        EXPECT_NEAR(s.mae[k] * param_ranges()[k].width(), r.methods[0].mae[k], 1e-12);
        EXPECT_EQ(s.errors.histograms[k].counts, r.methods[0].errors.histograms[k].counts);
    }
}
