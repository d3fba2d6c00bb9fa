#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sqr/baseline_fit.hpp"
#include "sqr/dataset.hpp"
#include "sqr/digest.hpp"
#include "sqr/eval.hpp"
#include "sqr/range_image.hpp"
#include "sqr/renderer.hpp"
#include "sqr_cli/cli.hpp"

using namespace sqr;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run sqr_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("sqr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

std::string slurp(const std::string& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_F(CliTest, RenderMatchesLibraryAndWritesSnapshot) {
    const auto r = sqr_cli({"render", "--params", "40,40,40,1,1,128,128,128", "--size", "64", "-o", path("s.sqri"),
                            "--pgm", path("s.pgm")});
    ASSERT_EQ(r.code, 0) << r.err;
    const RangeImage img = read_range_image(path("s.sqri"));
    EXPECT_EQ(img, render_range_image(SuperquadricParams::sphere(40, {128, 128, 128}), RenderConfig::with_size(64)));
    EXPECT_EQ(encode_range_image(img), encode_range_image(read_range_image(path("s.sqri"))));
    EXPECT_TRUE(fs::exists(path("s.pgm")));
    EXPECT_NE(slurp(path("s.sqri.config.json")).find("\"subcommand\": \"render\""), std::string::npos);
}

TEST_F(CliTest, UserErrorsExitWithOne) {
    EXPECT_EQ(sqr_cli({"render", "--params", "40,40,40,0,1,128,128,128", "-o", path("x.sqri")}).code, 1);
    EXPECT_EQ(sqr_cli({"render", "--params", "40,40,40", "-o", path("x.sqri")}).code, 1);
    EXPECT_EQ(sqr_cli({}).code, 1);
    EXPECT_EQ(sqr_cli({"frobnicate"}).code, 1);
    const auto missing = sqr_cli({"train", "--data", path("no_such_dataset"), "-o", path("m")});
    EXPECT_EQ(missing.code, 1);
    EXPECT_NE(missing.err.find("not found"), std::string::npos);
    EXPECT_EQ(sqr_cli({"fit", path("nothing.sqri")}).code, 1);
    EXPECT_EQ(sqr_cli({"--help"}).code, 0);
}

TEST_F(CliTest, FitEmitsRecord) {
    ASSERT_EQ(sqr_cli({"render", "--params", "40,30,50,0.5,0.8,120,140,110", "-o", path("a.sqri")}).code, 0);
    const auto r = sqr_cli({"fit", path("a.sqri")});
    ASSERT_EQ(r.code, 0) << r.err;
    const FitResult fr = parse_fit_result(r.out);
    EXPECT_NEAR(fr.params.a1(), 40, 2);
    EXPECT_NEAR(fr.params.eps1(), 0.5, 0.05);
    ASSERT_EQ(sqr_cli({"fit", path("a.sqri"), "-o", path("a.fit")}).code, 0);
    EXPECT_EQ(parse_fit_result(slurp(path("a.fit"))).params, fr.params);
}

TEST_F(CliTest, PipelineIsReproducible) {
    const std::vector<std::string> gen{"--seed", "3", "gen-dataset", "--count", "48", "-o", path("ds")};
    ASSERT_EQ(sqr_cli(gen).code, 0);
    const std::string digest = manifest_digest(read_manifest(path("ds")));
    ASSERT_EQ(sqr_cli(gen).code, 0);
    EXPECT_EQ(manifest_digest(read_manifest(path("ds"))), digest);
    EXPECT_TRUE(fs::exists(path("ds/config.json")));

    for (const char* out : {"m1", "m2"}) {
        const auto t = sqr_cli({"--seed", "5", "train", "--data", path("ds"), "-o", path(out), "--epochs", "2",
                                "--batch", "8"});
        ASSERT_EQ(t.code, 0) << t.err;
        EXPECT_FALSE(fs::exists(path(std::string(out) + "/INCOMPLETE")));
    }
    EXPECT_EQ(sha256_file(path("m1/model.sqwt")), sha256_file(path("m2/model.sqwt")));
    EXPECT_TRUE(fs::exists(path("m1/train_log.tsv")));

    const auto e = sqr_cli({"eval", "--data", path("ds"), "--model", path("m1/model.sqwt"), "-o", path("rep")});
    ASSERT_EQ(e.code, 0) << e.err;
    const EvalReport rep = decode_delimited(slurp(path("rep/report.tsv")));
    ASSERT_EQ(rep.methods.size(), 2u);
    EXPECT_EQ(rep.methods[0].method, "cnn");
    EXPECT_EQ(rep.methods[0].errors.samples, 8u);
    for (auto name : kParamNames) EXPECT_NE(e.out.find(std::string(name)), std::string::npos);
    EXPECT_TRUE(fs::exists(path("rep/hist_iterative_z0.dat")));

    const auto b = sqr_cli({"bench", "--data", path("ds"), "--model", path("m1/model.sqwt"), "--limit", "3",
                            "-o", path("bench")});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_NE(slurp(path("bench/bench.json")).find("\"iterative\""), std::string::npos);
    EXPECT_EQ(sqr_cli({"bench", "--data", path("ds"), "--method", "learned"}).code, 1);
}
