#include <cli.hpp>
#include <image_io.hpp>
#include <pathbench/pathbench.hpp>

#include "support/corpus.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace pathbench;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("pathbench_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        ::unsetenv("PATHBENCH_THREADS");
        ::unsetenv("PATHBENCH_CONFIG");
    }
    void TearDown() override {
        ::unsetenv("PATHBENCH_THREADS");
        ::unsetenv("PATHBENCH_CONFIG");
        fs::remove_all(dir_);
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

/// Three classes; test truth {0,0,1,2}.
const char* kManifest = "# classes: 0 1 2\n"
                        "a\t0\ttest\t0\t0\ta.png\n"
                        "b\t0\ttest\t0\t1\tb.png\n"
                        "c\t1\ttest\t0\t0\tc.png\n"
                        "d\t2\ttest\t0\t0\td.png\n";

} // namespace

TEST_F(CliTest, EvaluateWritesReport) {
    spit(path("m.tsv"), kManifest);
    spit(path("p.tsv"), "a\t0\nb\t1\nc\t1\nd\t0\n");
    const auto r = run({"evaluate", "--predictions", path("p.tsv"), "--manifest", path("m.tsv")});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("\"eta_total\": 0.250000"), std::string::npos) << r.out;

    const auto to_file = run({"evaluate", "--predictions", path("p.tsv"), "--manifest", path("m.tsv"), "--out",
                              path("report.json"), "--eta-w-literal"});
    EXPECT_EQ(to_file.code, 0);
    EXPECT_NE(slurp(path("report.json")).find("\"eta_w_literal\": 0.666667"), std::string::npos);
}

TEST_F(CliTest, EvaluateIncompleteExitsWithDataError) {
    spit(path("m.tsv"), kManifest);
    spit(path("p.tsv"), "a\t0\nb\t1\n");
    const auto r = run({"evaluate", "--predictions", path("p.tsv"), "--manifest", path("m.tsv")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("IncompletePredictions"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("c, d"), std::string::npos) << r.err;
}

TEST_F(CliTest, TrainOnOneClassIsDegenerate) {
    FeatureSet set("lbp", 2);
    set.add({"a", {1, 0}, 4});
    set.add({"b", {0, 1}, 4});
    write_features(set, path("f.pfv"));
    const auto r = run({"train", "--features", path("f.pfv"), "--out", path("model.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("DegenerateLabels"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("model.json")));
}

TEST_F(CliTest, TrainClassifyRoundTrip) {
    write_features(pathbench::testing::three_blobs(20, 1, "tr"), path("train.pfv"));
    write_features(pathbench::testing::three_blobs(5, 2, "te"), path("test.pfv"));
    ASSERT_EQ(run({"train", "--features", path("train.pfv"), "--out", path("model.json")}).code, 0);
    const auto model = load_model(path("model.json"));
    EXPECT_EQ(model.classes, (std::vector<int>{0, 1, 2}));

    ASSERT_EQ(run({"classify", "--features", path("test.pfv"), "--model", path("model.json"), "--out",
                   path("svm.tsv")})
                  .code,
              0);
    ASSERT_EQ(run({"classify", "--features", path("test.pfv"), "--index", path("train.pfv"), "--k", "3", "--out",
                   path("knn.tsv")})
                  .code,
              0);
    EXPECT_EQ(load_predictions(path("svm.tsv")).size(), 15u);
    EXPECT_EQ(load_predictions(path("knn.tsv")).size(), 15u);

    const auto neither = run({"classify", "--features", path("test.pfv"), "--out", path("x.tsv")});
    EXPECT_EQ(neither.code, 1);
}

TEST_F(CliTest, RetrieveToStdout) {
    FeatureSet index("line", 1);
    index.add({"v0", {0.0f}, 0});
    index.add({"v1", {1.0f}, 1});
    FeatureSet queries("line", 1);
    queries.add({"q", {0.25f}, kUnlabeled});
    write_features(index, path("i.pfv"));
    write_features(queries, path("q.pfv"));
    const auto r = run({"retrieve", "--index", path("i.pfv"), "--queries", path("q.pfv"), "--k", "2"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "q\t1\tv0\t0.25\t0\nq\t2\tv1\t0.75\t1\n");
}

TEST_F(CliTest, ExternalExtractorWithoutBackend) {
    spit(path("m.tsv"), "a\t0\ttrain\t0\t0\ta.png\n");
    const auto r = run({"extract", "--manifest", path("m.tsv"), "--extractor", "onnx:model.onnx", "--out",
                        path("f.pfv")});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("BackendUnavailable"), std::string::npos) << r.err;
}

TEST_F(CliTest, UsageErrors) {
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"evaluate", "--manifest", path("m.tsv")}).code, 1);
    EXPECT_EQ(run({"train", "--features", "f", "--out", "o", "--C", "-1"}).code, 1);
}

TEST_F(CliTest, Version) {
    const auto r = run({"version"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "pathbench 0.1.0\n");
}

TEST_F(CliTest, MissingPatchFileNamesPath) {
    spit(path("m.tsv"), "a\t0\ttrain\t0\t0\tnowhere/a.png\n");
    const auto r = run({"extract", "--manifest", path("m.tsv"), "--extractor", "lbp", "--out", path("f.pfv")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("MissingFile"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("nowhere/a.png"), std::string::npos) << r.err;
}

TEST_F(CliTest, TileWritesWhitenedPatches) {
    // 300x200 at patch size 100: only cell (1,2) is dark.
    std::vector<std::uint8_t> pixels(300 * 200, 250);
    for (std::size_t y = 100; y < 200; ++y) {
        for (std::size_t x = 200; x < 300; ++x) {
            pixels[y * 300 + x] = (x + y) % 2 ? 10 : 240;
        }
    }
    io::write_gray_png(path("scan.png"), 300, 200, pixels);
    const auto r = run({"tile", "--input", path("scan.png"), "--class", "3", "--out-dir", path("tiles"),
                        "--manifest-out", path("tiles.tsv"), "--patch-size", "100", "--homogeneity-max", "0.6"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = load_manifest(path("tiles.tsv"));
    ASSERT_EQ(manifest.size(), 1u);
    const auto& rec = manifest.records()[0];
    EXPECT_EQ(rec.patch_id, "scan_r1_c2");
    EXPECT_EQ(rec.class_id, 3);
    EXPECT_EQ(rec.path, "tiles/scan_r1_c2.png");
    const auto patch = io::read_gray(manifest.resolve(rec));
    EXPECT_EQ(patch.width, 100u);
    for (std::uint8_t v : patch.pixels) {
        EXPECT_TRUE(v == 10 || v == 255);
    }
}

TEST_F(CliTest, SampleRebasesPaths) {
    const auto manifest = pathbench::testing::write_texture_corpus(
        dir_ / "corpus", {.classes = 2, .train_per_class = 5, .test_per_class = 1, .side = 8, .seed = 1});
    const auto r = run({"sample", "--manifest", manifest.string(), "--n", "3", "--out", path("sampled.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto sampled = load_manifest(path("sampled.tsv"));
    EXPECT_EQ(sampled.split_records(Split::Train).size(), 6u);
    EXPECT_EQ(sampled.split_records(Split::Test).size(), 2u);
    for (const auto& rec : sampled.records()) {
        EXPECT_TRUE(fs::exists(sampled.resolve(rec))) << rec.path;
    }
}

TEST_F(CliTest, ConfigEnvironmentAndFlagPrecedence) {
    const auto manifest = pathbench::testing::write_texture_corpus(
        dir_ / "corpus", {.classes = 2, .train_per_class = 4, .test_per_class = 1, .side = 8, .seed = 1});
    // `n` from config, overridden by the flag; `threads` from config, overridden by env.
    spit(path("cfg.txt"), "# settings\nn = 2\nthreads = 0\n");
    auto r = run({"sample", "--config", path("cfg.txt"), "--manifest", manifest.string(), "--out", path("s.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_manifest(path("s.tsv")).split_records(Split::Train).size(), 4u);

    r = run({"sample", "--config", path("cfg.txt"), "--manifest", manifest.string(), "--out", path("s.tsv"), "--n",
             "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_manifest(path("s.tsv")).split_records(Split::Train).size(), 6u);

    // threads = 0 from the config file is rejected by validation...
    r = run({"extract", "--config", path("cfg.txt"), "--manifest", manifest.string(), "--extractor", "lbp",
             "--resize-to", "8", "--out", path("f.pfv")});
    EXPECT_EQ(r.code, 1) << r.err;
    // ...unless the environment supplies a value.
    ::setenv("PATHBENCH_THREADS", "2", 1);
    r = run({"extract", "--config", path("cfg.txt"), "--manifest", manifest.string(), "--extractor", "lbp",
             "--resize-to", "8", "--out", path("f.pfv")});
    EXPECT_EQ(r.code, 0) << r.err;
    // ...and a flag beats both.
    ::setenv("PATHBENCH_THREADS", "0", 1);
    r = run({"extract", "--config", path("cfg.txt"), "--manifest", manifest.string(), "--extractor", "lbp",
             "--resize-to", "8", "--out", path("f.pfv"), "--threads", "1"});
    EXPECT_EQ(r.code, 0) << r.err;

    ::setenv("PATHBENCH_CONFIG", path("cfg.txt").c_str(), 1);
    r = run({"sample", "--manifest", manifest.string(), "--out", path("s.tsv")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(load_manifest(path("s.tsv")).split_records(Split::Train).size(), 4u);
}

TEST_F(CliTest, UnknownConfigKeyRejected) {
    spit(path("bad.txt"), "colour = blue\n");
    const auto r = run({"version", "--config", path("bad.txt")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("colour"), std::string::npos) << r.err;
}

TEST_F(CliTest, BenchRunsEndToEnd) {
    const auto manifest = pathbench::testing::write_texture_corpus(
        dir_ / "corpus", {.classes = 3, .train_per_class = 6, .test_per_class = 2, .side = 16, .seed = 3});
    const auto r = run({"bench", "--manifest", manifest.string(), "--work-dir", path("work"), "--n", "6",
                        "--resize-to", "16"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* name : {"sampled.tsv", "train.pfv", "test.pfv", "model.json", "predictions.tsv", "report.json"}) {
        EXPECT_TRUE(fs::exists(dir_ / "work" / name)) << name;
    }
    const auto knn = run({"bench", "--manifest", manifest.string(), "--work-dir", path("knn"), "--n", "6",
                          "--resize-to", "16", "--method", "knn", "--k", "3"});
    ASSERT_EQ(knn.code, 0) << knn.err;
    EXPECT_FALSE(fs::exists(dir_ / "knn" / "model.json"));
}
