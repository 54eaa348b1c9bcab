#include <pathbench/metrics.hpp>
#include <pathbench/random.hpp>

#include "support/oracles.hpp"

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

using namespace pathbench;

namespace {

PatchRecord test_record(std::string id, int cls) { return {std::move(id), cls, Split::Test, 0, 0, "x.png"}; }

/// Classes {0,1,2}: truth {0,0,1,2}, predictions {0,1,1,0}.
struct Fixture {
    DatasetManifest manifest;
    PredictionSet preds;
};

Fixture small_fixture() {
    std::vector<PatchRecord> records{test_record("a", 0), test_record("b", 0), test_record("c", 1),
                                     test_record("d", 2), {"t", 1, Split::Train, 0, 0, "t.png"}};
    return {DatasetManifest(records, {}, {}), {{"a", 0}, {"b", 1}, {"c", 1}, {"d", 0}}};
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no pathbench::Error raised";
    return ErrorKind::InvalidArgument;
}

} // namespace

TEST(Metrics, SmallFixture) {
    const auto f = small_fixture();
    const auto r = report(f.preds, f.manifest);
    EXPECT_EQ(r.n_tot, 4u);
    EXPECT_EQ(r.gamma_sizes, (std::vector<std::size_t>{2, 1, 1}));
    EXPECT_DOUBLE_EQ(r.eta_p, 0.5);
    // Recalls 1/2, 1, 0.
    EXPECT_DOUBLE_EQ(r.eta_w, 0.5);
    EXPECT_DOUBLE_EQ(r.eta_total, 0.25);
    EXPECT_FALSE(r.eta_w_literal.has_value());
    const auto lit = report(f.preds, f.manifest, true);
    EXPECT_DOUBLE_EQ(*lit.eta_w_literal, 2.0 / 3.0);
}

TEST(Metrics, ConfusionLayout) {
    const auto f = small_fixture();
    const auto cm = confusion(f.preds, f.manifest);
    const std::vector<std::vector<std::size_t>> expected{{1, 1, 0}, {0, 1, 0}, {1, 0, 0}};
    EXPECT_EQ(cm.counts, expected);
    EXPECT_EQ(cm.trace(), 2u);
}

TEST(Metrics, MissingPredictionListsIds) {
    auto f = small_fixture();
    f.preds.erase("b");
    f.preds.erase("d");
    try {
        report(f.preds, f.manifest);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::IncompletePredictions);
        const std::string what = e.what();
        EXPECT_NE(what.find("b"), std::string::npos);
        EXPECT_NE(what.find("d"), std::string::npos);
    }
}

TEST(Metrics, ExtraPredictionRejected) {
    auto f = small_fixture();
    f.preds["zz"] = 0;
    EXPECT_EQ(kind_of([&] { report(f.preds, f.manifest); }), ErrorKind::UnknownPatch);
    // Training patches are not in the evaluated split either.
    auto g = small_fixture();
    g.preds["t"] = 1;
    EXPECT_EQ(kind_of([&] { report(g.preds, g.manifest); }), ErrorKind::UnknownPatch);
}

TEST(Metrics, UnknownPredictedClassRejected) {
    auto f = small_fixture();
    f.preds["a"] = 42;
    EXPECT_EQ(kind_of([&] { report(f.preds, f.manifest); }), ErrorKind::InvalidData);
}

TEST(Metrics, ZeroClassSize) {
    // Class 5 is declared but has no test patches.
    const DatasetManifest m({test_record("a", 0), test_record("b", 1)}, {0, 1, 5}, {});
    const PredictionSet preds{{"a", 0}, {"b", 1}};
    EXPECT_EQ(kind_of([&] { report(preds, m); }), ErrorKind::ZeroClassSize);
}

TEST(Metrics, EmptyEvaluation) {
    const DatasetManifest m({{"t", 0, Split::Train, 0, 0, "t.png"}}, {}, {});
    EXPECT_EQ(kind_of([&] { report({}, m); }), ErrorKind::EmptyEvaluation);
}

TEST(Metrics, ProductOfReportedAccuracies) {
    EXPECT_NEAR(eta_total(0.6521, 0.6496), 0.4236, 0.0005);
    EXPECT_NEAR(eta_total(0.7487, 0.7610), 0.5698, 0.0005);
    EXPECT_THROW(eta_total(1.2, 0.5), Error);
    EXPECT_THROW(eta_total(0.5, -0.1), Error);
}

TEST(Metrics, MatchesRecountOnRandomCases) {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int n_classes = 2 + static_cast<int>(uniform_below(rng, 23));
        std::vector<PatchRecord> records;
        std::vector<int> truth;
        std::vector<int> predicted;
        PredictionSet preds;
        for (int c = 0; c < n_classes; ++c) {
            const std::size_t size = 1 + uniform_below(rng, 20);
            for (std::size_t i = 0; i < size; ++i) {
                const auto id = "c" + std::to_string(c) + "_" + std::to_string(i);
                // Biased toward the true class so recalls vary.
                const int p = uniform_below(rng, 2) ? c : static_cast<int>(uniform_below(rng, n_classes));
                records.push_back(test_record(id, c));
                truth.push_back(c);
                predicted.push_back(p);
                preds[id] = p;
            }
        }
        const auto r = report(preds, DatasetManifest(records, {}, {}));
        const auto oracle = pathbench::testing::recount(truth, predicted);
        EXPECT_NEAR(r.eta_p, oracle.eta_p, 1e-12);
        EXPECT_NEAR(r.eta_w, oracle.eta_w, 1e-12);
        EXPECT_NEAR(r.eta_total, oracle.eta_total, 1e-12);
        EXPECT_LE(r.eta_total, std::min(r.eta_p, r.eta_w) + 1e-15);
        EXPECT_GE(r.eta_total, 0.0);

        // Doubling every class leaves all three unchanged.
        std::vector<PatchRecord> doubled = records;
        PredictionSet doubled_preds = preds;
        for (const auto& rec : records) {
            auto copy = rec;
            copy.patch_id += "_dup";
            doubled.push_back(copy);
            doubled_preds[copy.patch_id] = preds.at(rec.patch_id);
        }
        const auto d = report(doubled_preds, DatasetManifest(doubled, {}, {}));
        EXPECT_NEAR(d.eta_p, r.eta_p, 1e-12);
        EXPECT_NEAR(d.eta_w, r.eta_w, 1e-12);
    }
}

TEST(Metrics, InvariantToClassRelabeling) {
    const auto f = small_fixture();
    const auto base = report(f.preds, f.manifest);
    // Bijection 0->7, 1->3, 2->5 applied to truth and predictions.
    const std::map<int, int> perm{{0, 7}, {1, 3}, {2, 5}};
    std::vector<PatchRecord> records;
    for (auto rec : f.manifest.records()) {
        rec.class_id = perm.at(rec.class_id);
        records.push_back(rec);
    }
    PredictionSet preds;
    for (const auto& [id, c] : f.preds) {
        preds[id] = perm.at(c);
    }
    const auto moved = report(preds, DatasetManifest(records, {}, {}));
    EXPECT_DOUBLE_EQ(moved.eta_p, base.eta_p);
    EXPECT_DOUBLE_EQ(moved.eta_w, base.eta_w);
    EXPECT_DOUBLE_EQ(moved.eta_total, base.eta_total);
}

TEST(Metrics, JsonIsStable) {
    const auto f = small_fixture();
    const auto json = to_json(report(f.preds, f.manifest));
    EXPECT_EQ(json, "{\n"
                    "  \"classes\": [0, 1, 2],\n"
                    "  \"confusion\": [\n"
                    "    [1, 1, 0],\n"
                    "    [0, 1, 0],\n"
                    "    [1, 0, 0]\n"
                    "  ],\n"
                    "  \"eta_p\": 0.500000,\n"
                    "  \"eta_total\": 0.250000,\n"
                    "  \"eta_w\": 0.500000,\n"
                    "  \"gamma_sizes\": [2, 1, 1],\n"
                    "  \"n_tot\": 4\n"
                    "}\n");
    const auto parsed = nlohmann::json::parse(json);
    EXPECT_EQ(parsed["n_tot"], 4);
}
