#include <pathbench/random.hpp>
#include <pathbench/tiler.hpp>

#include <gtest/gtest.h>

using namespace pathbench;

namespace {

ScanImage uniform_scan(std::size_t w, std::size_t h, std::uint8_t value) {
    return {"scan", w, h, std::vector<std::uint8_t>(w * h, value), 0.5};
}

void fill_rect(ScanImage& scan, std::size_t x0, std::size_t y0, std::size_t x1, std::size_t y1, std::uint8_t v) {
    for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) {
            scan.pixels[y * scan.width + x] = v;
        }
    }
}

std::vector<std::uint8_t> random_pixels(Rng& rng, std::size_t n) {
    std::vector<std::uint8_t> p(n);
    for (auto& v : p) {
        v = static_cast<std::uint8_t>(uniform_below(rng, 256));
    }
    return p;
}

} // namespace

TEST(TileGrid, FloorArithmetic) {
    const auto cells = tile_grid(4000, 3000, 1000);
    ASSERT_EQ(cells.size(), 12u);
    EXPECT_EQ(cells.front(), (GridCell{0, 0, 0, 0}));
    EXPECT_EQ(cells.back(), (GridCell{2, 3, 3000, 2000}));
    // Row-major: the second cell is one column to the right.
    EXPECT_EQ(cells[1], (GridCell{0, 1, 1000, 0}));
}

TEST(TileGrid, TooSmallForOnePatch) { EXPECT_TRUE(tile_grid(999, 999, 1000).empty()); }

TEST(TileGrid, ExactlyOnePatch) {
    const auto cells = tile_grid(1000, 1000, 1000);
    ASSERT_EQ(cells.size(), 1u);
    EXPECT_EQ(cells[0], (GridCell{0, 0, 0, 0}));
}

TEST(TileGrid, CellsAreDisjointAndInside) {
    const auto cells = tile_grid(1037, 509, 100);
    EXPECT_EQ(cells.size(), 10u * 5u);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        EXPECT_EQ(cells[i].x % 100, 0u);
        EXPECT_EQ(cells[i].y % 100, 0u);
        EXPECT_LE(cells[i].x + 100, 1037u);
        EXPECT_LE(cells[i].y + 100, 509u);
        for (std::size_t j = i + 1; j < cells.size(); ++j) {
            const bool overlap_x = cells[i].x < cells[j].x + 100 && cells[j].x < cells[i].x + 100;
            const bool overlap_y = cells[i].y < cells[j].y + 100 && cells[j].y < cells[i].y + 100;
            EXPECT_FALSE(overlap_x && overlap_y);
        }
    }
}

TEST(Homogeneity, Counting) {
    EXPECT_DOUBLE_EQ(homogeneity(std::vector<std::uint8_t>(100, 255), 220), 1.0);
    EXPECT_DOUBLE_EQ(homogeneity(std::vector<std::uint8_t>(100, 0), 220), 0.0);
    std::vector<std::uint8_t> half(100, 0);
    std::fill(half.begin(), half.begin() + 50, 255);
    EXPECT_DOUBLE_EQ(homogeneity(half, 220), 0.5);
    // Threshold is inclusive.
    EXPECT_DOUBLE_EQ(homogeneity(std::vector<std::uint8_t>(4, 220), 220), 1.0);
    EXPECT_DOUBLE_EQ(homogeneity(std::vector<std::uint8_t>(4, 219), 220), 0.0);
}

TEST(Homogeneity, MonotoneInThreshold) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = random_pixels(rng, 256);
        double previous = 1.0;
        for (int t = 0; t <= 255; ++t) {
            const double h = homogeneity(p, t);
            EXPECT_LE(h, previous);
            previous = h;
        }
    }
}

TEST(SelectPatches, OneDarkBlock) {
    // 3000x2000 -> 2 rows x 3 cols. Cells other than (1,2) are all 255 and
    // have homogeneity 1.0 > 0.99; the dark cell has homogeneity 0.0.
    auto scan = uniform_scan(3000, 2000, 255);
    fill_rect(scan, 2000, 1000, 3000, 2000, 0);
    const auto kept = select_patches(scan, TilerConfig{});
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].grid_row, 1);
    EXPECT_EQ(kept[0].grid_col, 2);
    EXPECT_DOUBLE_EQ(kept[0].homogeneity, 0.0);
    EXPECT_EQ(kept[0].pixels.size(), 1000u * 1000u);
}

TEST(SelectPatches, StraddlingBlockKeepsBothHalves) {
    // Dark rectangle x in [500,1500), y in [0,1000): cells (0,0) and (0,1)
    // are each half dark, homogeneity 0.5.
    auto scan = uniform_scan(3000, 2000, 255);
    fill_rect(scan, 500, 0, 1500, 1000, 10);
    const auto kept = select_patches(scan, TilerConfig{});
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].grid_col, 0);
    EXPECT_EQ(kept[1].grid_col, 1);
    EXPECT_DOUBLE_EQ(kept[0].homogeneity, 0.5);
    EXPECT_DOUBLE_EQ(kept[1].homogeneity, 0.5);
}

TEST(SelectPatches, AllBackgroundKeepsNothing) {
    EXPECT_TRUE(select_patches(uniform_scan(3000, 2000, 255), TilerConfig{}).empty());
}

TEST(SelectPatches, MaxOfOneDisablesFiltering) {
    TilerConfig cfg;
    cfg.homogeneity_max = 1.0;
    EXPECT_EQ(select_patches(uniform_scan(3000, 2000, 255), cfg).size(), 6u);
}

TEST(SelectPatches, InvertedThresholdKeepsBackground) {
    auto scan = uniform_scan(3000, 2000, 255);
    fill_rect(scan, 2000, 1000, 3000, 2000, 0);
    TilerConfig cfg;
    cfg.invert_homogeneity = true;
    EXPECT_EQ(select_patches(scan, cfg).size(), 5u);
}

TEST(SelectPatches, SubsetOfGridInRowMajorOrder) {
    Rng rng(11);
    ScanImage scan{"s", 530, 410, random_pixels(rng, 530 * 410), 0.0};
    TilerConfig cfg;
    cfg.patch_size = 50;
    cfg.bg_threshold = 128;
    cfg.homogeneity_max = 0.5;
    const auto grid = tile_grid(scan.width, scan.height, cfg.patch_size);
    const auto kept = select_patches(scan, cfg);
    std::size_t cursor = 0;
    for (const auto& p : kept) {
        while (cursor < grid.size() && (grid[cursor].grid_row != p.grid_row || grid[cursor].grid_col != p.grid_col)) {
            ++cursor;
        }
        ASSERT_LT(cursor, grid.size()) << "kept patch not in grid order";
        EXPECT_LE(p.homogeneity, 0.5);
        EXPECT_DOUBLE_EQ(p.homogeneity, homogeneity(p.pixels, cfg.bg_threshold));
        ++cursor;
    }
}

TEST(SelectPatches, InvalidConfigRejected) {
    TilerConfig cfg;
    cfg.homogeneity_max = 1.5;
    EXPECT_THROW(select_patches(uniform_scan(10, 10, 0), cfg), Error);
    cfg = {};
    cfg.bg_threshold = 300;
    EXPECT_THROW(select_patches(uniform_scan(10, 10, 0), cfg), Error);
}

TEST(Whiten, Rule) {
    std::vector<std::uint8_t> p{230, 219, 220, 0, 255};
    whiten_background(std::span<std::uint8_t>(p), 220);
    EXPECT_EQ(p, (std::vector<std::uint8_t>{255, 219, 255, 0, 255}));
    std::vector<std::uint8_t> zeros(16, 0);
    whiten_background(std::span<std::uint8_t>(zeros), 220);
    EXPECT_EQ(zeros, std::vector<std::uint8_t>(16, 0));
}

TEST(Whiten, Idempotent) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        RawPatch p;
        p.side = 16;
        p.pixels = random_pixels(rng, 256);
        const int t = static_cast<int>(uniform_below(rng, 256));
        const auto once = whiten_background(p, t);
        const auto twice = whiten_background(once, t);
        EXPECT_EQ(once.pixels, twice.pixels);
    }
}

TEST(Prepare, ConstantPatches) {
    for (std::uint8_t v : {0, 128, 255}) {
        const std::vector<std::uint8_t> pixels(1000 * 1000, v);
        const auto out = prepare(pixels, 1000, 224);
        ASSERT_EQ(out.side, 224u);
        ASSERT_EQ(out.values.size(), 224u * 224u);
        for (float x : out.values) {
            ASSERT_FLOAT_EQ(x, static_cast<float>(v / 255.0));
        }
    }
}

TEST(Prepare, IntegerFactorIsBlockMean) {
    // 4x4 -> 2x2: each output is the mean of a 2x2 block.
    const std::vector<std::uint8_t> pixels{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140, 150};
    const auto out = prepare(pixels, 4, 2);
    EXPECT_FLOAT_EQ(out.values[0], static_cast<float>((0 + 10 + 40 + 50) / 4.0 / 255.0));
    EXPECT_FLOAT_EQ(out.values[1], static_cast<float>((20 + 30 + 60 + 70) / 4.0 / 255.0));
    EXPECT_FLOAT_EQ(out.values[2], static_cast<float>((80 + 90 + 120 + 130) / 4.0 / 255.0));
    EXPECT_FLOAT_EQ(out.values[3], static_cast<float>((100 + 110 + 140 + 150) / 4.0 / 255.0));
}

TEST(Prepare, FractionalFactorWeightsOverlap) {
    // 3 -> 2 per axis: output 0 covers source [0,1.5) = px0 + half px1.
    const std::vector<std::uint8_t> pixels{30, 60, 90, 30, 60, 90, 30, 60, 90};
    const auto out = prepare(pixels, 3, 2);
    EXPECT_FLOAT_EQ(out.values[0], static_cast<float>((30 * 1.0 + 60 * 0.5) / 1.5 / 255.0));
    EXPECT_FLOAT_EQ(out.values[1], static_cast<float>((60 * 0.5 + 90 * 1.0) / 1.5 / 255.0));
}

TEST(Prepare, ValuesInUnitIntervalAndDeterministic) {
    Rng rng(9);
    const auto pixels = random_pixels(rng, 333 * 333);
    const auto a = prepare(pixels, 333, 64);
    const auto b = prepare(pixels, 333, 64);
    EXPECT_EQ(a.values, b.values);
    for (float x : a.values) {
        EXPECT_GE(x, 0.0f);
        EXPECT_LE(x, 1.0f);
    }
}

TEST(Prepare, UpsamplingRejected) {
    try {
        prepare(std::vector<std::uint8_t>(100, 0), 10, 224);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(PatchName, Format) { EXPECT_EQ(patch_name("scan7", 3, 12), "scan7_r3_c12"); }
