#pragma once

#include "error.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

/**
 * @file tiler.hpp
 *
 * @brief Cuts a grayscale scan into non-overlapping square patches, drops
 * background-dominated ones, and prepares kept patches for feature
 * extraction (downsampling plus scaling into [0,1]).
 *
 * Homogeneity is the fraction of pixels at or above the background
 * brightness threshold. By default a patch is kept iff its homogeneity is
 * at most `homogeneity_max`; `invert_homogeneity` flips the test so that
 * only patches with homogeneity >= `homogeneity_max` survive.
 */

namespace pathbench {

struct ScanImage {
    std::string scan_id;
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; ///< row-major
    double resolution_um = 0.0;       ///< 0 when unknown

    void validate() const {
        if (width == 0 || height == 0) {
            throw Error(ErrorKind::InvalidArgument, "scan '" + scan_id + "' has zero extent");
        }
        if (pixels.size() != width * height) {
            throw Error(ErrorKind::ShapeError, "scan '" + scan_id + "' pixel count does not match width*height");
        }
    }
};

struct RawPatch {
    std::string scan_id;
    int grid_row = 0;
    int grid_col = 0;
    std::size_t side = 0;
    std::vector<std::uint8_t> pixels; ///< side*side, row-major
    double homogeneity = 0.0;
};

struct PreparedPatch {
    std::string patch_id;
    std::size_t side = 0;
    std::vector<float> values; ///< side*side, each in [0,1]
};

struct TilerConfig {
    std::size_t patch_size = 1000;
    int bg_threshold = 220;
    double homogeneity_max = 0.99;
    std::size_t resize_to = 224;
    bool invert_homogeneity = false;

    void validate() const {
        if (patch_size < 1) {
            throw Error(ErrorKind::InvalidArgument, "patch_size must be >= 1");
        }
        if (bg_threshold < 0 || bg_threshold > 255) {
            throw Error(ErrorKind::InvalidArgument, "bg_threshold must be in [0,255]");
        }
        if (!(homogeneity_max >= 0.0 && homogeneity_max <= 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "homogeneity_max must be in [0,1]");
        }
        if (resize_to < 1) {
            throw Error(ErrorKind::InvalidArgument, "resize_to must be >= 1");
        }
    }
};

struct GridCell {
    int grid_row = 0;
    int grid_col = 0;
    std::size_t x = 0;
    std::size_t y = 0;

    friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Full-patch grid offsets in row-major order; edge remainders are dropped.
inline std::vector<GridCell> tile_grid(std::size_t width, std::size_t height, std::size_t patch_size) {
    if (patch_size == 0) {
        throw Error(ErrorKind::InvalidArgument, "patch_size must be >= 1");
    }
    const std::size_t rows = height / patch_size;
    const std::size_t cols = width / patch_size;
    std::vector<GridCell> cells;
    cells.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            cells.push_back({static_cast<int>(r), static_cast<int>(c), c * patch_size, r * patch_size});
        }
    }
    return cells;
}

inline double homogeneity(std::span<const std::uint8_t> pixels, int bg_threshold) {
    if (pixels.empty()) {
        throw Error(ErrorKind::InvalidArgument, "homogeneity of an empty patch");
    }
    const auto background = std::count_if(pixels.begin(), pixels.end(),
                                           [bg_threshold](std::uint8_t v) { return int{v} >= bg_threshold; });
    return static_cast<double>(background) / static_cast<double>(pixels.size());
}

inline bool keep_patch(double homogeneity_value, const TilerConfig& config) {
    return config.invert_homogeneity ? homogeneity_value >= config.homogeneity_max
                                     : homogeneity_value <= config.homogeneity_max;
}

/// Copies one grid cell out of the scan.
inline RawPatch cut_patch(const ScanImage& scan, const GridCell& cell, std::size_t patch_size) {
    RawPatch patch;
    patch.scan_id = scan.scan_id;
    patch.grid_row = cell.grid_row;
    patch.grid_col = cell.grid_col;
    patch.side = patch_size;
    patch.pixels.resize(patch_size * patch_size);
    for (std::size_t row = 0; row < patch_size; ++row) {
        const auto* src = scan.pixels.data() + (cell.y + row) * scan.width + cell.x;
        std::copy_n(src, patch_size, patch.pixels.data() + row * patch_size);
    }
    return patch;
}

/// Kept patches in row-major grid order, each carrying its homogeneity.
inline std::vector<RawPatch> select_patches(const ScanImage& scan, const TilerConfig& config) {
    scan.validate();
    config.validate();
    std::vector<RawPatch> kept;
    for (const auto& cell : tile_grid(scan.width, scan.height, config.patch_size)) {
        RawPatch patch = cut_patch(scan, cell, config.patch_size);
        patch.homogeneity = homogeneity(patch.pixels, config.bg_threshold);
        if (keep_patch(patch.homogeneity, config)) {
            kept.push_back(std::move(patch));
        }
    }
    return kept;
}

/// Background pixels (>= bg_threshold) become 255.
inline void whiten_background(std::span<std::uint8_t> pixels, int bg_threshold) {
    for (auto& v : pixels) {
        if (int{v} >= bg_threshold) {
            v = 255;
        }
    }
}

inline RawPatch whiten_background(RawPatch patch, int bg_threshold) {
    whiten_background(std::span<std::uint8_t>(patch.pixels), bg_threshold);
    return patch;
}

namespace detail {

struct BoxTap {
    std::size_t index;
    double weight;
};

/// For each output sample, the source samples it overlaps and the overlap
/// lengths (in source units). Weights of one output sum to in/out.
inline std::vector<std::vector<BoxTap>> box_taps(std::size_t in, std::size_t out) {
    std::vector<std::vector<BoxTap>> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double lo = static_cast<double>(o) * scale;
        const double hi = static_cast<double>(o + 1) * scale;
        const auto first = static_cast<std::size_t>(lo);
        const auto last = std::min(in, static_cast<std::size_t>(hi) + 1);
        for (std::size_t i = first; i < last; ++i) {
            const double overlap = std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
            if (overlap > 0.0) {
                taps[o].push_back({i, overlap});
            }
        }
    }
    return taps;
}

} // namespace detail

/**
 * @brief Area-average downsampling to `resize_to` x `resize_to`, divided by 255.
 *
 * Each output pixel is the mean of the source area it covers, with partial
 * source pixels weighted by their overlap. Upsampling is rejected.
 */
inline PreparedPatch prepare(std::span<const std::uint8_t> pixels, std::size_t side, std::size_t resize_to,
                             std::string patch_id = {}) {
    if (resize_to < 1) {
        throw Error(ErrorKind::InvalidArgument, "resize_to must be >= 1");
    }
    if (pixels.size() != side * side || side == 0) {
        throw Error(ErrorKind::ShapeError, "patch pixel count does not match side*side");
    }
    if (side < resize_to) {
        throw Error(ErrorKind::InvalidArgument, "patch side " + std::to_string(side) + " is smaller than resize_to " +
                                                    std::to_string(resize_to) + "; upsampling is not supported");
    }

    const auto taps = detail::box_taps(side, resize_to);
    const double area = static_cast<double>(side) / static_cast<double>(resize_to);

    // Horizontal pass into a side x resize_to buffer, then vertical.
    std::vector<double> rows(side * resize_to);
    for (std::size_t y = 0; y < side; ++y) {
        const auto* src = pixels.data() + y * side;
        for (std::size_t ox = 0; ox < resize_to; ++ox) {
            double acc = 0.0;
            for (const auto& t : taps[ox]) {
                acc += t.weight * src[t.index];
            }
            rows[y * resize_to + ox] = acc / area;
        }
    }

    PreparedPatch out;
    out.patch_id = std::move(patch_id);
    out.side = resize_to;
    out.values.resize(resize_to * resize_to);
    for (std::size_t oy = 0; oy < resize_to; ++oy) {
        for (std::size_t ox = 0; ox < resize_to; ++ox) {
            double acc = 0.0;
            for (const auto& t : taps[oy]) {
                acc += t.weight * rows[t.index * resize_to + ox];
            }
            const double v = acc / area / 255.0;
            out.values[oy * resize_to + ox] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return out;
}

inline PreparedPatch prepare(const RawPatch& patch, std::size_t resize_to, std::string patch_id = {}) {
    return prepare(patch.pixels, patch.side, resize_to, std::move(patch_id));
}

/// File stem used for persisted patches: `<scan_id>_r<row>_c<col>`.
inline std::string patch_name(const std::string& scan_id, int grid_row, int grid_col) {
    return scan_id + "_r" + std::to_string(grid_row) + "_c" + std::to_string(grid_col);
}

} // namespace pathbench
