#pragma once

#include "error.hpp"
#include "tiler.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

/**
 * @file features.hpp
 *
 * @brief Feature vectors, feature sets, the handcrafted extractors and the
 * PFV1 binary interchange format.
 *
 * PFV1 layout (all integers little-endian):
 *
 *     "PFV1" | u32 count | u32 dim | u16 id_len | extractor id (UTF-8)
 *     count x ( u16 pid_len | patch id (UTF-8) | i32 label | dim x f32 )
 *
 * A label of -1 marks an unlabeled vector.
 */

namespace pathbench {

inline constexpr std::int32_t kUnlabeled = -1;

struct FeatureVector {
    std::string patch_id;
    std::vector<float> values;
    std::int32_t label = kUnlabeled;

    bool labeled() const { return label >= 0; }
};

/// Bitwise comparison, so NaN payloads and signed zeros are distinguished.
inline bool bit_equal(const FeatureVector& a, const FeatureVector& b) {
    return a.patch_id == b.patch_id && a.label == b.label && a.values.size() == b.values.size() &&
           (a.values.empty() || std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0);
}

/**
 * @brief Ordered collection of equal-length vectors from one extractor.
 *
 * `add()` enforces the invariants: length equals `dim()`, all values finite,
 * patch ids unique.
 */
class FeatureSet {
public:
    FeatureSet() = default;

    FeatureSet(std::string extractor_id, std::size_t dim) : extractor_id_(std::move(extractor_id)), dim_(dim) {
        if (dim_ == 0) {
            throw Error(ErrorKind::ShapeError, "feature dimension must be >= 1");
        }
    }

    const std::string& extractor_id() const { return extractor_id_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return vectors_.size(); }
    bool empty() const { return vectors_.empty(); }
    const std::vector<FeatureVector>& vectors() const { return vectors_; }
    const FeatureVector& operator[](std::size_t i) const { return vectors_[i]; }

    void reserve(std::size_t n) { vectors_.reserve(n); }

    void add(FeatureVector v) {
        if (v.values.size() != dim_) {
            throw Error(ErrorKind::ShapeError, "vector '" + v.patch_id + "' has length " +
                                                   std::to_string(v.values.size()) + ", expected " +
                                                   std::to_string(dim_));
        }
        for (float x : v.values) {
            if (!std::isfinite(x)) {
                throw Error(ErrorKind::InvalidData, "vector '" + v.patch_id + "' has a non-finite value");
            }
        }
        if (v.label < kUnlabeled) {
            throw Error(ErrorKind::InvalidData, "vector '" + v.patch_id + "' has an invalid label");
        }
        if (!ids_.insert(v.patch_id).second) {
            throw Error(ErrorKind::DuplicateId, "patch id '" + v.patch_id + "' appears more than once");
        }
        vectors_.push_back(std::move(v));
    }

    bool all_labeled() const {
        return std::all_of(vectors_.begin(), vectors_.end(), [](const FeatureVector& v) { return v.labeled(); });
    }

    friend bool bit_equal(const FeatureSet& a, const FeatureSet& b) {
        if (a.extractor_id_ != b.extractor_id_ || a.dim_ != b.dim_ || a.size() != b.size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!bit_equal(a.vectors_[i], b.vectors_[i])) {
                return false;
            }
        }
        return true;
    }

private:
    std::string extractor_id_;
    std::size_t dim_ = 0;
    std::vector<FeatureVector> vectors_;
    std::unordered_set<std::string> ids_;
};

inline constexpr std::size_t kHistogramBins = 256;

/// Normalized histogram of round(v*255) over all pixels.
inline std::vector<float> extract_histogram(const PreparedPatch& patch) {
    if (patch.values.empty()) {
        throw Error(ErrorKind::InvalidArgument, "empty patch");
    }
    std::array<std::size_t, kHistogramBins> counts{};
    for (float v : patch.values) {
        const long bin = std::lround(static_cast<double>(v) * 255.0);
        ++counts[static_cast<std::size_t>(std::clamp(bin, 0L, 255L))];
    }
    std::vector<float> out(kHistogramBins);
    const auto total = static_cast<double>(patch.values.size());
    for (std::size_t i = 0; i < kHistogramBins; ++i) {
        out[i] = static_cast<float>(static_cast<double>(counts[i]) / total);
    }
    return out;
}

/// Neighbor offsets (row, col) clockwise from top-left; offset k sets bit k.
inline constexpr std::array<std::array<int, 2>, 8> kLbpNeighbors{{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1},
}};

inline std::uint8_t lbp_code(const PreparedPatch& patch, std::size_t row, std::size_t col) {
    const float center = patch.values[row * patch.side + col];
    std::uint8_t code = 0;
    for (std::size_t k = 0; k < kLbpNeighbors.size(); ++k) {
        const auto r = static_cast<std::size_t>(static_cast<long>(row) + kLbpNeighbors[k][0]);
        const auto c = static_cast<std::size_t>(static_cast<long>(col) + kLbpNeighbors[k][1]);
        if (patch.values[r * patch.side + c] >= center) {
            code = static_cast<std::uint8_t>(code | (1u << k));
        }
    }
    return code;
}

/// 8-neighbour local binary pattern histogram over interior pixels.
inline std::vector<float> extract_lbp(const PreparedPatch& patch) {
    if (patch.side < 3 || patch.values.size() != patch.side * patch.side) {
        throw Error(ErrorKind::InvalidArgument, "LBP needs a square patch with side >= 3");
    }
    std::array<std::size_t, 256> counts{};
    for (std::size_t r = 1; r + 1 < patch.side; ++r) {
        for (std::size_t c = 1; c + 1 < patch.side; ++c) {
            ++counts[lbp_code(patch, r, c)];
        }
    }
    const auto interior = static_cast<double>((patch.side - 2) * (patch.side - 2));
    std::vector<float> out(256);
    for (std::size_t i = 0; i < 256; ++i) {
        out[i] = static_cast<float>(static_cast<double>(counts[i]) / interior);
    }
    return out;
}

/// Scales every vector to unit Euclidean norm; zero vectors are left as is.
inline FeatureSet l2_normalize(const FeatureSet& in) {
    FeatureSet out(in.extractor_id(), in.dim());
    out.reserve(in.size());
    for (const auto& v : in.vectors()) {
        double sq = 0.0;
        for (float x : v.values) {
            sq += static_cast<double>(x) * x;
        }
        FeatureVector copy = v;
        if (sq > 0.0) {
            const double inv = 1.0 / std::sqrt(sq);
            for (auto& x : copy.values) {
                x = static_cast<float>(x * inv);
            }
        }
        out.add(std::move(copy));
    }
    return out;
}

// --- PFV1 -------------------------------------------------------------------

inline constexpr std::array<char, 4> kPfvMagic{'P', 'F', 'V', '1'};

namespace detail {

inline void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
}

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::string_view take(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw Error(ErrorKind::FormatError, std::string("truncated file while reading ") + what);
        }
        auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint16_t u16(const char* what) {
        auto b = take(2, what);
        return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                          (static_cast<unsigned char>(b[1]) << 8));
    }

    std::uint32_t u32(const char* what) {
        auto b = take(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        }
        return v;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }
}

} // namespace detail

inline std::string encode_features(const FeatureSet& set) {
    if (set.extractor_id().size() > 0xffff) {
        throw Error(ErrorKind::InvalidArgument, "extractor id longer than 65535 bytes");
    }
    std::string buf(kPfvMagic.begin(), kPfvMagic.end());
    detail::put_u32(buf, static_cast<std::uint32_t>(set.size()));
    detail::put_u32(buf, static_cast<std::uint32_t>(set.dim()));
    detail::put_u16(buf, static_cast<std::uint16_t>(set.extractor_id().size()));
    buf += set.extractor_id();
    for (const auto& v : set.vectors()) {
        if (v.patch_id.size() > 0xffff) {
            throw Error(ErrorKind::InvalidArgument, "patch id longer than 65535 bytes");
        }
        detail::put_u16(buf, static_cast<std::uint16_t>(v.patch_id.size()));
        buf += v.patch_id;
        detail::put_u32(buf, static_cast<std::uint32_t>(v.label));
        for (float x : v.values) {
            detail::put_u32(buf, std::bit_cast<std::uint32_t>(x));
        }
    }
    return buf;
}

inline FeatureSet decode_features(std::string_view bytes) {
    detail::ByteReader in(bytes);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kPfvMagic.data(), 4) != 0) {
        throw Error(ErrorKind::FormatError, "bad magic; not a PFV1 feature file");
    }
    in.take(4, "magic");
    const std::uint32_t count = in.u32("record count");
    const std::uint32_t dim = in.u32("dimension");
    if (dim == 0) {
        throw Error(ErrorKind::FormatError, "dimension is zero");
    }
    const std::uint16_t id_len = in.u16("extractor id length");
    FeatureSet set(std::string(in.take(id_len, "extractor id")), dim);

    for (std::uint32_t r = 0; r < count; ++r) {
        FeatureVector v;
        const std::uint16_t pid_len = in.u16("patch id length");
        v.patch_id = std::string(in.take(pid_len, "patch id"));
        v.label = static_cast<std::int32_t>(in.u32("label"));
        v.values.resize(dim);
        for (auto& x : v.values) {
            x = std::bit_cast<float>(in.u32("values"));
        }
        try {
            set.add(std::move(v));
        } catch (const Error& e) {
            throw Error(ErrorKind::FormatError, "record " + std::to_string(r) + ": " + e.what());
        }
    }
    if (!in.done()) {
        throw Error(ErrorKind::FormatError, "trailing bytes after the last record");
    }
    return set;
}

inline void write_features(const FeatureSet& set, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_features(set));
}

inline FeatureSet read_features(const std::filesystem::path& path) {
    return decode_features(detail::read_file_bytes(path));
}

} // namespace pathbench
