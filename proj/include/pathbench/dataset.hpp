#pragma once

#include "error.hpp"
#include "random.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

/**
 * @file dataset.hpp
 *
 * @brief Experiment manifest: patch records, class labels, train/test split
 * and seeded per-class sampling.
 *
 * Manifest files are TSV, one record per line:
 *
 *     patch_id <TAB> class_id <TAB> split <TAB> grid_row <TAB> grid_col <TAB> path
 *
 * Lines starting with `#` are comments. A comment of the form
 * `# classes: 0 1 2` declares class ids that may have no records.
 */

namespace pathbench {

enum class Split { Train, Test };

inline std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

inline Split parse_split(std::string_view text) {
    if (text == "train") {
        return Split::Train;
    }
    if (text == "test") {
        return Split::Test;
    }
    throw Error(ErrorKind::InvalidArgument, "split must be 'train' or 'test', got '" + std::string(text) + "'");
}

struct PatchRecord {
    std::string patch_id;
    int class_id = 0;
    Split split = Split::Train;
    int grid_row = 0;
    int grid_col = 0;
    std::string path;

    friend bool operator==(const PatchRecord&, const PatchRecord&) = default;
};

/**
 * @brief Immutable-after-construction set of patch records.
 *
 * The constructor enforces the manifest invariants: unique patch ids,
 * non-negative class ids and grid positions, and non-empty relative paths.
 */
class DatasetManifest {
public:
    DatasetManifest() = default;

    DatasetManifest(std::vector<PatchRecord> records, std::set<int> declared_classes = {},
                    std::filesystem::path root = {})
        : records_(std::move(records)), classes_(std::move(declared_classes)), root_(std::move(root)) {
        std::unordered_set<std::string> seen;
        for (const auto& r : records_) {
            validate(r);
            if (!seen.insert(r.patch_id).second) {
                throw Error(ErrorKind::DuplicateId, "patch id '" + r.patch_id + "' appears more than once");
            }
            classes_.insert(r.class_id);
        }
        for (int c : classes_) {
            if (c < 0) {
                throw Error(ErrorKind::InvalidArgument, "class ids must be >= 0");
            }
        }
    }

    const std::vector<PatchRecord>& records() const { return records_; }
    const std::set<int>& classes() const { return classes_; }
    const std::filesystem::path& root() const { return root_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    std::vector<PatchRecord> split_records(Split split) const {
        std::vector<PatchRecord> out;
        std::copy_if(records_.begin(), records_.end(), std::back_inserter(out),
                     [split](const PatchRecord& r) { return r.split == split; });
        return out;
    }

    /// Absolute (or root-relative) location of a record's patch file.
    std::filesystem::path resolve(const PatchRecord& record) const { return root_ / record.path; }

    friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
        return a.records_ == b.records_ && a.classes_ == b.classes_;
    }

private:
    static void validate(const PatchRecord& r) {
        if (r.patch_id.empty()) {
            throw Error(ErrorKind::InvalidArgument, "empty patch id");
        }
        if (r.class_id < 0) {
            throw Error(ErrorKind::InvalidArgument, "negative class id for '" + r.patch_id + "'");
        }
        if (r.grid_row < 0 || r.grid_col < 0) {
            throw Error(ErrorKind::InvalidArgument, "negative grid position for '" + r.patch_id + "'");
        }
        if (r.path.empty()) {
            throw Error(ErrorKind::InvalidArgument, "empty path for '" + r.patch_id + "'");
        }
        if (std::filesystem::path(r.path).is_absolute()) {
            throw Error(ErrorKind::InvalidArgument, "absolute path for '" + r.patch_id + "': " + r.path);
        }
    }

    std::vector<PatchRecord> records_;
    std::set<int> classes_;
    std::filesystem::path root_;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab - start));
        if (tab == std::string_view::npos) {
            break;
        }
        start = tab + 1;
    }
    return fields;
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc() && ptr == end && !text.empty();
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

} // namespace detail

/// Parses manifest text. `root` is stored on the result for resolving paths.
inline DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& root = {}) {
    std::vector<PatchRecord> records;
    std::set<int> declared;
    std::string line;
    std::size_t line_no = 0;

    auto fail = [&](const std::string& why) {
        throw Error(ErrorKind::ParseError, "line " + std::to_string(line_no) + ": " + why);
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            auto body = detail::trim(std::string_view(line).substr(1));
            constexpr std::string_view key = "classes:";
            if (body.substr(0, key.size()) == key) {
                std::istringstream ids{std::string(body.substr(key.size()))};
                std::string token;
                while (ids >> token) {
                    int c = 0;
                    if (!detail::parse_int(token, c) || c < 0) {
                        fail("bad class id '" + token + "' in classes declaration");
                    }
                    declared.insert(c);
                }
            }
            continue;
        }

        const auto fields = detail::split_tabs(line);
        if (fields.size() != 6) {
            fail("expected 6 tab-separated fields, got " + std::to_string(fields.size()));
        }
        PatchRecord r;
        r.patch_id = std::string(fields[0]);
        if (r.patch_id.empty()) {
            fail("empty patch id");
        }
        if (!detail::parse_int(fields[1], r.class_id) || r.class_id < 0) {
            fail("bad class id '" + std::string(fields[1]) + "'");
        }
        if (fields[2] == "train") {
            r.split = Split::Train;
        } else if (fields[2] == "test") {
            r.split = Split::Test;
        } else {
            fail("bad split '" + std::string(fields[2]) + "'");
        }
        if (!detail::parse_int(fields[3], r.grid_row) || r.grid_row < 0) {
            fail("bad grid_row '" + std::string(fields[3]) + "'");
        }
        if (!detail::parse_int(fields[4], r.grid_col) || r.grid_col < 0) {
            fail("bad grid_col '" + std::string(fields[4]) + "'");
        }
        r.path = std::string(fields[5]);
        if (r.path.empty() || std::filesystem::path(r.path).is_absolute()) {
            fail("path must be non-empty and relative");
        }
        records.push_back(std::move(r));
    }

    if (records.empty()) {
        throw Error(ErrorKind::EmptyManifest, "manifest has no records");
    }
    return DatasetManifest(std::move(records), std::move(declared), root);
}

/// Loads a manifest file; record paths resolve against the file's directory.
inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::MissingFile, "cannot open manifest " + path.string());
    }
    return parse_manifest(in, path.parent_path());
}

inline void write_manifest(std::ostream& out, const DatasetManifest& manifest) {
    out << "# classes:";
    for (int c : manifest.classes()) {
        out << ' ' << c;
    }
    out << '\n';
    for (const auto& r : manifest.records()) {
        out << r.patch_id << '\t' << r.class_id << '\t' << to_string(r.split) << '\t' << r.grid_row << '\t'
            << r.grid_col << '\t' << r.path << '\n';
    }
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write manifest " + path.string());
    }
    write_manifest(out, manifest);
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }
}

/// Record order used for every manifest this library emits.
inline void sort_records(std::vector<PatchRecord>& records) {
    std::sort(records.begin(), records.end(), [](const PatchRecord& a, const PatchRecord& b) {
        if (a.class_id != b.class_id) {
            return a.class_id < b.class_id;
        }
        return a.patch_id < b.patch_id;
    });
}

/**
 * @brief Keeps at most `n` train records per class, drawn uniformly without
 * replacement; test records pass through.
 *
 * One generator seeded with `seed` is consumed class by class in ascending
 * class order, over that class's train records sorted by patch id, so the
 * result depends only on the record set and not on input order. Classes with
 * fewer than `n` train records are kept whole and a message is appended to
 * `warnings` when provided.
 */
inline DatasetManifest sample_per_class(const DatasetManifest& manifest, std::size_t n, std::uint64_t seed,
                                        std::vector<std::string>* warnings = nullptr) {
    if (n == 0) {
        throw Error(ErrorKind::InvalidArgument, "sample size must be >= 1");
    }
    if (manifest.empty()) {
        throw Error(ErrorKind::EmptyManifest, "cannot sample an empty manifest");
    }

    std::map<int, std::vector<PatchRecord>> train_by_class;
    std::vector<PatchRecord> out;
    for (const auto& r : manifest.records()) {
        if (r.split == Split::Train) {
            train_by_class[r.class_id].push_back(r);
        } else {
            out.push_back(r);
        }
    }

    Rng rng(seed);
    for (auto& [class_id, records] : train_by_class) {
        sort_records(records);
        if (records.size() <= n) {
            if (records.size() < n && warnings) {
                warnings->push_back("class " + std::to_string(class_id) + " has only " +
                                    std::to_string(records.size()) + " train records (requested " +
                                    std::to_string(n) + "); keeping all");
            }
            out.insert(out.end(), records.begin(), records.end());
            continue;
        }
        // Partial Fisher-Yates: the first n slots become a uniform sample.
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = i + static_cast<std::size_t>(uniform_below(rng, records.size() - i));
            std::swap(records[i], records[j]);
        }
        out.insert(out.end(), records.begin(), records.begin() + static_cast<std::ptrdiff_t>(n));
    }
    for (int c : manifest.classes()) {
        if (!train_by_class.contains(c) && warnings) {
            warnings->push_back("class " + std::to_string(c) + " has no train records");
        }
    }

    sort_records(out);
    return DatasetManifest(std::move(out), manifest.classes(), manifest.root());
}

/// Per-class record counts for one split; every manifest class is present.
inline std::map<int, std::size_t> class_distribution(const DatasetManifest& manifest, Split split) {
    std::map<int, std::size_t> counts;
    for (int c : manifest.classes()) {
        counts[c] = 0;
    }
    for (const auto& r : manifest.records()) {
        if (r.split == split) {
            ++counts[r.class_id];
        }
    }
    return counts;
}

} // namespace pathbench
