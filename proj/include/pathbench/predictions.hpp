#pragma once

#include "dataset.hpp"
#include "error.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace pathbench {

/// The retrieved/classified set: patch id -> predicted class. Iteration
/// order is by patch id, which is also the order written to disk.
using PredictionSet = std::map<std::string, int>;

/// TSV, one `patch_id <TAB> predicted_class` per line.
inline void write_predictions(std::ostream& out, const PredictionSet& preds) {
    for (const auto& [id, cls] : preds) {
        out << id << '\t' << cls << '\n';
    }
}

inline void save_predictions(const std::filesystem::path& path, const PredictionSet& preds) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
    write_predictions(out, preds);
}

inline PredictionSet parse_predictions(std::istream& in) {
    PredictionSet preds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto fields = detail::split_tabs(line);
        int cls = 0;
        if (fields.size() != 2 || fields[0].empty() || !detail::parse_int(fields[1], cls) || cls < 0) {
            throw Error(ErrorKind::ParseError, "predictions line " + std::to_string(line_no) +
                                                   ": expected 'patch_id<TAB>class_id'");
        }
        if (!preds.emplace(std::string(fields[0]), cls).second) {
            throw Error(ErrorKind::DuplicateId, "predictions line " + std::to_string(line_no) + ": patch id '" +
                                                    std::string(fields[0]) + "' repeated");
        }
    }
    return preds;
}

inline PredictionSet load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::MissingFile, "cannot open predictions " + path.string());
    }
    return parse_predictions(in);
}

} // namespace pathbench
