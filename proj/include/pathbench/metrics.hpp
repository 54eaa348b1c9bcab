#pragma once

#include "dataset.hpp"
#include "error.hpp"
#include "predictions.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

/**
 * @file metrics.hpp
 *
 * @brief Retrieval/classification scoring over the test split.
 *
 * With Gamma_s the test patches of class s and R the predictions:
 *
 *  - eta_p: correctly classified patches over all test patches.
 *  - eta_w: mean over classes of |R cap Gamma_s| / |Gamma_s| (per-class recall).
 *  - eta_total = eta_p * eta_w.
 *
 * `eta_w_literal` is the unnormalized (1/N) sum_s |R cap Gamma_s|, kept for
 * auditing; it is a count, not a fraction, and can exceed 1.
 */

namespace pathbench {

struct ConfusionMatrix {
    std::vector<int> classes;                     ///< ascending; row/column order
    std::vector<std::vector<std::size_t>> counts; ///< [true][predicted]

    std::size_t size() const { return classes.size(); }

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& row : counts) {
            for (auto c : row) {
                n += c;
            }
        }
        return n;
    }

    std::size_t trace() const {
        std::size_t n = 0;
        for (std::size_t s = 0; s < counts.size(); ++s) {
            n += counts[s][s];
        }
        return n;
    }

    /// |Gamma_s| per class: row sums.
    std::vector<std::size_t> gamma_sizes() const {
        std::vector<std::size_t> out;
        for (const auto& row : counts) {
            std::size_t n = 0;
            for (auto c : row) {
                n += c;
            }
            out.push_back(n);
        }
        return out;
    }
};

/**
 * Cross-tabulates predictions against the true classes of `split` records.
 * Every record in the split needs a prediction and every prediction must
 * name a record in the split.
 */
inline ConfusionMatrix confusion(const PredictionSet& preds, const DatasetManifest& manifest,
                                 Split split = Split::Test) {
    ConfusionMatrix cm;
    cm.classes.assign(manifest.classes().begin(), manifest.classes().end());
    std::map<int, std::size_t> slot;
    for (std::size_t k = 0; k < cm.classes.size(); ++k) {
        slot[cm.classes[k]] = k;
    }
    cm.counts.assign(cm.classes.size(), std::vector<std::size_t>(cm.classes.size(), 0));

    std::vector<std::string> missing;
    std::size_t matched = 0;
    for (const auto& r : manifest.records()) {
        if (r.split != split) {
            continue;
        }
        auto it = preds.find(r.patch_id);
        if (it == preds.end()) {
            missing.push_back(r.patch_id);
            continue;
        }
        ++matched;
        auto predicted = slot.find(it->second);
        if (predicted == slot.end()) {
            throw Error(ErrorKind::InvalidData, "prediction for '" + r.patch_id + "' names class " +
                                                    std::to_string(it->second) + " which is not in the manifest");
        }
        ++cm.counts[slot.at(r.class_id)][predicted->second];
    }

    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size(); ++i) {
            list += (i ? ", " : "") + missing[i];
        }
        throw Error(ErrorKind::IncompletePredictions,
                    std::to_string(missing.size()) + " patch(es) without a prediction: " + list);
    }
    if (matched != preds.size()) {
        std::vector<std::string> split_ids;
        for (const auto& r : manifest.records()) {
            if (r.split == split) {
                split_ids.push_back(r.patch_id);
            }
        }
        std::sort(split_ids.begin(), split_ids.end());
        for (const auto& [id, cls] : preds) {
            if (!std::binary_search(split_ids.begin(), split_ids.end(), id)) {
                throw Error(ErrorKind::UnknownPatch,
                            "prediction for '" + id + "' does not match any " + std::string(to_string(split)) + " patch");
            }
        }
    }
    return cm;
}

/// Fraction of all test patches predicted as their own class.
inline double eta_p(const ConfusionMatrix& cm, std::size_t n_tot) {
    if (n_tot == 0) {
        throw Error(ErrorKind::EmptyEvaluation, "no test patches to evaluate");
    }
    if (n_tot != cm.total()) {
        throw Error(ErrorKind::InvalidArgument, "n_tot does not equal the confusion matrix total");
    }
    return static_cast<double>(cm.trace()) / static_cast<double>(n_tot);
}

inline double eta_p(const ConfusionMatrix& cm) { return eta_p(cm, cm.total()); }

/// Mean per-class recall; every class counted needs at least one test patch.
inline double eta_w(const ConfusionMatrix& cm, const std::vector<std::size_t>& gamma_sizes) {
    if (gamma_sizes.size() != cm.size()) {
        throw Error(ErrorKind::ShapeError, "gamma_sizes length does not match class count");
    }
    if (cm.size() == 0) {
        throw Error(ErrorKind::EmptyEvaluation, "no classes to evaluate");
    }
    double sum = 0.0;
    for (std::size_t s = 0; s < cm.size(); ++s) {
        if (gamma_sizes[s] == 0) {
            throw Error(ErrorKind::ZeroClassSize,
                        "class " + std::to_string(cm.classes[s]) + " has no test patches");
        }
        sum += static_cast<double>(cm.counts[s][s]) / static_cast<double>(gamma_sizes[s]);
    }
    return sum / static_cast<double>(cm.size());
}

inline double eta_w(const ConfusionMatrix& cm) { return eta_w(cm, cm.gamma_sizes()); }

/// (1/N) sum_s |R cap Gamma_s| without per-class normalization.
inline double eta_w_literal(const ConfusionMatrix& cm) {
    if (cm.size() == 0) {
        throw Error(ErrorKind::EmptyEvaluation, "no classes to evaluate");
    }
    return static_cast<double>(cm.trace()) / static_cast<double>(cm.size());
}

inline double eta_total(double eta_p_value, double eta_w_value) {
    if (!(eta_p_value >= 0.0 && eta_p_value <= 1.0) || !(eta_w_value >= 0.0 && eta_w_value <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "accuracies must lie in [0,1]");
    }
    return eta_p_value * eta_w_value;
}

struct EvalReport {
    ConfusionMatrix confusion;
    std::vector<std::size_t> gamma_sizes;
    std::size_t n_tot = 0;
    double eta_p = 0.0;
    double eta_w = 0.0;
    double eta_total = 0.0;
    std::optional<double> eta_w_literal;
};

inline EvalReport report(const PredictionSet& preds, const DatasetManifest& manifest, bool with_literal_eta_w = false) {
    EvalReport r;
    r.confusion = confusion(preds, manifest, Split::Test);
    r.n_tot = r.confusion.total();
    if (r.n_tot == 0) {
        throw Error(ErrorKind::EmptyEvaluation, "manifest has no test patches");
    }
    r.gamma_sizes = r.confusion.gamma_sizes();
    r.eta_p = pathbench::eta_p(r.confusion, r.n_tot);
    r.eta_w = pathbench::eta_w(r.confusion, r.gamma_sizes);
    r.eta_total = pathbench::eta_total(r.eta_p, r.eta_w);
    if (with_literal_eta_w) {
        r.eta_w_literal = pathbench::eta_w_literal(r.confusion);
    }
    return r;
}

/// Stable JSON: keys in sorted order, one per line, floats with 6 decimals.
inline std::string to_json(const EvalReport& r) {
    auto fixed = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    auto list = [](const auto& values) {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < values.size(); ++i) {
            os << (i ? ", " : "") << values[i];
        }
        os << ']';
        return os.str();
    };

    std::ostringstream os;
    os << "{\n";
    os << "  \"classes\": " << list(r.confusion.classes) << ",\n";
    os << "  \"confusion\": [";
    for (std::size_t s = 0; s < r.confusion.counts.size(); ++s) {
        os << (s ? ",\n    " : "\n    ") << list(r.confusion.counts[s]);
    }
    os << (r.confusion.counts.empty() ? "],\n" : "\n  ],\n");
    os << "  \"eta_p\": " << fixed(r.eta_p) << ",\n";
    os << "  \"eta_total\": " << fixed(r.eta_total) << ",\n";
    os << "  \"eta_w\": " << fixed(r.eta_w) << ",\n";
    if (r.eta_w_literal) {
        os << "  \"eta_w_literal\": " << fixed(*r.eta_w_literal) << ",\n";
    }
    os << "  \"gamma_sizes\": " << list(r.gamma_sizes) << ",\n";
    os << "  \"n_tot\": " << r.n_tot << "\n";
    os << "}\n";
    return os.str();
}

} // namespace pathbench
