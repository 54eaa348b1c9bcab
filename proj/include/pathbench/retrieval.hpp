#pragma once

#include "error.hpp"
#include "features.hpp"
#include "parallel.hpp"
#include "predictions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file retrieval.hpp
 *
 * @brief Exact brute-force nearest-neighbour search over a labeled feature
 * set, and k-NN voting on top of it.
 *
 * Results are ordered by distance, then by patch id, so they do not depend
 * on the order vectors were indexed in.
 */

namespace pathbench {

enum class Metric { Euclidean, Cosine };

inline Metric parse_metric(std::string_view text) {
    if (text == "euclidean") {
        return Metric::Euclidean;
    }
    if (text == "cosine") {
        return Metric::Cosine;
    }
    throw Error(ErrorKind::InvalidArgument, "metric must be 'euclidean' or 'cosine', got '" + std::string(text) + "'");
}

struct Neighbor {
    std::string patch_id;
    double distance = 0.0;
    int class_id = 0;
};

class RetrievalIndex {
public:
    RetrievalIndex(FeatureSet set, Metric metric) : set_(std::move(set)), metric_(metric) {
        if (set_.empty()) {
            throw Error(ErrorKind::InvalidArgument, "cannot index an empty feature set");
        }
        norms_.reserve(set_.size());
        for (const auto& v : set_.vectors()) {
            if (!v.labeled()) {
                throw Error(ErrorKind::MissingLabel, "indexed vector '" + v.patch_id + "' has no label");
            }
            double sq = 0.0;
            for (float x : v.values) {
                sq += static_cast<double>(x) * x;
            }
            norms_.push_back(std::sqrt(sq));
        }
    }

    std::size_t size() const { return set_.size(); }
    std::size_t dim() const { return set_.dim(); }
    Metric metric() const { return metric_; }
    const FeatureSet& features() const { return set_; }

    double distance(std::size_t i, std::span<const float> query, double query_norm) const {
        const auto& v = set_[i].values;
        if (metric_ == Metric::Euclidean) {
            double sq = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j) {
                const double d = static_cast<double>(v[j]) - query[j];
                sq += d * d;
            }
            return std::sqrt(sq);
        }
        if (norms_[i] == 0.0 || query_norm == 0.0) {
            return 1.0; // similarity of a zero vector is taken as 0
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) {
            dot += static_cast<double>(v[j]) * query[j];
        }
        return std::clamp(1.0 - dot / (norms_[i] * query_norm), 0.0, 2.0);
    }

    /// The min(k, size) closest vectors to `query`.
    std::vector<Neighbor> query(std::span<const float> query, std::size_t k) const {
        if (k == 0) {
            throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
        }
        if (query.size() != dim()) {
            throw Error(ErrorKind::ShapeError, "query length " + std::to_string(query.size()) +
                                                   " does not match index dim " + std::to_string(dim()));
        }
        double qsq = 0.0;
        for (float x : query) {
            qsq += static_cast<double>(x) * x;
        }
        const double qnorm = std::sqrt(qsq);

        struct Candidate {
            double distance;
            std::size_t index;
        };
        std::vector<Candidate> all(size());
        for (std::size_t i = 0; i < size(); ++i) {
            all[i] = {distance(i, query, qnorm), i};
        }
        const std::size_t take = std::min(k, all.size());
        auto closer = [this](const Candidate& a, const Candidate& b) {
            if (a.distance != b.distance) {
                return a.distance < b.distance;
            }
            return set_[a.index].patch_id < set_[b.index].patch_id;
        };
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), closer);

        std::vector<Neighbor> out;
        out.reserve(take);
        for (std::size_t r = 0; r < take; ++r) {
            const auto& v = set_[all[r].index];
            out.push_back({v.patch_id, all[r].distance, v.label});
        }
        return out;
    }

private:
    FeatureSet set_;
    Metric metric_;
    std::vector<double> norms_;
};

inline RetrievalIndex build_index(FeatureSet set, Metric metric) { return RetrievalIndex(std::move(set), metric); }

/// Neighbour lists for every query vector, in query order.
inline std::vector<std::vector<Neighbor>> query_all(const RetrievalIndex& index, const FeatureSet& queries,
                                                    std::size_t k, std::size_t threads = 1) {
    if (!queries.empty() && queries.dim() != index.dim()) {
        throw Error(ErrorKind::ShapeError, "query dim " + std::to_string(queries.dim()) +
                                               " does not match index dim " + std::to_string(index.dim()));
    }
    return parallel_map<std::vector<Neighbor>>(queries.size(), threads,
                                               [&](std::size_t i) { return index.query(queries[i].values, k); });
}

/// Majority class among `neighbors`; ties go to the smallest class id.
inline int vote(std::span<const Neighbor> neighbors) {
    if (neighbors.empty()) {
        throw Error(ErrorKind::InvalidArgument, "cannot vote over zero neighbors");
    }
    std::map<int, std::size_t> counts;
    for (const auto& n : neighbors) {
        ++counts[n.class_id];
    }
    int best = counts.begin()->first;
    std::size_t best_count = 0;
    for (const auto& [cls, count] : counts) {
        if (count > best_count) {
            best = cls;
            best_count = count;
        }
    }
    return best;
}

inline PredictionSet classify_knn(const RetrievalIndex& index, const FeatureSet& queries, std::size_t k,
                                  std::size_t threads = 1) {
    const auto results = query_all(index, queries, k, threads);
    PredictionSet out;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        out.emplace(queries[i].patch_id, vote(results[i]));
    }
    return out;
}

/// `query_id rank neighbor_id distance neighbor_class`, rank from 1,
/// distances with 9 significant digits.
inline void write_neighbors(std::ostream& out, const FeatureSet& queries,
                            const std::vector<std::vector<Neighbor>>& results) {
    char buf[64];
    for (std::size_t i = 0; i < queries.size(); ++i) {
        for (std::size_t r = 0; r < results[i].size(); ++r) {
            const auto& n = results[i][r];
            std::snprintf(buf, sizeof buf, "%.9g", n.distance);
            out << queries[i].patch_id << '\t' << (r + 1) << '\t' << n.patch_id << '\t' << buf << '\t' << n.class_id
                << '\n';
        }
    }
}

} // namespace pathbench
