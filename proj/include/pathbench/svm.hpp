#pragma once

#include "error.hpp"
#include "features.hpp"
#include "parallel.hpp"
#include "predictions.hpp"
#include "random.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

/**
 * @file svm.hpp
 *
 * @brief Multi-class linear SVM: one-vs-rest L1-hinge binary problems, each
 * solved in the dual by coordinate descent.
 *
 * The bias is learned by augmenting every feature vector with a constant 1,
 * so it is regularized like any other weight. For a binary problem with
 * labels y_i in {-1,+1} the dual is
 *
 *     max_a  sum_i a_i - 1/2 ||w(a)||^2,   w(a) = sum_i a_i y_i x_i,   0 <= a_i <= C
 *
 * and a single-coordinate update is solved exactly, then clipped to the box.
 * An epoch visits every coordinate once in a seeded random order; training
 * stops once the largest projected-gradient magnitude seen in an epoch is at
 * most `tol`.
 */

namespace pathbench {

struct SvmParams {
    double C = 1.0;
    double tol = 1e-4;
    std::size_t max_iter = 1000;
    std::uint64_t seed = 42;

    void validate() const {
        if (!(C > 0.0) || !std::isfinite(C)) {
            throw Error(ErrorKind::InvalidArgument, "C must be > 0");
        }
        if (!(tol > 0.0) || !std::isfinite(tol)) {
            throw Error(ErrorKind::InvalidArgument, "tol must be > 0");
        }
        if (max_iter == 0) {
            throw Error(ErrorKind::InvalidArgument, "max_iter must be >= 1");
        }
    }
};

/// Row-major n x cols view; callers put the constant-1 bias column last.
struct MatrixView {
    std::span<const float> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::span<const float> row(std::size_t i) const { return data.subspan(i * cols, cols); }
};

/// Owning augmented design matrix: each row is [x, 1].
struct AugmentedMatrix {
    std::vector<float> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    MatrixView view() const { return {data, rows, cols}; }
};

inline AugmentedMatrix augment(const FeatureSet& set) {
    AugmentedMatrix m;
    m.rows = set.size();
    m.cols = set.dim() + 1;
    m.data.reserve(m.rows * m.cols);
    for (const auto& v : set.vectors()) {
        m.data.insert(m.data.end(), v.values.begin(), v.values.end());
        m.data.push_back(1.0f);
    }
    return m;
}

struct BinaryResult {
    std::vector<double> weights; ///< length cols; last entry is the bias
    std::vector<double> alphas;
    std::size_t epochs = 0;
    double max_violation = 0.0; ///< of the final epoch
    double dual_objective = 0.0;
    double primal_objective = 0.0;
    bool converged = false;
};

/// Called after every epoch with (epoch number from 1, dual objective).
using EpochObserver = std::function<void(std::size_t, double)>;

namespace detail {

inline double dot(std::span<const float> x, std::span<const double> w) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        acc += static_cast<double>(x[j]) * w[j];
    }
    return acc;
}

inline double squared_norm(std::span<const double> w) {
    double acc = 0.0;
    for (double v : w) {
        acc += v * v;
    }
    return acc;
}

} // namespace detail

inline double dual_objective(std::span<const double> alphas, std::span<const double> weights) {
    return std::accumulate(alphas.begin(), alphas.end(), 0.0) - 0.5 * detail::squared_norm(weights);
}

inline double primal_objective(const MatrixView& x, std::span<const int> y, std::span<const double> weights, double C) {
    double hinge = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        hinge += std::max(0.0, 1.0 - y[i] * detail::dot(x.row(i), weights));
    }
    return 0.5 * detail::squared_norm(weights) + C * hinge;
}

/**
 * @brief Dual coordinate descent for one binary L1-hinge linear SVM.
 *
 * `x` must already carry the bias column. Labels must be -1 or +1 and both
 * must occur.
 */
inline BinaryResult train_binary(const MatrixView& x, std::span<const int> y, const SvmParams& params,
                                 const EpochObserver& observer = {}) {
    params.validate();
    const std::size_t n = x.rows;
    if (y.size() != n) {
        throw Error(ErrorKind::ShapeError, "label count does not match row count");
    }
    if (x.data.size() != n * x.cols || x.cols == 0) {
        throw Error(ErrorKind::ShapeError, "matrix storage does not match rows*cols");
    }
    if (n < 2) {
        throw Error(ErrorKind::DegenerateLabels, "need at least two training points");
    }
    bool has_pos = false;
    bool has_neg = false;
    for (int label : y) {
        if (label == 1) {
            has_pos = true;
        } else if (label == -1) {
            has_neg = true;
        } else {
            throw Error(ErrorKind::InvalidArgument, "binary labels must be -1 or +1");
        }
    }
    if (!has_pos || !has_neg) {
        throw Error(ErrorKind::DegenerateLabels, "binary problem has only one label");
    }
    for (float v : x.data) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::InvalidData, "non-finite feature value");
        }
    }

    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) {
        double q = 0.0;
        for (float v : x.row(i)) {
            q += static_cast<double>(v) * v;
        }
        diag[i] = q;
    }

    BinaryResult result;
    result.weights.assign(x.cols, 0.0);
    result.alphas.assign(n, 0.0);
    auto& w = result.weights;
    auto& alpha = result.alphas;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(params.seed);

    for (std::size_t epoch = 1; epoch <= params.max_iter; ++epoch) {
        shuffle(std::span<std::size_t>(order), rng);
        double max_violation = 0.0;
        for (std::size_t i : order) {
            const auto xi = x.row(i);
            const double yi = y[i];
            const double grad = yi * detail::dot(xi, w) - 1.0;

            double projected = grad;
            if (alpha[i] <= 0.0) {
                projected = std::min(grad, 0.0);
            } else if (alpha[i] >= params.C) {
                projected = std::max(grad, 0.0);
            }
            max_violation = std::max(max_violation, std::abs(projected));
            if (projected == 0.0 || diag[i] <= 0.0) {
                continue;
            }

            const double old = alpha[i];
            alpha[i] = std::clamp(old - grad / diag[i], 0.0, params.C);
            const double step = (alpha[i] - old) * yi;
            if (step != 0.0) {
                for (std::size_t j = 0; j < xi.size(); ++j) {
                    w[j] += step * xi[j];
                }
            }
        }
        result.epochs = epoch;
        result.max_violation = max_violation;
        if (observer) {
            observer(epoch, dual_objective(alpha, w));
        }
        if (max_violation <= params.tol) {
            result.converged = true;
            break;
        }
    }

    result.dual_objective = dual_objective(alpha, w);
    result.primal_objective = primal_objective(x, y, w, params.C);
    return result;
}

// --- multi-class model ----------------------------------------------------------

struct LinearSvmModel {
    std::vector<int> classes;                ///< ascending
    std::size_t dim = 0;                     ///< feature dimension, without the bias
    std::vector<std::vector<float>> weights; ///< one row of dim+1 per class
    double C = 1.0;
    double tol = 1e-4;
    std::uint64_t seed = 42;
    std::string extractor_id;

    void validate() const {
        if (dim == 0) {
            throw Error(ErrorKind::ShapeError, "model dimension must be >= 1");
        }
        if (weights.size() != classes.size() || classes.empty()) {
            throw Error(ErrorKind::ShapeError, "weight row count does not match class count");
        }
        if (!std::is_sorted(classes.begin(), classes.end()) ||
            std::adjacent_find(classes.begin(), classes.end()) != classes.end()) {
            throw Error(ErrorKind::InvalidData, "model classes must be strictly ascending");
        }
        for (const auto& row : weights) {
            if (row.size() != dim + 1) {
                throw Error(ErrorKind::ShapeError, "weight row length must be dim+1");
            }
            for (float v : row) {
                if (!std::isfinite(v)) {
                    throw Error(ErrorKind::InvalidData, "non-finite model weight");
                }
            }
        }
    }
};

struct ClassTrainStats {
    int class_id = 0;
    std::size_t iterations = 0;
    double duality_gap = 0.0;
    bool converged = false;
};

struct TrainReport {
    std::vector<ClassTrainStats> per_class;
    double wall_seconds = 0.0;
};

struct TrainResult {
    LinearSvmModel model;
    TrainReport report;
};

/**
 * One-vs-rest training: class c against the rest, with the binary problem
 * seeded by `seed ^ c`. Binary problems run on up to `threads` workers and
 * are merged in class order, so the model does not depend on `threads`.
 */
inline TrainResult train_ovr(const FeatureSet& train, const SvmParams& params, std::size_t threads = 1) {
    params.validate();
    std::set<int> class_set;
    for (const auto& v : train.vectors()) {
        if (!v.labeled()) {
            throw Error(ErrorKind::MissingLabel, "training vector '" + v.patch_id + "' has no label");
        }
        class_set.insert(v.label);
    }
    if (class_set.size() < 2) {
        throw Error(ErrorKind::DegenerateLabels,
                    "training needs at least 2 classes, found " + std::to_string(class_set.size()));
    }

    const auto start = std::chrono::steady_clock::now();
    const AugmentedMatrix x = augment(train);
    const std::vector<int> classes(class_set.begin(), class_set.end());

    auto results = parallel_map<BinaryResult>(classes.size(), threads, [&](std::size_t k) {
        std::vector<int> y(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) {
            y[i] = train[i].label == classes[k] ? 1 : -1;
        }
        SvmParams p = params;
        p.seed = params.seed ^ static_cast<std::uint64_t>(classes[k]);
        return train_binary(x.view(), y, p);
    });

    TrainResult out;
    auto& model = out.model;
    model.classes = classes;
    model.dim = train.dim();
    model.C = params.C;
    model.tol = params.tol;
    model.seed = params.seed;
    model.extractor_id = train.extractor_id();
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const auto& r = results[k];
        model.weights.emplace_back(r.weights.begin(), r.weights.end());
        out.report.per_class.push_back({classes[k], r.epochs, r.primal_objective - r.dual_objective, r.converged});
    }
    out.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

/// score_c = w_c . [x, 1], in class order.
inline std::vector<double> decision_values(const LinearSvmModel& model, std::span<const float> x) {
    if (x.size() != model.dim) {
        throw Error(ErrorKind::ShapeError, "feature length " + std::to_string(x.size()) + " does not match model dim " +
                                               std::to_string(model.dim));
    }
    std::vector<double> scores(model.classes.size());
    for (std::size_t k = 0; k < model.classes.size(); ++k) {
        const auto& w = model.weights[k];
        double acc = w[model.dim];
        for (std::size_t j = 0; j < model.dim; ++j) {
            acc += static_cast<double>(w[j]) * x[j];
        }
        scores[k] = acc;
    }
    return scores;
}

/// Index of the largest score; ties resolve to the first (smallest class id).
inline std::size_t argmax_first(std::span<const double> scores) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < scores.size(); ++k) {
        if (scores[k] > scores[best]) {
            best = k;
        }
    }
    return best;
}

inline PredictionSet predict(const LinearSvmModel& model, const FeatureSet& set) {
    if (!set.empty() && set.dim() != model.dim) {
        throw Error(ErrorKind::ShapeError, "feature dim " + std::to_string(set.dim()) + " does not match model dim " +
                                               std::to_string(model.dim));
    }
    PredictionSet out;
    for (const auto& v : set.vectors()) {
        const auto scores = decision_values(model, v.values);
        out.emplace(v.patch_id, model.classes[argmax_first(scores)]);
    }
    return out;
}

// --- PSM1 model files ----------------------------------------------------------

namespace detail {

inline constexpr char kBase64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(std::span<const unsigned char> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kBase64Alphabet[(v >> 18) & 63];
        out += kBase64Alphabet[(v >> 12) & 63];
        out += kBase64Alphabet[(v >> 6) & 63];
        out += kBase64Alphabet[v & 63];
    }
    const std::size_t rest = bytes.size() - i;
    if (rest > 0) {
        std::uint32_t v = bytes[i] << 16;
        if (rest == 2) {
            v |= bytes[i + 1] << 8;
        }
        out += kBase64Alphabet[(v >> 18) & 63];
        out += kBase64Alphabet[(v >> 12) & 63];
        out += rest == 2 ? kBase64Alphabet[(v >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

inline std::vector<unsigned char> base64_decode(std::string_view text) {
    auto value = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (text.size() % 4 != 0) {
        throw Error(ErrorKind::FormatError, "base64 length is not a multiple of 4");
    }
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        std::uint32_t v = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            const char c = text[i + k];
            if (c == '=' && i + 4 == text.size() && k >= 2) {
                ++pad;
                v <<= 6;
                continue;
            }
            const int d = value(c);
            if (d < 0 || pad > 0) {
                throw Error(ErrorKind::FormatError, "invalid base64 data");
            }
            v = (v << 6) | static_cast<std::uint32_t>(d);
        }
        out.push_back(static_cast<unsigned char>(v >> 16));
        if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xff));
    }
    return out;
}

inline std::string encode_floats_le(std::span<const float> values) {
    std::vector<unsigned char> bytes;
    bytes.reserve(values.size() * 4);
    for (float f : values) {
        const auto bits = std::bit_cast<std::uint32_t>(f);
        for (int k = 0; k < 4; ++k) {
            bytes.push_back(static_cast<unsigned char>((bits >> (8 * k)) & 0xff));
        }
    }
    return base64_encode(bytes);
}

inline std::vector<float> decode_floats_le(std::string_view text) {
    const auto bytes = base64_decode(text);
    if (bytes.size() % 4 != 0) {
        throw Error(ErrorKind::FormatError, "weight row is not a whole number of f32 values");
    }
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k) {
            bits |= static_cast<std::uint32_t>(bytes[4 * i + k]) << (8 * k);
        }
        out[i] = std::bit_cast<float>(bits);
    }
    return out;
}

} // namespace detail

inline constexpr std::string_view kModelFormat = "PSM1";

/// JSON text with sorted keys; weights are base64 of little-endian f32 rows.
inline std::string encode_model(const LinearSvmModel& model) {
    model.validate();
    nlohmann::json j;
    j["format"] = kModelFormat;
    j["classes"] = model.classes;
    j["dim"] = model.dim;
    j["C"] = model.C;
    j["tol"] = model.tol;
    j["seed"] = model.seed;
    j["extractor_id"] = model.extractor_id;
    auto rows = nlohmann::json::array();
    for (const auto& row : model.weights) {
        rows.push_back(detail::encode_floats_le(row));
    }
    j["weights"] = std::move(rows);
    return j.dump(2) + "\n";
}

inline LinearSvmModel decode_model(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, std::string("model is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("format") || j["format"] != kModelFormat) {
        throw Error(ErrorKind::FormatError, "not a PSM1 model file");
    }
    LinearSvmModel model;
    try {
        model.classes = j.at("classes").get<std::vector<int>>();
        model.dim = j.at("dim").get<std::size_t>();
        model.C = j.at("C").get<double>();
        model.tol = j.at("tol").get<double>();
        model.seed = j.at("seed").get<std::uint64_t>();
        model.extractor_id = j.at("extractor_id").get<std::string>();
        for (const auto& row : j.at("weights")) {
            model.weights.push_back(detail::decode_floats_le(row.get<std::string>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::FormatError, std::string("malformed model: ") + e.what());
    }
    try {
        model.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::FormatError, e.what());
    }
    return model;
}

inline void save_model(const LinearSvmModel& model, const std::filesystem::path& path) {
    detail::write_file_bytes(path, encode_model(model));
}

inline LinearSvmModel load_model(const std::filesystem::path& path) {
    return decode_model(detail::read_file_bytes(path));
}

} // namespace pathbench
