#pragma once

#include "error.hpp"
#include "features.hpp"
#include "parallel.hpp"
#include "tiler.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

/**
 * @file extractor.hpp
 *
 * @brief Extractor selection and the batch extraction entry points,
 * including the pluggable inference-model path for deep features.
 */

namespace pathbench {

enum class ExtractorKind { Histogram, Lbp, ExternalModel, Import };

struct ExtractorSpec {
    ExtractorKind kind = ExtractorKind::Lbp;
    std::filesystem::path path; ///< model file or feature file, kind-dependent

    /// Stable identifier written into feature files.
    std::string id() const {
        switch (kind) {
        case ExtractorKind::Histogram: return "histogram";
        case ExtractorKind::Lbp: return "lbp";
        case ExtractorKind::ExternalModel: return "onnx:" + path.filename().string();
        case ExtractorKind::Import: return "import";
        }
        return "unknown";
    }
};

/// Accepts `histogram`, `lbp`, `onnx:<model>` and `import:<features.pfv>`.
inline ExtractorSpec parse_extractor(std::string_view text) {
    auto with_path = [&](std::string_view prefix, ExtractorKind kind) -> std::optional<ExtractorSpec> {
        if (text.substr(0, prefix.size()) != prefix) {
            return std::nullopt;
        }
        auto rest = text.substr(prefix.size());
        if (rest.empty()) {
            throw Error(ErrorKind::InvalidArgument, "extractor '" + std::string(text) + "' needs a path");
        }
        return ExtractorSpec{kind, std::filesystem::path(std::string(rest))};
    };
    if (text == "histogram") {
        return {ExtractorKind::Histogram, {}};
    }
    if (text == "lbp") {
        return {ExtractorKind::Lbp, {}};
    }
    if (auto spec = with_path("onnx:", ExtractorKind::ExternalModel)) {
        return *spec;
    }
    if (auto spec = with_path("import:", ExtractorKind::Import)) {
        return *spec;
    }
    throw Error(ErrorKind::InvalidArgument,
                "unknown extractor '" + std::string(text) + "' (expected histogram, lbp, onnx:<path>, import:<path>)");
}

/// Handcrafted extractors over a batch; output order equals input order.
inline FeatureSet extract_handcrafted(ExtractorKind kind, std::span<const PreparedPatch> patches,
                                      std::span<const std::int32_t> labels, std::size_t threads = 1) {
    if (kind != ExtractorKind::Histogram && kind != ExtractorKind::Lbp) {
        throw Error(ErrorKind::InvalidArgument, "not a handcrafted extractor");
    }
    if (!labels.empty() && labels.size() != patches.size()) {
        throw Error(ErrorKind::ShapeError, "label count does not match patch count");
    }
    auto vectors = parallel_map<std::vector<float>>(patches.size(), threads, [&](std::size_t i) {
        return kind == ExtractorKind::Histogram ? extract_histogram(patches[i]) : extract_lbp(patches[i]);
    });
    FeatureSet set(kind == ExtractorKind::Histogram ? "histogram" : "lbp", 256);
    set.reserve(patches.size());
    for (std::size_t i = 0; i < patches.size(); ++i) {
        set.add({patches[i].patch_id, std::move(vectors[i]), labels.empty() ? kUnlabeled : labels[i]});
    }
    return set;
}

// --- inference models ---------------------------------------------------------

/// Input/output contract of a loaded network.
struct ModelSignature {
    std::size_t channels = 3;
    std::size_t height = 224;
    std::size_t width = 224;
    std::size_t output_dim = 0;
    std::string layer_name; ///< recorded in the extractor id
};

/**
 * A forward-only network. `forward` receives a contiguous NCHW float batch
 * and returns batch x output_dim activations, row-major.
 */
class InferenceModel {
public:
    virtual ~InferenceModel() = default;
    virtual ModelSignature signature() const = 0;
    virtual std::vector<float> forward(std::span<const float> batch_nchw, std::size_t batch) const = 0;
};

/// Name of the CMake option that enables a compiled-in inference backend.
inline constexpr std::string_view kInferenceBackendFlag = "PATHBENCH_WITH_ONNXRUNTIME";

/**
 * Loads a model with the compiled-in backend. No backend ships with this
 * build, so this always raises BackendUnavailable; callers with their own
 * runtime implement `InferenceModel` and use the overload below.
 */
inline std::unique_ptr<InferenceModel> load_inference_model(const std::filesystem::path& model_path) {
    throw Error(ErrorKind::BackendUnavailable,
                "cannot load '" + model_path.string() + "': no inference backend compiled in (configure with -D" +
                    std::string(kInferenceBackendFlag) + "=ON)");
}

/**
 * Runs `model` over prepared grayscale patches, replicating the single
 * channel to however many channels the model expects, and returns one
 * vector of the model's output dimension per patch, in input order.
 */
inline FeatureSet extract_external(const InferenceModel& model, std::span<const PreparedPatch> patches,
                                   std::span<const std::int32_t> labels = {}, std::size_t batch_size = 16) {
    const ModelSignature sig = model.signature();
    if (sig.output_dim == 0 || sig.channels == 0) {
        throw Error(ErrorKind::ShapeError, "model declares an empty input or output");
    }
    if (!labels.empty() && labels.size() != patches.size()) {
        throw Error(ErrorKind::ShapeError, "label count does not match patch count");
    }
    if (batch_size == 0) {
        throw Error(ErrorKind::InvalidArgument, "batch size must be >= 1");
    }
    const std::size_t plane = sig.height * sig.width;
    for (const auto& p : patches) {
        if (p.side != sig.height || p.side != sig.width || p.values.size() != plane) {
            throw Error(ErrorKind::ShapeError, "patch '" + p.patch_id + "' is " + std::to_string(p.side) + "x" +
                                                   std::to_string(p.side) + " but the model expects " +
                                                   std::to_string(sig.height) + "x" + std::to_string(sig.width));
        }
    }

    std::string id = "onnx";
    if (!sig.layer_name.empty()) {
        id += ":" + sig.layer_name;
    }
    FeatureSet set(id, sig.output_dim);
    set.reserve(patches.size());

    std::vector<float> input;
    for (std::size_t start = 0; start < patches.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, patches.size() - start);
        input.assign(n * sig.channels * plane, 0.0f);
        for (std::size_t b = 0; b < n; ++b) {
            const auto& src = patches[start + b].values;
            for (std::size_t ch = 0; ch < sig.channels; ++ch) {
                std::copy(src.begin(), src.end(), input.begin() + static_cast<std::ptrdiff_t>((b * sig.channels + ch) * plane));
            }
        }
        const auto output = model.forward(input, n);
        if (output.size() != n * sig.output_dim) {
            throw Error(ErrorKind::ShapeError, "model returned " + std::to_string(output.size()) +
                                                   " values for a batch expecting " +
                                                   std::to_string(n * sig.output_dim));
        }
        for (std::size_t b = 0; b < n; ++b) {
            const auto first = output.begin() + static_cast<std::ptrdiff_t>(b * sig.output_dim);
            set.add({patches[start + b].patch_id, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(sig.output_dim)),
                     labels.empty() ? kUnlabeled : labels[start + b]});
        }
    }
    return set;
}

inline FeatureSet extract_external(const std::filesystem::path& model_path, std::span<const PreparedPatch> patches,
                                   std::span<const std::int32_t> labels = {}) {
    const auto model = load_inference_model(model_path);
    return extract_external(*model, patches, labels);
}

/**
 * Pulls vectors for the requested patch ids out of an imported feature file,
 * in the requested order, applying `labels` when given.
 */
inline FeatureSet select_imported(const FeatureSet& imported, std::span<const std::string> patch_ids,
                                  std::span<const std::int32_t> labels = {}) {
    if (!labels.empty() && labels.size() != patch_ids.size()) {
        throw Error(ErrorKind::ShapeError, "label count does not match id count");
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < imported.size(); ++i) {
        index.emplace(imported[i].patch_id, i);
    }
    FeatureSet out(imported.extractor_id(), imported.dim());
    out.reserve(patch_ids.size());
    for (std::size_t i = 0; i < patch_ids.size(); ++i) {
        auto it = index.find(patch_ids[i]);
        if (it == index.end()) {
            throw Error(ErrorKind::MissingLabel, "imported feature file has no vector for '" + patch_ids[i] + "'");
        }
        FeatureVector v = imported[it->second];
        if (!labels.empty()) {
            v.label = labels[i];
        }
        out.add(std::move(v));
    }
    return out;
}

} // namespace pathbench
