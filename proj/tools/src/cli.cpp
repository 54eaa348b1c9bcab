#include "cli.hpp"

#include "config.hpp"
#include "image_io.hpp"

#include <pathbench/pathbench.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;

namespace pathbench::cli {

namespace {

// --- helpers ------------------------------------------------------------------

/// `target` expressed relative to `base_dir`, with forward slashes.
std::string relative_to(const fs::path& target, const fs::path& base_dir) {
    const fs::path abs_target = fs::weakly_canonical(fs::absolute(target));
    const fs::path abs_base = fs::weakly_canonical(fs::absolute(base_dir.empty() ? fs::path(".") : base_dir));
    return abs_target.lexically_relative(abs_base).generic_string();
}

fs::path parent_or_dot(const fs::path& p) {
    return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

/// Same records with paths rewritten to resolve from `new_dir`.
DatasetManifest rebase(const DatasetManifest& manifest, const fs::path& new_dir) {
    std::vector<PatchRecord> records = manifest.records();
    for (auto& r : records) {
        r.path = relative_to(manifest.resolve(r), new_dir);
    }
    return DatasetManifest(std::move(records), manifest.classes(), new_dir);
}

Split split_or_throw(const std::string& text) {
    try {
        return parse_split(text);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot write " + path.string());
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }
}

// --- stages -------------------------------------------------------------------

struct TileOptions {
    std::string input;
    int class_id = -1;
    std::string out_dir;
    std::string manifest_out;
    std::string split = "train";
    std::string scan_id;
    TilerConfig tiler;
};

void run_tile(const TileOptions& o, std::ostream& err) {
    const Split split = split_or_throw(o.split);
    if (o.class_id < 0) {
        throw UsageError("--class must be >= 0");
    }
    o.tiler.validate();

    const std::string scan_id = o.scan_id.empty() ? fs::path(o.input).stem().string() : o.scan_id;
    const ScanImage scan = io::read_scan(o.input, scan_id);
    const auto kept = select_patches(scan, o.tiler);

    fs::create_directories(o.out_dir);
    const fs::path manifest_dir = parent_or_dot(o.manifest_out);

    std::vector<PatchRecord> records;
    for (const auto& patch : kept) {
        const RawPatch white = whiten_background(patch, o.tiler.bg_threshold);
        const std::string id = patch_name(scan_id, patch.grid_row, patch.grid_col);
        const fs::path file = fs::path(o.out_dir) / (id + ".png");
        io::write_gray_png(file, white.side, white.side, white.pixels);
        records.push_back({id, o.class_id, split, patch.grid_row, patch.grid_col, relative_to(file, manifest_dir)});
    }

    const auto grid = tile_grid(scan.width, scan.height, o.tiler.patch_size).size();
    err << "tile: " << scan_id << ": kept " << kept.size() << " of " << grid << " patches\n";
    if (kept.empty()) {
        err << "warning: no patches kept for " << scan_id << "\n";
    }
    save_manifest(o.manifest_out, DatasetManifest(std::move(records), {o.class_id}, manifest_dir));
}

struct SampleOptions {
    std::string manifest;
    std::size_t n = 100;
    std::uint64_t seed = 42;
    std::string out;
};

DatasetManifest sample_to(const DatasetManifest& manifest, std::size_t n, std::uint64_t seed, const fs::path& out,
                          std::ostream& err) {
    std::vector<std::string> warnings;
    const auto sampled = sample_per_class(manifest, n, seed, &warnings);
    for (const auto& w : warnings) {
        err << "warning: " << w << "\n";
    }
    auto rebased = rebase(sampled, parent_or_dot(out));
    save_manifest(out, rebased);
    return rebased;
}

void run_sample(const SampleOptions& o, std::ostream& err) {
    sample_to(load_manifest(o.manifest), o.n, o.seed, o.out, err);
}

struct ExtractOptions {
    std::string manifest;
    std::string extractor = "lbp";
    std::string out;
    std::string split = "all";
    std::size_t resize_to = 224;
    bool l2_normalize = false;
    std::string dump_prepared;
    std::size_t threads = 1;
};

std::vector<PatchRecord> select_split(const DatasetManifest& manifest, const std::string& split) {
    if (split == "all") {
        return manifest.records();
    }
    return manifest.split_records(split_or_throw(split));
}

FeatureSet extract_records(const DatasetManifest& manifest, const std::vector<PatchRecord>& records,
                           const ExtractOptions& o) {
    const ExtractorSpec spec = parse_extractor(o.extractor);

    std::vector<std::string> ids;
    std::vector<std::int32_t> labels;
    for (const auto& r : records) {
        ids.push_back(r.patch_id);
        labels.push_back(r.class_id);
    }

    FeatureSet features;
    if (spec.kind == ExtractorKind::Import) {
        features = select_imported(read_features(spec.path), ids, labels);
    } else {
        // Resolve the backend before touching any patch file.
        std::unique_ptr<InferenceModel> model;
        if (spec.kind == ExtractorKind::ExternalModel) {
            model = load_inference_model(spec.path);
        }
        if (o.resize_to == 0) {
            throw UsageError("--resize-to must be >= 1");
        }
        const auto prepared = parallel_map<PreparedPatch>(records.size(), o.threads, [&](std::size_t i) {
            const auto img = io::read_gray(manifest.resolve(records[i]));
            if (img.width != img.height) {
                throw Error(ErrorKind::ShapeError, "patch " + manifest.resolve(records[i]).string() + " is not square");
            }
            return prepare(img.pixels, img.width, o.resize_to, records[i].patch_id);
        });

        if (!o.dump_prepared.empty()) {
            FeatureSet raw("prepared:" + std::to_string(o.resize_to), o.resize_to * o.resize_to);
            for (std::size_t i = 0; i < prepared.size(); ++i) {
                raw.add({prepared[i].patch_id, prepared[i].values, labels[i]});
            }
            write_features(raw, o.dump_prepared);
        }

        if (model) {
            features = extract_external(*model, prepared, labels);
        } else {
            features = extract_handcrafted(spec.kind, prepared, labels, o.threads);
        }
    }
    if (o.l2_normalize) {
        features = l2_normalize(features);
    }
    return features;
}

void run_extract(const ExtractOptions& o, std::ostream& err) {
    const auto manifest = load_manifest(o.manifest);
    const auto records = select_split(manifest, o.split);
    const auto features = extract_records(manifest, records, o);
    write_features(features, o.out);
    err << "extract: " << features.size() << " vectors of dim " << features.dim() << " (" << features.extractor_id()
        << ")\n";
}

struct TrainOptions {
    std::string features;
    std::string out;
    SvmParams svm;
    std::size_t threads = 1;
};

LinearSvmModel train_to(const FeatureSet& train, const SvmParams& params, std::size_t threads, const fs::path& out,
                        std::ostream& err) {
    const auto result = train_ovr(train, params, threads);
    save_model(result.model, out);
    std::size_t unconverged = 0;
    for (const auto& c : result.report.per_class) {
        if (!c.converged) {
            ++unconverged;
            err << "warning: class " << c.class_id << " reached max-iter (" << c.iterations << " epochs)\n";
        }
    }
    err << "train: " << result.model.classes.size() << " classes, " << train.size() << " vectors, "
        << result.report.wall_seconds << " s";
    if (unconverged) {
        err << ", " << unconverged << " not converged";
    }
    err << "\n";
    return result.model;
}

void run_train(const TrainOptions& o, std::ostream& err) {
    train_to(read_features(o.features), o.svm, o.threads, o.out, err);
}

struct ClassifyOptions {
    std::string features;
    std::string out;
    std::string model;
    std::string index;
    std::size_t k = 1;
    std::string metric = "euclidean";
    std::size_t threads = 1;
};

void run_classify(const ClassifyOptions& o, std::ostream& /*err*/) {
    if (o.model.empty() == o.index.empty()) {
        throw UsageError("classify needs exactly one of --model or --index");
    }
    const auto queries = read_features(o.features);
    PredictionSet preds;
    if (!o.model.empty()) {
        preds = predict(load_model(o.model), queries);
    } else {
        const auto index = build_index(read_features(o.index), parse_metric(o.metric));
        preds = classify_knn(index, queries, o.k, o.threads);
    }
    save_predictions(o.out, preds);
}

struct RetrieveOptions {
    std::string index;
    std::string queries;
    std::size_t k = 5;
    std::string metric = "euclidean";
    std::string out;
    std::size_t threads = 1;
};

void run_retrieve(const RetrieveOptions& o, std::ostream& out) {
    const auto index = build_index(read_features(o.index), parse_metric(o.metric));
    const auto queries = read_features(o.queries);
    const auto results = query_all(index, queries, o.k, o.threads);
    if (o.out.empty()) {
        write_neighbors(out, queries, results);
    } else {
        auto file = open_out(o.out);
        write_neighbors(file, queries, results);
    }
}

struct EvaluateOptions {
    std::string predictions;
    std::string manifest;
    std::string out;
    bool eta_w_literal = false;
};

void run_evaluate(const EvaluateOptions& o, std::ostream& out, std::ostream& err) {
    const auto manifest = load_manifest(o.manifest);
    const auto r = report(load_predictions(o.predictions), manifest, o.eta_w_literal);
    if (o.out.empty()) {
        out << to_json(r);
    } else {
        write_text(o.out, to_json(r));
    }
    err << "evaluate: n_tot=" << r.n_tot << " eta_p=" << r.eta_p << " eta_w=" << r.eta_w << " eta_total=" << r.eta_total
        << "\n";
}

struct BenchOptions {
    std::string manifest;
    std::string work_dir;
    std::size_t n = 100;
    std::uint64_t seed = 42;
    std::string extractor = "lbp";
    std::size_t resize_to = 224;
    bool l2_normalize = false;
    SvmParams svm;
    std::string method = "svm";
    std::size_t k = 1;
    std::string metric = "euclidean";
    std::size_t threads = 1;
};

void run_bench(const BenchOptions& o, std::ostream& err) {
    if (o.method != "svm" && o.method != "knn") {
        throw UsageError("--method must be 'svm' or 'knn'");
    }
    const fs::path dir(o.work_dir);
    fs::create_directories(dir);

    const auto sampled = sample_to(load_manifest(o.manifest), o.n, o.seed, dir / "sampled.tsv", err);

    ExtractOptions eo;
    eo.extractor = o.extractor;
    eo.resize_to = o.resize_to;
    eo.l2_normalize = o.l2_normalize;
    eo.threads = o.threads;
    const auto train = extract_records(sampled, sampled.split_records(Split::Train), eo);
    const auto test = extract_records(sampled, sampled.split_records(Split::Test), eo);
    write_features(train, dir / "train.pfv");
    write_features(test, dir / "test.pfv");

    PredictionSet preds;
    if (o.method == "svm") {
        SvmParams p = o.svm;
        p.seed = o.seed;
        const auto model = train_to(train, p, o.threads, dir / "model.json", err);
        preds = predict(model, test);
    } else {
        preds = classify_knn(build_index(train, parse_metric(o.metric)), test, o.k, o.threads);
    }
    save_predictions(dir / "predictions.tsv", preds);

    const auto r = report(preds, sampled);
    write_text(dir / "report.json", to_json(r));
    err << "bench: eta_p=" << r.eta_p << " eta_w=" << r.eta_w << " eta_total=" << r.eta_total << "\n";
}

// --- command-line wiring ------------------------------------------------------

void add_threads(CLI::App* sub, std::size_t& threads) {
    sub->add_option("--threads", threads, "Worker threads (1 = reference behaviour)")
        ->envname("PATHBENCH_THREADS")
        ->check(CLI::PositiveNumber);
}

void add_svm(CLI::App* sub, SvmParams& p, bool with_seed) {
    sub->add_option("--C", p.C, "SVM penalty")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--tol", p.tol, "Projected-gradient tolerance")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", p.max_iter, "Maximum epochs per class")->capture_default_str()->check(CLI::PositiveNumber);
    if (with_seed) {
        sub->add_option("--seed", p.seed, "Coordinate-order seed")->capture_default_str();
    }
}

std::set<std::string> option_keys(const CLI::App* sub) {
    std::set<std::string> keys;
    for (const auto* opt : sub->get_options()) {
        for (const auto& name : opt->get_lnames()) {
            if (name != "help") {
                keys.insert(name);
            }
        }
    }
    return keys;
}

/// Removes `--config <file>` / `--config=<file>` from args, returning the file.
std::optional<std::string> take_config_flag(std::vector<std::string>& args) {
    std::optional<std::string> path;
    for (std::size_t i = 0; i < args.size();) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) {
                throw UsageError("--config needs a file name");
            }
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
            ++i;
        }
    }
    return path;
}

} // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"pathbench: histopathology patch tiling, features, linear SVM, retrieval and evaluation", "pathbench"};
    app.require_subcommand(1);

    TileOptions tile;
    auto* tile_cmd = app.add_subcommand("tile", "Tile a grayscale scan into selected patches");
    tile_cmd->add_option("--input", tile.input, "Scan image (PNG or TIFF)")->required();
    tile_cmd->add_option("--class", tile.class_id, "Class id of the scan")->required();
    tile_cmd->add_option("--out-dir", tile.out_dir, "Directory for patch PNGs")->required();
    tile_cmd->add_option("--manifest-out", tile.manifest_out, "Manifest TSV to write")->required();
    tile_cmd->add_option("--patch-size", tile.tiler.patch_size, "Patch side in pixels")->capture_default_str();
    tile_cmd->add_option("--bg-threshold", tile.tiler.bg_threshold, "Background brightness cutoff")->capture_default_str();
    tile_cmd->add_option("--homogeneity-max", tile.tiler.homogeneity_max, "Maximum background fraction kept")
        ->capture_default_str();
    tile_cmd->add_flag("--invert-homogeneity", tile.tiler.invert_homogeneity,
                       "Keep patches with background fraction >= homogeneity-max instead");
    tile_cmd->add_option("--split", tile.split, "train or test")->capture_default_str();
    tile_cmd->add_option("--scan-id", tile.scan_id, "Scan id (default: input file stem)");

    SampleOptions sample;
    auto* sample_cmd = app.add_subcommand("sample", "Sample at most n train patches per class");
    sample_cmd->add_option("--manifest", sample.manifest, "Input manifest")->required();
    sample_cmd->add_option("--n", sample.n, "Train patches per class")->capture_default_str();
    sample_cmd->add_option("--seed", sample.seed, "Sampling seed")->capture_default_str();
    sample_cmd->add_option("--out", sample.out, "Output manifest")->required();

    ExtractOptions extract;
    auto* extract_cmd = app.add_subcommand("extract", "Extract feature vectors for manifest patches");
    extract_cmd->add_option("--manifest", extract.manifest, "Input manifest")->required();
    extract_cmd->add_option("--extractor", extract.extractor, "histogram | lbp | onnx:<model> | import:<file.pfv>")
        ->capture_default_str();
    extract_cmd->add_option("--out", extract.out, "PFV1 feature file")->required();
    extract_cmd->add_option("--split", extract.split, "train | test | all")->capture_default_str();
    extract_cmd->add_option("--resize-to", extract.resize_to, "Prepared patch side")->capture_default_str();
    extract_cmd->add_flag("--l2-normalize", extract.l2_normalize, "Scale vectors to unit length");
    extract_cmd->add_option("--dump-prepared", extract.dump_prepared, "Also write prepared patches as PFV1");
    add_threads(extract_cmd, extract.threads);

    TrainOptions train;
    auto* train_cmd = app.add_subcommand("train", "Train a one-vs-rest linear SVM");
    train_cmd->add_option("--features", train.features, "Labeled PFV1 training features")->required();
    train_cmd->add_option("--out", train.out, "PSM1 model file")->required();
    add_svm(train_cmd, train.svm, true);
    add_threads(train_cmd, train.threads);

    ClassifyOptions classify;
    auto* classify_cmd = app.add_subcommand("classify", "Predict classes with an SVM model or k-NN index");
    classify_cmd->add_option("--features", classify.features, "PFV1 features to classify")->required();
    classify_cmd->add_option("--out", classify.out, "Predictions TSV")->required();
    classify_cmd->add_option("--model", classify.model, "PSM1 model file");
    classify_cmd->add_option("--index", classify.index, "Labeled PFV1 file for k-NN voting");
    classify_cmd->add_option("--k", classify.k, "Neighbours for k-NN")->capture_default_str()->check(CLI::PositiveNumber);
    classify_cmd->add_option("--metric", classify.metric, "euclidean | cosine")->capture_default_str();
    add_threads(classify_cmd, classify.threads);

    RetrieveOptions retrieve;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "Exact nearest-neighbour retrieval");
    retrieve_cmd->add_option("--index", retrieve.index, "Labeled PFV1 file to search")->required();
    retrieve_cmd->add_option("--queries", retrieve.queries, "PFV1 query features")->required();
    retrieve_cmd->add_option("--k", retrieve.k, "Neighbours per query")->capture_default_str()->check(CLI::PositiveNumber);
    retrieve_cmd->add_option("--metric", retrieve.metric, "euclidean | cosine")->capture_default_str();
    retrieve_cmd->add_option("--out", retrieve.out, "Neighbour TSV (default: standard output)");
    add_threads(retrieve_cmd, retrieve.threads);

    EvaluateOptions evaluate;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score predictions against the test split");
    evaluate_cmd->add_option("--predictions", evaluate.predictions, "Predictions TSV")->required();
    evaluate_cmd->add_option("--manifest", evaluate.manifest, "Manifest with the test split")->required();
    evaluate_cmd->add_option("--out", evaluate.out, "Report JSON (default: standard output)");
    evaluate_cmd->add_flag("--eta-w-literal", evaluate.eta_w_literal,
                           "Also report the unnormalized whole-scan sum");

    BenchOptions bench;
    auto* bench_cmd = app.add_subcommand("bench", "sample -> extract -> train -> classify -> evaluate");
    bench_cmd->add_option("--manifest", bench.manifest, "Input manifest")->required();
    bench_cmd->add_option("--work-dir", bench.work_dir, "Directory for all artifacts")->required();
    bench_cmd->add_option("--n", bench.n, "Train patches per class")->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed, "Seed for sampling and training")->capture_default_str();
    bench_cmd->add_option("--extractor", bench.extractor, "histogram | lbp | onnx:<model> | import:<file.pfv>")
        ->capture_default_str();
    bench_cmd->add_option("--resize-to", bench.resize_to, "Prepared patch side")->capture_default_str();
    bench_cmd->add_flag("--l2-normalize", bench.l2_normalize, "Scale vectors to unit length");
    add_svm(bench_cmd, bench.svm, false);
    bench_cmd->add_option("--method", bench.method, "svm | knn")->capture_default_str();
    bench_cmd->add_option("--k", bench.k, "Neighbours for knn")->capture_default_str()->check(CLI::PositiveNumber);
    bench_cmd->add_option("--metric", bench.metric, "euclidean | cosine")->capture_default_str();
    add_threads(bench_cmd, bench.threads);

    app.add_subcommand("version", "Print the version");

    std::vector<std::string> args = raw_args;
    try {
        std::optional<std::string> config_path = take_config_flag(args);
        if (!config_path) {
            if (const char* env = std::getenv("PATHBENCH_CONFIG"); env && *env) {
                config_path = env;
            }
        }
        if (config_path && !args.empty()) {
            std::set<std::string> all_keys;
            CLI::App* chosen = nullptr;
            for (auto* sub : app.get_subcommands({})) {
                const auto keys = option_keys(sub);
                all_keys.insert(keys.begin(), keys.end());
                if (sub->get_name() == args.front()) {
                    chosen = sub;
                }
            }
            if (chosen) {
                std::set<std::string> env_overridden;
                if (const char* env = std::getenv("PATHBENCH_THREADS"); env && *env) {
                    env_overridden.insert("threads");
                }
                args = apply_config(args, load_config(*config_path), option_keys(chosen), all_keys, env_overridden);
            }
        }

        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "pathbench: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "pathbench: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (app.got_subcommand("version")) {
            out << "pathbench " << kVersion << "\n";
        } else if (app.got_subcommand(tile_cmd)) {
            run_tile(tile, err);
        } else if (app.got_subcommand(sample_cmd)) {
            run_sample(sample, err);
        } else if (app.got_subcommand(extract_cmd)) {
            run_extract(extract, err);
        } else if (app.got_subcommand(train_cmd)) {
            run_train(train, err);
        } else if (app.got_subcommand(classify_cmd)) {
            run_classify(classify, err);
        } else if (app.got_subcommand(retrieve_cmd)) {
            run_retrieve(retrieve, out);
        } else if (app.got_subcommand(evaluate_cmd)) {
            run_evaluate(evaluate, out, err);
        } else if (app.got_subcommand(bench_cmd)) {
            run_bench(bench, err);
        }
    } catch (const UsageError& e) {
        err << "pathbench: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "pathbench: error: " << e.what() << "\n";
        return e.kind() == ErrorKind::BackendUnavailable ? kExitBackend : kExitData;
    } catch (const std::exception& e) {
        err << "pathbench: error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}

} // namespace pathbench::cli
