#include "bombus/interface.hpp"

#include "bombus/augment.hpp"
#include "bombus/ensemble.hpp"
#include "bombus/error.hpp"
#include "bombus/eval.hpp"
#include "bombus/model_json.hpp"
#include "bombus/sha256.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

namespace bombus::interface {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string config;
    std::vector<std::string> sets;
    std::string output;
};

void add_common(CLI::App& app, CommonOptions& options) {
    app.add_option("--config", options.config, "Experiment config (JSON)");
    app.add_option("--set", options.sets, "Override a config key, e.g. model.train.epochs=1");
    app.add_option("--output", options.output, "Output directory (overrides the config)");
}

ExperimentConfig resolve_config(const CommonOptions& options) {
    ExperimentConfig config;
    if (!options.config.empty()) {
        config = parse_config(options.config, options.sets);
    } else {
        json document = json::object();
        for (const auto& assignment : options.sets) {
            apply_override(document, assignment);
        }
        config = config_from_json(std::move(document), fs::current_path());
    }
    if (!options.output.empty()) {
        config.output = fs::absolute(options.output).string();
    }
    return config;
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("unwritable_output", "cannot write " + path.string());
    }
    out << text;
    if (!out) {
        throw Error("unwritable_output", "failed writing " + path.string());
    }
}

// Creates <output>/<command>/ and drops the resolved config beside the artifacts.
fs::path stage_dir(const ExperimentConfig& config, const std::string& command) {
    const auto dir = config.resolve(config.output) / command;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error("unwritable_output", "cannot create " + dir.string() + ": " + ec.message());
    }
    write_text(dir / "config.json", serialize_config(config));
    return dir;
}

fs::path output_root(const ExperimentConfig& config) {
    return config.resolve(config.output);
}

// Rewrites record paths so they stay valid from a manifest saved in `dir`.
dataset::DatasetManifest relocate(const dataset::DatasetManifest& manifest, const fs::path& dir) {
    auto out = manifest;
    const auto target = fs::absolute(dir);
    for (auto& record : out.records) {
        const auto resolved = fs::absolute(manifest.resolve(record)).lexically_normal();
        record.path = resolved.lexically_relative(target).generic_string();
    }
    out.base_dir = dir;
    return out;
}

bool is_image(const fs::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) {
        return files;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image(entry.path())) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<std::string> list_class_dirs(const fs::path& root) {
    if (!fs::is_directory(root)) {
        throw Error("missing_file", "dataset root " + root.string() + " is not a directory");
    }
    std::vector<std::string> labels;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) {
            labels.push_back(entry.path().filename().string());
        }
    }
    std::sort(labels.begin(), labels.end());
    return labels;
}

// Manifest lookup: explicit flag, then the config, then earlier stages' output.
fs::path find_manifest(const ExperimentConfig& config, const std::string& flag, bool prefer_augmented) {
    if (!flag.empty()) {
        return flag;
    }
    if (config.dataset.manifest) {
        return config.resolve(*config.dataset.manifest);
    }
    const auto root = output_root(config);
    if (prefer_augmented && fs::exists(root / "augment" / "manifest.jsonl")) {
        return root / "augment" / "manifest.jsonl";
    }
    if (fs::exists(root / "dataset" / "manifest.jsonl")) {
        return root / "dataset" / "manifest.jsonl";
    }
    throw Error("missing_file", "no manifest: set dataset.manifest or run `dataset build` first");
}

fs::path find_model(const ExperimentConfig& config, const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("BOMBUS_MODEL_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return output_root(config) / "train" / "model";
}

std::string top_k_json(const std::vector<ensemble::TopKPrediction>& predictions) {
    json out = json::array();
    for (const auto& p : predictions) {
        json ranked = json::array();
        for (std::size_t i = 0; i < p.ranked_labels.size(); ++i) {
            ranked.push_back(json{{"label", p.ranked_labels[i]}, {"score", p.scores[i]}});
        }
        out.push_back(json{{"image_id", p.image_id}, {"predictions", ranked}});
    }
    return out.dump(2) + "\n";
}

int top_k_width(const dataset::ClassCatalog& catalog) {
    return std::min<int>(3, static_cast<int>(catalog.size()));
}

// Labelled pool per class (train + validation originals), used for the
// count-correlation series.
std::map<std::string, std::int64_t> training_counts(const dataset::DatasetManifest& manifest) {
    std::map<std::string, std::int64_t> counts;
    for (const auto& label : manifest.catalog.labels()) {
        counts[label] = 0;
    }
    for (const auto& r : manifest.records) {
        if (r.source != dataset::Source::augmented &&
            (r.split == dataset::Split::train || r.split == dataset::Split::validation)) {
            ++counts[r.label];
        }
    }
    return counts;
}

// dataset build ---------------------------------------------------------------

void add_images(dataset::DatasetManifest& manifest, const fs::path& images_dir, const fs::path& source_dir,
                const std::string& label, const std::string& id_prefix, dataset::Split split,
                dataset::Source source, dataset::Geometry geometry) {
    for (const auto& file : list_images(source_dir)) {
        dataset::ImageRecord record;
        record.id = id_prefix + file.stem().string();
        record.path = "images/" + record.id + ".png";
        record.label = label;
        record.split = split;
        record.source = source;
        dataset::write_png(dataset::load_standardized(file, geometry), images_dir / (record.id + ".png"));
        manifest.records.push_back(std::move(record));
    }
}

int cmd_dataset_build(const ExperimentConfig& config, std::ostream& out) {
    const auto& ds = config.dataset;
    const auto dir = stage_dir(config, "dataset");
    dataset::DatasetManifest manifest;
    if (ds.root) {
        const auto root = config.resolve(*ds.root);
        auto labels = ds.labels.empty() ? list_class_dirs(root) : ds.labels;
        if (ds.negative_label && std::find(labels.begin(), labels.end(), *ds.negative_label) == labels.end()) {
            labels.push_back(*ds.negative_label);
        }
        manifest.catalog = dataset::ClassCatalog(labels, ds.negative_label);
        manifest.seed = ds.seed;
        manifest.base_dir = dir;
        const dataset::Geometry geometry{ds.geometry, ds.geometry};
        for (const auto& label : labels) {
            if (ds.negative_label && label == *ds.negative_label) {
                continue;
            }
            add_images(manifest, dir / "images", root / label, label, label + "/", dataset::Split::unassigned,
                       dataset::Source::target, geometry);
            if (ds.test_root) {
                add_images(manifest, dir / "images", config.resolve(*ds.test_root) / label, label,
                           "test/" + label + "/", dataset::Split::test, dataset::Source::target, geometry);
            }
        }
        if (ds.negatives) {
            dataset::DatasetManifest negatives;
            negatives.base_dir = dir;
            add_images(negatives, dir / "images", config.resolve(*ds.negatives), *ds.negative_label,
                       *ds.negative_label + "/", dataset::Split::unassigned, dataset::Source::negative, geometry);
            manifest = dataset::inject_negative_class(manifest, negatives.records);
        }
    } else if (ds.manifest) {
        manifest = relocate(dataset::load_manifest(config.resolve(*ds.manifest)), dir);
    } else {
        throw Error("invalid_config", "dataset build needs dataset.root or dataset.manifest");
    }

    manifest = dataset::split(manifest, ds.train_fraction, ds.seed);
    const auto summary = dataset::validate(manifest);
    dataset::save_manifest(manifest, dir / "manifest.jsonl");

    json per_split = json::object();
    for (const auto split : {dataset::Split::train, dataset::Split::validation, dataset::Split::test}) {
        const auto counts = dataset::class_counts(manifest, split);
        json by_label = json::object();
        for (std::size_t i = 0; i < counts.size(); ++i) {
            by_label[manifest.catalog.label(i)] = counts[i];
        }
        per_split[std::string(dataset::to_string(split))] = by_label;
    }
    const json report{{"records", manifest.records.size()},
                      {"classes", manifest.catalog.size()},
                      {"counts", summary.counts},
                      {"splits", per_split},
                      {"empty_classes", summary.empty_classes}};
    write_text(dir / "summary.json", report.dump(2) + "\n");
    out << (dir / "manifest.jsonl").string() << "\n";
    return 0;
}

// augment ---------------------------------------------------------------------

int cmd_augment(ExperimentConfig config, const std::string& manifest_flag, std::ostream& out) {
    if (!config.augmentation) {
        config.augmentation = augment::default_policy(config.seed);
    }
    const auto source = find_manifest(config, manifest_flag, false);
    const auto dir = stage_dir(config, "augment");
    const auto manifest = dataset::load_manifest(source);
    augment::AugmentedSetOptions options;
    options.geometry = {config.dataset.geometry, config.dataset.geometry};
    const auto augmented = augment::build_augmented_set(manifest, *config.augmentation, options);
    dataset::save_manifest(relocate(augmented, dir), dir / "manifest.jsonl");
    const auto added = augmented.records.size() - manifest.records.size();
    write_text(dir / "summary.json", json{{"source", source.string()},
                                          {"augmented", added},
                                          {"policy", to_json(*config.augmentation)}}
                                             .dump(2) + "\n");
    out << (dir / "manifest.jsonl").string() << "\n";
    return 0;
}

// train -----------------------------------------------------------------------

int cmd_train(const ExperimentConfig& config, const std::string& manifest_flag, std::ostream& out) {
    const auto& m = config.model;
    const auto source = find_manifest(config, manifest_flag, m.train.use_augmented);
    const auto dir = stage_dir(config, "train");
    auto manifest = dataset::load_manifest(source);
    manifest = dataset::split(manifest, m.train.train_fraction, config.dataset.seed);

    const auto built = model::build_model(m.backbone, m.head, m.init_seed);
    model::TrainOptions options;
    options.provenance = serialize_config(config);
    options.on_epoch = [&out](int epoch, const model::EpochRecord& record) {
        json line{{"epoch", epoch}, {"train_loss", record.train_loss}, {"train_accuracy", record.train_accuracy}};
        if (record.val_loss) {
            line["val_loss"] = *record.val_loss;
            line["val_accuracy"] = *record.val_accuracy;
        }
        out << line.dump() << "\n";
    };
    const auto trained = model::train(built, manifest, m.train, m.optimizer, options);
    model::save_model(trained, dir / "model");
    write_text(dir / "history.json", model::to_json(trained.history).dump(2) + "\n");
    return 0;
}

// predict ---------------------------------------------------------------------

struct PredictInputs {
    std::vector<std::string> ids;
    std::vector<fs::path> paths;
    std::optional<eval::TruthMap> truth;
};

PredictInputs collect_inputs(const ExperimentConfig& config, const std::vector<std::string>& images,
                             const std::string& manifest_flag, const std::string& split_name) {
    PredictInputs inputs;
    if (!images.empty()) {
        std::set<std::string> seen;
        for (const auto& image : images) {
            const fs::path path(image);
            auto id = path.filename().string();
            if (!seen.insert(id).second) {
                id = path.generic_string();
            }
            inputs.ids.push_back(id);
            inputs.paths.push_back(path);
        }
        return inputs;
    }
    const auto manifest = dataset::load_manifest(find_manifest(config, manifest_flag, false));
    const auto split = dataset::parse_split(split_name);
    for (const auto& record : manifest.records) {
        if (record.split == split && record.source != dataset::Source::augmented) {
            inputs.ids.push_back(record.id);
            inputs.paths.push_back(manifest.resolve(record));
        }
    }
    if (inputs.ids.empty()) {
        throw Error("empty_input", "the manifest has no " + split_name + " records to predict");
    }
    inputs.truth = eval::truth_from_manifest(manifest, split);
    return inputs;
}

std::vector<dataset::StandardizedImage> load_images(const std::vector<fs::path>& paths, dataset::Geometry geometry) {
    std::vector<dataset::StandardizedImage> images;
    images.reserve(paths.size());
    for (const auto& path : paths) {
        images.push_back(dataset::load_standardized(path, geometry));
    }
    return images;
}

int cmd_predict(const ExperimentConfig& config, const std::string& model_flag, const std::vector<std::string>& images,
                const std::string& manifest_flag, const std::string& split_name, std::ostream& out) {
    const auto model_dir = find_model(config, model_flag);
    const auto inputs = collect_inputs(config, images, manifest_flag, split_name);
    const auto dir = stage_dir(config, "predict");
    const auto trained = model::load_model(model_dir);
    const auto standardized = load_images(inputs.paths, trained.backbone->spec().input_geometry);
    const auto matrix = ensemble::predict(trained, inputs.ids, standardized);
    ensemble::write_csv(matrix, dir / "probabilities.csv");
    if (inputs.truth) {
        write_text(dir / "truth.csv", eval::truth_to_csv(*inputs.truth));
    }
    const auto top = ensemble::top_k(ensemble::as_scores(matrix), top_k_width(matrix.catalog));
    const auto text = top_k_json(top);
    write_text(dir / "predictions.json", text);
    if (!images.empty()) {
        out << text;
    }
    return 0;
}

// ensemble --------------------------------------------------------------------

int cmd_ensemble(ExperimentConfig config, const std::vector<std::string>& members_flag, const std::string& mode_flag,
                 const std::string& manifest_flag, std::ostream& out) {
    if (!config.ensemble) {
        config.ensemble = config_from_json(json{{"seed", config.seed}, {"ensemble", json::object()}}).ensemble;
    }
    auto& section = *config.ensemble;
    if (!members_flag.empty()) {
        section.members = members_flag;
    }
    if (!mode_flag.empty()) {
        section.mode = parse_ensemble_mode(mode_flag);
    }
    if (section.members.size() < 2) {
        throw Error("empty_ensemble", "an ensemble needs at least two members");
    }

    if (section.mode == EnsembleMode::softmax_sum) {
        std::vector<ensemble::ProbabilityMatrix> matrices;
        for (const auto& member : section.members) {
            matrices.push_back(ensemble::read_probability_csv(config.resolve(member)));
        }
        for (const auto& m : matrices) {
            if (!m.catalog.same_labels(matrices.front().catalog)) {
                throw Error("catalog_mismatch", "member matrices have different class headers");
            }
        }
        for (auto& m : matrices) {
            m = ensemble::align(m, matrices.front().image_ids);
        }
        const auto dir = stage_dir(config, "ensemble");
        const auto scores = ensemble::sum_softmax(matrices);
        ensemble::write_csv(scores, dir / "composite.csv");
        write_text(dir / "predictions.json", top_k_json(ensemble::top_k(scores, top_k_width(scores.catalog))));
        out << (dir / "composite.csv").string() << "\n";
        return 0;
    }

    std::vector<std::shared_ptr<const model::TrainedModel>> members;
    for (const auto& member : section.members) {
        members.push_back(std::make_shared<const model::TrainedModel>(model::load_model(config.resolve(member))));
    }
    auto manifest = dataset::load_manifest(find_manifest(config, manifest_flag, section.train.use_augmented));
    manifest = dataset::split(manifest, section.train.train_fraction, config.dataset.seed);
    const auto dir = stage_dir(config, "ensemble");
    auto composite = ensemble::build_encoder_composite(members, section.head, section.train.seed);
    ensemble::train_encoder_composite(composite, manifest, section.train, section.optimizer);

    std::vector<std::string> ids;
    std::vector<fs::path> paths;
    for (const auto& record : manifest.records) {
        if (record.split == dataset::Split::test) {
            ids.push_back(record.id);
            paths.push_back(manifest.resolve(record));
        }
    }
    write_text(dir / "history.json", model::to_json(composite.history).dump(2) + "\n");
    if (!ids.empty()) {
        const auto images = load_images(paths, members.front()->backbone->spec().input_geometry);
        const auto matrix = ensemble::predict(composite, ids, images);
        ensemble::write_csv(matrix, dir / "composite.csv");
        write_text(dir / "predictions.json",
                   top_k_json(ensemble::top_k(ensemble::as_scores(matrix), top_k_width(matrix.catalog))));
        out << (dir / "composite.csv").string() << "\n";
    }
    return 0;
}

// evaluate --------------------------------------------------------------------

struct EvaluateFlags {
    std::string matrix;
    std::string truth;
    std::vector<int> k;
    std::optional<std::int64_t> threshold;
    std::string negative_label;
    std::string manifest;
    std::string model_id;
};

int cmd_evaluate(ExperimentConfig config, const EvaluateFlags& flags, std::ostream& out) {
    const auto root = output_root(config);
    if (!flags.k.empty()) {
        config.eval.k = flags.k;
    }
    if (flags.threshold) {
        config.eval.threshold = *flags.threshold;
    }
    if (!flags.negative_label.empty()) {
        config.eval.negative_label = flags.negative_label;
    }

    fs::path matrix_path = flags.matrix;
    if (matrix_path.empty()) {
        matrix_path = fs::exists(root / "ensemble" / "composite.csv") ? root / "ensemble" / "composite.csv"
                                                                      : root / "predict" / "probabilities.csv";
    }
    const auto scores = ensemble::read_scores_csv(matrix_path);

    std::optional<dataset::DatasetManifest> manifest;
    try {
        manifest = dataset::load_manifest(find_manifest(config, flags.manifest, false));
    } catch (const Error& e) {
        if (!flags.manifest.empty() || e.code() != "missing_file") {
            throw;
        }
    }

    eval::TruthMap truth;
    if (!flags.truth.empty()) {
        truth = eval::read_truth_csv(flags.truth);
    } else if (fs::exists(root / "predict" / "truth.csv")) {
        truth = eval::read_truth_csv(root / "predict" / "truth.csv");
    } else if (manifest) {
        truth = eval::truth_from_manifest(*manifest, dataset::Split::test);
    } else {
        throw Error("missing_truth", "no truth labels: pass --truth");
    }

    eval::ReportOptions options;
    options.k_values = config.eval.k;
    options.threshold = config.eval.threshold;
    options.negative_label = config.eval.negative_label;
    if (!options.negative_label && manifest) {
        options.negative_label = manifest->catalog.negative_label();
    }
    if (manifest) {
        options.train_counts = training_counts(*manifest);
    }
    options.model_id = flags.model_id.empty() ? matrix_path.stem().string() : flags.model_id;
    options.provenance = {{"matrix", matrix_path.filename().string()},
                          {"config_sha256", sha256_hex(serialize_config(config))}};

    const auto dir = stage_dir(config, "evaluate");
    const auto report = eval::evaluate(scores, truth, options);
    const auto document = eval::report_to_json(report);
    eval::validate_report_json(document);
    write_text(dir / "report.json", document.dump(2) + "\n");
    if (report.series) {
        eval::write_series(*report.series, dir);
    }
    json summary{{"model_id", report.model_id}, {"evaluated", report.evaluated}};
    for (const auto& entry : report.top_k) {
        summary["top" + std::to_string(entry.k)] = entry.accuracy;
    }
    out << summary.dump() << "\n";
    return 0;
}

// report ----------------------------------------------------------------------

eval::MetricsReport load_report(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("missing_file", "cannot open report " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    const auto document = json::parse(text.str(), nullptr, false);
    if (document.is_discarded()) {
        throw Error("invalid_report", path.string() + ": not valid JSON");
    }
    return eval::report_from_json(document);
}

int cmd_report(ExperimentConfig config, const std::vector<std::string>& report_flags, const std::string& format_flag,
               bool exclude_negative_flag, std::ostream& out) {
    if (exclude_negative_flag) {
        config.eval.exclude_negative = true;
    }
    std::vector<fs::path> paths(report_flags.begin(), report_flags.end());
    if (paths.empty()) {
        paths.push_back(output_root(config) / "evaluate" / "report.json");
    }
    const auto format = eval::parse_report_format(format_flag);
    std::vector<eval::MetricsReport> reports;
    for (const auto& path : paths) {
        reports.push_back(load_report(path));
    }
    const auto dir = stage_dir(config, "report");
    const eval::MarkdownOptions options{config.eval.exclude_negative};
    const std::string extension = format == eval::ReportFormat::json ? ".json" : ".md";
    if (reports.size() == 1) {
        const auto text = eval::render_report(reports.front(), format, options);
        write_text(dir / ("report" + extension), text);
        if (reports.front().series) {
            eval::write_series(*reports.front().series, dir);
        }
        out << text;
        return 0;
    }
    for (const auto& report : reports) {
        const auto sub = dir / report.model_id;
        write_text(sub / ("report" + extension), eval::render_report(report, format, options));
        if (report.series) {
            eval::write_series(*report.series, sub);
        }
    }
    const auto comparison = eval::render_comparison(reports);
    write_text(dir / "comparison.md", comparison);
    out << comparison;
    return 0;
}

// serve -----------------------------------------------------------------------

int cmd_serve(const ExperimentConfig& config, const std::vector<std::string>& model_flags, const std::string& host,
              int port, std::size_t max_body, std::ostream& out) {
    std::vector<fs::path> dirs;
    for (const auto& flag : model_flags) {
        dirs.push_back(config.resolve(flag));
    }
    if (dirs.empty()) {
        dirs.push_back(find_model(config, ""));
    }
    std::string model_id;
    for (const auto& d : dirs) {
        auto name = fs::absolute(d).lexically_normal().filename().string();
        if (name.empty()) {
            name = fs::absolute(d).lexically_normal().parent_path().filename().string();
        }
        model_id += (model_id.empty() ? "" : "+") + name;
    }
    Service service(max_body);
    // Load in the background so requests arriving meanwhile get 503.
    std::thread loader([&service, dirs, model_id] {
        try {
            service.load(dirs, model_id);
        } catch (const Error& e) {
            std::cerr << error_json(e.code(), e.what()) << std::endl;
            std::_Exit(1);
        }
    });
    loader.detach();
    out << json{{"listening", host + ":" + std::to_string(port)}, {"model_id", model_id}}.dump() << std::endl;
    serve(service, host, port, max_body);
    return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bumble bee species classification pipeline", "bombus"};
    app.require_subcommand(1);

    CommonOptions dataset_opts;
    auto* dataset_cmd = app.add_subcommand("dataset", "Dataset preparation");
    dataset_cmd->require_subcommand(1);
    auto* build_cmd = dataset_cmd->add_subcommand("build", "Build, standardize and split the manifest");
    add_common(*build_cmd, dataset_opts);

    CommonOptions augment_opts;
    std::string augment_manifest;
    auto* augment_cmd = app.add_subcommand("augment", "Add augmented siblings to the train split");
    add_common(*augment_cmd, augment_opts);
    augment_cmd->add_option("--manifest", augment_manifest, "Input manifest");

    CommonOptions train_opts;
    std::string train_manifest;
    auto* train_cmd = app.add_subcommand("train", "Train a classification head");
    add_common(*train_cmd, train_opts);
    train_cmd->add_option("--manifest", train_manifest, "Input manifest");

    CommonOptions predict_opts;
    std::string predict_model;
    std::string predict_manifest;
    std::string predict_split = "test";
    std::vector<std::string> predict_images;
    auto* predict_cmd = app.add_subcommand("predict", "Top-3 predictions for images or a manifest split");
    add_common(*predict_cmd, predict_opts);
    predict_cmd->add_option("--model", predict_model, "Model artifact directory (default $BOMBUS_MODEL_DIR)");
    predict_cmd->add_option("--image", predict_images, "Image file(s)");
    predict_cmd->add_option("--manifest", predict_manifest, "Manifest to read the split from");
    predict_cmd->add_option("--split", predict_split, "Split to predict when no images are given");

    CommonOptions ensemble_opts;
    std::vector<std::string> ensemble_members;
    std::string ensemble_mode;
    std::string ensemble_manifest;
    auto* ensemble_cmd = app.add_subcommand("ensemble", "Combine member predictions into a composite");
    add_common(*ensemble_cmd, ensemble_opts);
    ensemble_cmd->add_option("--members", ensemble_members, "Member CSV matrices or model directories");
    ensemble_cmd->add_option("--mode", ensemble_mode, "softmax_sum or encoder_composite");
    ensemble_cmd->add_option("--manifest", ensemble_manifest, "Training manifest (encoder_composite)");

    CommonOptions evaluate_opts;
    EvaluateFlags evaluate_flags;
    std::int64_t threshold = -1;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a probability matrix against truth labels");
    add_common(*evaluate_cmd, evaluate_opts);
    evaluate_cmd->add_option("--matrix", evaluate_flags.matrix, "Probability or composite CSV");
    evaluate_cmd->add_option("--truth", evaluate_flags.truth, "Truth CSV (image_id,label)");
    evaluate_cmd->add_option("--k", evaluate_flags.k, "Top-k values");
    auto* threshold_opt = evaluate_cmd->add_option("--threshold", threshold, "Training-count threshold");
    evaluate_cmd->add_option("--negative-label", evaluate_flags.negative_label, "Negative class for leakage");
    evaluate_cmd->add_option("--manifest", evaluate_flags.manifest, "Manifest for training counts");
    evaluate_cmd->add_option("--model-id", evaluate_flags.model_id, "Name shown in the report");

    CommonOptions report_opts;
    std::vector<std::string> report_paths;
    std::string report_format = "markdown";
    bool exclude_negative = false;
    auto* report_cmd = app.add_subcommand("report", "Render metrics reports");
    add_common(*report_cmd, report_opts);
    report_cmd->add_option("--report", report_paths, "Report JSON file(s)");
    report_cmd->add_option("--format", report_format, "markdown or json");
    report_cmd->add_flag("--exclude-negative", exclude_negative, "Leave the negative class out of per-class tables");

    CommonOptions serve_opts;
    std::vector<std::string> serve_models;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_body = kDefaultMaxBodyBytes;
    auto* serve_cmd = app.add_subcommand("serve", "HTTP top-3 inference service");
    add_common(*serve_cmd, serve_opts);
    serve_cmd->add_option("--model", serve_models, "Model artifact directory; several form a composite");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port");
    serve_cmd->add_option("--max-body-bytes", max_body, "Largest accepted request body");

    std::vector<std::string> argv_storage{"bombus"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& arg : argv_storage) {
        argv.push_back(arg.data());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << error_json("usage", e.what()) << "\n";
        return 2;
    }

    try {
        if (build_cmd->parsed()) {
            return cmd_dataset_build(resolve_config(dataset_opts), out);
        }
        if (augment_cmd->parsed()) {
            return cmd_augment(resolve_config(augment_opts), augment_manifest, out);
        }
        if (train_cmd->parsed()) {
            return cmd_train(resolve_config(train_opts), train_manifest, out);
        }
        if (predict_cmd->parsed()) {
            return cmd_predict(resolve_config(predict_opts), predict_model, predict_images, predict_manifest,
                               predict_split, out);
        }
        if (ensemble_cmd->parsed()) {
            return cmd_ensemble(resolve_config(ensemble_opts), ensemble_members, ensemble_mode, ensemble_manifest,
                                out);
        }
        if (evaluate_cmd->parsed()) {
            if (threshold_opt->count() > 0) {
                evaluate_flags.threshold = threshold;
            }
            return cmd_evaluate(resolve_config(evaluate_opts), evaluate_flags, out);
        }
        if (report_cmd->parsed()) {
            return cmd_report(resolve_config(report_opts), report_paths, report_format, exclude_negative, out);
        }
        if (serve_cmd->parsed()) {
            return cmd_serve(resolve_config(serve_opts), serve_models, host, port, max_body, out);
        }
        err << error_json("usage", "no subcommand") << "\n";
        return 2;
    } catch (const Error& e) {
        err << error_json(e.code(), e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << error_json("internal", e.what()) << "\n";
        return 1;
    }
}

int run_command(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run_command(args, std::cout, std::cerr);
}

}  // namespace bombus::interface
