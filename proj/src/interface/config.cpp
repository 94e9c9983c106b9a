#include "bombus/config.hpp"

#include "bombus/error.hpp"
#include "bombus/json_reader.hpp"
#include "bombus/model_json.hpp"

#include <fstream>
#include <sstream>

namespace bombus::interface {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
json optional_json(const std::optional<T>& value) {
    return value ? json(*value) : json(nullptr);
}

json interval_json(const augment::Interval& interval) {
    return json::array({interval.lower, interval.upper});
}

augment::Interval interval_from_json(JsonReader& reader, const std::string& key, augment::Interval fallback) {
    const auto values = reader.optional<std::vector<double>>(key);
    if (!values) {
        return fallback;
    }
    if (values->size() != 2) {
        throw Error("invalid_config", reader.child_path(key) + ": expected [lower, upper]");
    }
    return {(*values)[0], (*values)[1]};
}

augment::AugmentationOpSpec op_from_json(const json& value, const std::string& path) {
    JsonReader reader(value, path);
    const auto kind = augment::parse_op_kind(reader.get<std::string>("kind"));
    augment::AugmentationOpSpec spec;
    switch (kind) {
        case augment::OpKind::rotation: {
            augment::RotationSpec s;
            s.degrees = interval_from_json(reader, "degrees", s.degrees);
            spec = s;
            break;
        }
        case augment::OpKind::contrast: {
            augment::ContrastSpec s;
            s.factor = interval_from_json(reader, "factor", s.factor);
            spec = s;
            break;
        }
        case augment::OpKind::salt_pepper: {
            augment::SaltPepperSpec s;
            s.probability = interval_from_json(reader, "probability", s.probability);
            spec = s;
            break;
        }
        case augment::OpKind::occlusion: {
            augment::OcclusionSpec s;
            s.height = interval_from_json(reader, "height", s.height);
            s.width = interval_from_json(reader, "width", s.width);
            spec = s;
            break;
        }
    }
    reader.finish();
    return spec;
}

json op_to_json(const augment::AugmentationOpSpec& op) {
    json out{{"kind", std::string(augment::to_string(augment::kind_of(op)))}};
    if (const auto* s = std::get_if<augment::RotationSpec>(&op)) {
        out["degrees"] = interval_json(s->degrees);
    } else if (const auto* s = std::get_if<augment::ContrastSpec>(&op)) {
        out["factor"] = interval_json(s->factor);
    } else if (const auto* s = std::get_if<augment::SaltPepperSpec>(&op)) {
        out["probability"] = interval_json(s->probability);
    } else if (const auto* s = std::get_if<augment::OcclusionSpec>(&op)) {
        out["height"] = interval_json(s->height);
        out["width"] = interval_json(s->width);
    }
    return out;
}

DatasetSection dataset_from_json(const json& value, std::uint64_t default_seed) {
    DatasetSection section;
    section.seed = default_seed;
    if (value.is_null()) {
        return section;
    }
    JsonReader reader(value, "dataset");
    section.manifest = reader.optional<std::string>("manifest");
    section.root = reader.optional<std::string>("root");
    section.test_root = reader.optional<std::string>("test_root");
    section.negatives = reader.optional<std::string>("negatives");
    section.negative_label = reader.optional<std::string>("negative_label");
    section.labels = reader.get_or("labels", section.labels);
    section.train_fraction = reader.get_or("train_fraction", section.train_fraction);
    section.seed = reader.get_or("seed", section.seed);
    section.geometry = reader.get_or("geometry", section.geometry);
    reader.finish();
    if (!(section.train_fraction >= 0.0 && section.train_fraction <= 1.0)) {
        throw Error("invalid_fraction", "dataset.train_fraction must lie in [0, 1]");
    }
    if (section.geometry < 1) {
        throw Error("invalid_config", "dataset.geometry must be positive");
    }
    if (section.negatives && !section.negative_label) {
        throw Error("missing_negative_label", "dataset.negatives needs dataset.negative_label");
    }
    return section;
}

json dataset_to_json(const DatasetSection& section) {
    return json{{"manifest", optional_json(section.manifest)},
                {"root", optional_json(section.root)},
                {"test_root", optional_json(section.test_root)},
                {"negatives", optional_json(section.negatives)},
                {"negative_label", optional_json(section.negative_label)},
                {"labels", section.labels},
                {"train_fraction", section.train_fraction},
                {"seed", section.seed},
                {"geometry", section.geometry}};
}

ModelSection model_from_json(const json& value, std::uint64_t default_seed) {
    const json empty = json::object();
    const json& source = value.is_null() ? empty : value;
    JsonReader reader(source, "model");

    ModelSection section;
    section.preset = reader.optional<std::string>("preset");
    if (section.preset) {
        section = preset(*section.preset);
    }
    section.train.seed = default_seed;
    section.backbone.weight_seed = default_seed;
    section.init_seed = reader.get_or("init_seed", default_seed);

    json backbone = model::to_json(section.backbone);
    if (reader.has("backbone")) {
        const auto& given = reader.raw("backbone");
        if (!given.is_object()) {
            throw Error("invalid_config", "model.backbone: expected an object");
        }
        // A different architecture brings its own geometry and widths.
        if (given.contains("name") && given["name"] != backbone["name"]) {
            backbone.erase("input_geometry");
            backbone.erase("feature_dim");
            backbone.erase("grid");
        }
        backbone.merge_patch(given);
    } else {
        reader.get_or<json>("backbone", nullptr);
    }
    section.backbone = model::backbone_from_json(backbone, "model.backbone");

    const json none = json::object();
    const auto overlay = [&](const std::string& key) -> const json& {
        if (reader.has(key)) {
            return reader.raw(key);
        }
        reader.get_or<json>(key, nullptr);
        return none;
    };
    section.head = model::head_from_json(overlay("head"), section.head, "model.head");
    section.optimizer = model::optimizer_from_json(overlay("optimizer"), section.optimizer, "model.optimizer");
    section.train = model::train_config_from_json(overlay("train"), section.train, "model.train");
    reader.finish();
    return section;
}

json model_to_json(const ModelSection& section) {
    return json{{"preset", optional_json(section.preset)},
                {"backbone", model::to_json(section.backbone)},
                {"head", model::to_json(section.head)},
                {"optimizer", model::to_json(section.optimizer)},
                {"train", model::to_json(section.train)},
                {"init_seed", section.init_seed}};
}

EnsembleSection default_ensemble(std::uint64_t seed) {
    EnsembleSection section;
    section.head.hidden_layers = 1;
    section.head.nodes_per_layer = {512};
    section.head.dropout = 0.5;
    section.optimizer.learning_rate = 1e-4;
    section.train.batch_size = 32;
    section.train.seed = seed;
    return section;
}

std::optional<EnsembleSection> ensemble_from_json(const json& value, std::uint64_t default_seed) {
    if (value.is_null()) {
        return std::nullopt;
    }
    JsonReader reader(value, "ensemble");
    auto section = default_ensemble(default_seed);
    section.members = reader.get_or("members", section.members);
    section.mode = parse_ensemble_mode(reader.get_or<std::string>("mode", "softmax_sum"));
    const json none = json::object();
    const auto overlay = [&](const std::string& key) -> const json& {
        if (reader.has(key)) {
            return reader.raw(key);
        }
        reader.get_or<json>(key, nullptr);
        return none;
    };
    section.head = model::head_from_json(overlay("head"), section.head, "ensemble.head");
    section.optimizer = model::optimizer_from_json(overlay("optimizer"), section.optimizer, "ensemble.optimizer");
    section.train = model::train_config_from_json(overlay("train"), section.train, "ensemble.train");
    reader.finish();
    return section;
}

json ensemble_to_json(const std::optional<EnsembleSection>& section) {
    if (!section) {
        return nullptr;
    }
    return json{{"members", section->members},
                {"mode", std::string(to_string(section->mode))},
                {"head", model::to_json(section->head)},
                {"optimizer", model::to_json(section->optimizer)},
                {"train", model::to_json(section->train)}};
}

EvalSection eval_from_json(const json& value) {
    EvalSection section;
    if (value.is_null()) {
        return section;
    }
    JsonReader reader(value, "eval");
    section.k = reader.get_or("k", section.k);
    section.threshold = reader.get_or("threshold", section.threshold);
    section.negative_label = reader.optional<std::string>("negative_label");
    section.exclude_negative = reader.get_or("exclude_negative", section.exclude_negative);
    reader.finish();
    if (section.k.empty()) {
        throw Error("invalid_k", "eval.k needs at least one value");
    }
    for (const int k : section.k) {
        if (k < 1) {
            throw Error("invalid_k", "eval.k values must be >= 1");
        }
    }
    if (section.threshold < 0) {
        throw Error("invalid_config", "eval.threshold must be non-negative");
    }
    return section;
}

json eval_to_json(const EvalSection& section) {
    return json{{"k", section.k},
                {"threshold", section.threshold},
                {"negative_label", optional_json(section.negative_label)},
                {"exclude_negative", section.exclude_negative}};
}

const json& member_or_null(const json& document, const char* key) {
    static const json null_value = nullptr;
    const auto it = document.find(key);
    return it == document.end() ? null_value : *it;
}

}  // namespace

fs::path ExperimentConfig::resolve(const std::string& path) const {
    const fs::path p(path);
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
    return seed == other.seed && dataset == other.dataset && augmentation == other.augmentation &&
           model == other.model && ensemble == other.ensemble && eval == other.eval && output == other.output;
}

std::string_view to_string(EnsembleMode mode) noexcept {
    return mode == EnsembleMode::softmax_sum ? "softmax_sum" : "encoder_composite";
}

EnsembleMode parse_ensemble_mode(std::string_view text) {
    if (text == "softmax_sum") return EnsembleMode::softmax_sum;
    if (text == "encoder_composite") return EnsembleMode::encoder_composite;
    throw Error("invalid_config", "unknown ensemble mode '" + std::string(text) + "'");
}

json to_json(const augment::AugmentationPolicy& policy) {
    json ops = json::array();
    for (const auto& op : policy.ops) {
        ops.push_back(op_to_json(op));
    }
    return json{{"ops", ops},
                {"augment_rate", policy.augment_rate},
                {"min_ops", policy.min_ops},
                {"max_ops", policy.max_ops},
                {"seed", policy.seed}};
}

augment::AugmentationPolicy policy_from_json(const json& value, std::uint64_t default_seed, const std::string& path) {
    JsonReader reader(value, path);
    auto policy = augment::default_policy(default_seed);
    if (reader.has("ops")) {
        const auto& ops = reader.raw("ops");
        if (!ops.is_array()) {
            throw Error("invalid_config", path + ".ops: expected an array");
        }
        policy.ops.clear();
        for (std::size_t i = 0; i < ops.size(); ++i) {
            policy.ops.push_back(op_from_json(ops[i], path + ".ops[" + std::to_string(i) + "]"));
        }
        policy.max_ops = static_cast<int>(policy.ops.size());
    } else {
        reader.get_or<json>("ops", nullptr);
    }
    policy.augment_rate = reader.get_or("augment_rate", policy.augment_rate);
    policy.min_ops = reader.get_or("min_ops", policy.min_ops);
    policy.max_ops = reader.get_or("max_ops", policy.max_ops);
    policy.seed = reader.get_or("seed", policy.seed);
    reader.finish();
    augment::validate(policy);
    return policy;
}

void apply_override(json& document, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0) {
        throw Error("invalid_config", "override '" + std::string(assignment) + "' is not key=value");
    }
    const std::string key(assignment.substr(0, eq));
    const std::string text(assignment.substr(eq + 1));
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    json* node = &document;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) {
            throw Error("invalid_config", "override key '" + key + "' has an empty component");
        }
        if (node->is_null()) {
            *node = json::object();
        }
        if (!node->is_object()) {
            throw Error("invalid_config", "override key '" + key + "' descends into a non-object");
        }
        node = &(*node)[part];
        if (dot == std::string::npos) {
            break;
        }
        start = dot + 1;
    }
    *node = std::move(value);
}

ExperimentConfig config_from_json(json document, const fs::path& base_dir) {
    JsonReader reader(document, "");
    ExperimentConfig config;
    config.base_dir = base_dir;
    config.seed = reader.get_or<std::uint64_t>("seed", 0);
    config.dataset = dataset_from_json(member_or_null(document, "dataset"), config.seed);
    const auto& augmentation = member_or_null(document, "augmentation");
    if (!augmentation.is_null()) {
        config.augmentation = policy_from_json(augmentation, config.seed);
    }
    config.model = model_from_json(member_or_null(document, "model"), config.seed);
    config.ensemble = ensemble_from_json(member_or_null(document, "ensemble"), config.seed);
    config.eval = eval_from_json(member_or_null(document, "eval"));
    config.output = reader.get_or<std::string>("output", config.output);
    for (const char* key : {"dataset", "augmentation", "model", "ensemble", "eval"}) {
        reader.get_or<json>(key, nullptr);
    }
    reader.finish();
    return config;
}

json config_to_json(const ExperimentConfig& config) {
    return json{{"seed", config.seed},
                {"dataset", dataset_to_json(config.dataset)},
                {"augmentation", config.augmentation ? to_json(*config.augmentation) : json(nullptr)},
                {"model", model_to_json(config.model)},
                {"ensemble", ensemble_to_json(config.ensemble)},
                {"eval", eval_to_json(config.eval)},
                {"output", config.output}};
}

std::string serialize_config(const ExperimentConfig& config) {
    return config_to_json(config).dump(2) + "\n";
}

ExperimentConfig parse_config(const fs::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("missing_file", "cannot open config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    json document = json::parse(text.str(), nullptr, false);
    if (document.is_discarded()) {
        throw Error("invalid_config", path.string() + ": not valid JSON");
    }
    for (const auto& assignment : overrides) {
        apply_override(document, assignment);
    }
    return config_from_json(std::move(document), path.parent_path());
}

}  // namespace bombus::interface
