#include "bombus/json_reader.hpp"
#include "bombus/model_json.hpp"

namespace bombus::model {

using nlohmann::json;

namespace {

template <typename T>
json optional_json(const std::optional<T>& value) {
    return value ? json(*value) : json(nullptr);
}

// Present-and-null clears an optional; absent keeps the base value.
template <typename T>
void overlay_optional(JsonReader& reader, const json& object, const std::string& key, std::optional<T>& target) {
    if (!object.contains(key)) {
        return;
    }
    target = reader.optional<T>(key);
}

std::string_view to_string(OptimizerKind kind) {
    return kind == OptimizerKind::adam ? "adam" : "sgd";
}

OptimizerKind parse_kind(const std::string& text, const std::string& path) {
    if (text == "adam") return OptimizerKind::adam;
    if (text == "sgd") return OptimizerKind::sgd;
    throw Error("invalid_config", path + ": unknown optimizer '" + text + "'");
}

LrDecay decay_from_json(const json& value, const std::string& path) {
    JsonReader reader(value, path);
    LrDecay decay;
    decay.rate = reader.get_or("rate", decay.rate);
    decay.interval = reader.get_or<std::int64_t>("interval", decay.interval);
    const auto unit = reader.get_or<std::string>("unit", "steps");
    if (unit == "steps") {
        decay.unit = DecayUnit::steps;
    } else if (unit == "epochs") {
        decay.unit = DecayUnit::epochs;
    } else {
        throw Error("invalid_config", path + ": decay unit must be 'steps' or 'epochs'");
    }
    reader.finish();
    return decay;
}

}  // namespace

json to_json(const BackboneSpec& spec) {
    return json{{"name", std::string(to_string(spec.name))},
                {"input_geometry", {spec.input_geometry.height, spec.input_geometry.width}},
                {"feature_dim", spec.feature_dim},
                {"grid", spec.grid},
                {"weight_source", std::string(to_string(spec.weight_source))},
                {"weight_seed", spec.weight_seed}};
}

BackboneSpec backbone_from_json(const json& value, const std::string& path) {
    JsonReader reader(value, path);
    const auto name = parse_backbone_name(reader.get<std::string>("name"));
    const auto source = parse_weight_source(reader.get_or<std::string>("weight_source", "pretrained"));
    const auto seed = reader.get_or<std::uint64_t>("weight_seed", 0);
    auto spec = make_backbone_spec(name, source, seed);
    if (const auto geometry = reader.optional<std::vector<int>>("input_geometry")) {
        if (geometry->size() != 2 || (*geometry)[0] != spec.input_geometry.height ||
            (*geometry)[1] != spec.input_geometry.width) {
            throw Error("geometry_mismatch", path + ": input_geometry does not match " +
                                                 std::string(to_string(name)) + "'s required input");
        }
    }
    if (const auto dim = reader.optional<int>("feature_dim"); dim && *dim != spec.feature_dim) {
        throw Error("invalid_config", path + ": feature_dim is reported by the adapter (" +
                                          std::to_string(spec.feature_dim) + ")");
    }
    if (const auto grid = reader.optional<int>("grid"); grid && *grid != spec.grid) {
        throw Error("invalid_config", path + ": grid is reported by the adapter");
    }
    reader.finish();
    return spec;
}

json to_json(const HeadConfig& config) {
    return json{{"hidden_layers", config.hidden_layers},
                {"nodes_per_layer", config.nodes_per_layer},
                {"dropout", config.dropout},
                {"batch_norm", config.batch_norm},
                {"global_average_pooling", config.global_average_pooling},
                {"output_classes", config.output_classes},
                {"hidden_activation", "relu"},
                {"output_activation", "softmax"}};
}

HeadConfig head_from_json(const json& value, const HeadConfig& base, const std::string& path) {
    JsonReader reader(value, path);
    HeadConfig config = base;
    config.hidden_layers = reader.get_or("hidden_layers", config.hidden_layers);
    config.nodes_per_layer = reader.get_or("nodes_per_layer", config.nodes_per_layer);
    config.dropout = reader.get_or("dropout", config.dropout);
    config.batch_norm = reader.get_or("batch_norm", config.batch_norm);
    config.global_average_pooling = reader.get_or("global_average_pooling", config.global_average_pooling);
    config.output_classes = reader.get_or("output_classes", config.output_classes);
    if (reader.get_or<std::string>("hidden_activation", "relu") != "relu") {
        throw Error("invalid_config", path + ": hidden_activation is fixed to relu");
    }
    if (reader.get_or<std::string>("output_activation", "softmax") != "softmax") {
        throw Error("invalid_config", path + ": output_activation is fixed to softmax");
    }
    reader.finish();
    try {
        validate(config);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
    return config;
}

HeadConfig head_from_json(const json& value, const std::string& path) {
    return head_from_json(value, HeadConfig{}, path);
}

json to_json(const OptimizerConfig& config) {
    json decay = nullptr;
    if (config.decay) {
        decay = json{{"rate", config.decay->rate},
                     {"interval", config.decay->interval},
                     {"unit", config.decay->unit == DecayUnit::steps ? "steps" : "epochs"}};
    }
    return json{{"kind", std::string(to_string(config.kind))},
                {"learning_rate", config.learning_rate},
                {"decay", decay},
                {"weight_decay", optional_json(config.weight_decay)},
                {"momentum", optional_json(config.momentum)},
                {"loss", "categorical_crossentropy"}};
}

OptimizerConfig optimizer_from_json(const json& value, const OptimizerConfig& base, const std::string& path) {
    JsonReader reader(value, path);
    OptimizerConfig config = base;
    if (value.contains("kind")) {
        config.kind = parse_kind(reader.get<std::string>("kind"), path);
    }
    config.learning_rate = reader.get_or("learning_rate", config.learning_rate);
    if (value.contains("decay")) {
        const auto& decay = reader.raw("decay");
        config.decay = decay.is_null() ? std::nullopt : std::optional<LrDecay>(decay_from_json(decay, path + ".decay"));
    }
    overlay_optional(reader, value, "weight_decay", config.weight_decay);
    overlay_optional(reader, value, "momentum", config.momentum);
    if (reader.get_or<std::string>("loss", "categorical_crossentropy") != "categorical_crossentropy") {
        throw Error("invalid_config", path + ": loss is fixed to categorical_crossentropy");
    }
    reader.finish();
    try {
        validate(config);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
    return config;
}

OptimizerConfig optimizer_from_json(const json& value, const std::string& path) {
    return optimizer_from_json(value, OptimizerConfig{}, path);
}

json to_json(const TrainConfig& config) {
    return json{{"epochs", config.epochs},
                {"batch_size", config.batch_size},
                {"train_fraction", config.train_fraction},
                {"seed", config.seed},
                {"use_augmented", config.use_augmented},
                {"overfit_patience", optional_json(config.overfit_patience)}};
}

TrainConfig train_config_from_json(const json& value, const TrainConfig& base, const std::string& path) {
    JsonReader reader(value, path);
    TrainConfig config = base;
    config.epochs = reader.get_or("epochs", config.epochs);
    config.batch_size = reader.get_or("batch_size", config.batch_size);
    config.train_fraction = reader.get_or("train_fraction", config.train_fraction);
    config.seed = reader.get_or("seed", config.seed);
    config.use_augmented = reader.get_or("use_augmented", config.use_augmented);
    overlay_optional(reader, value, "overfit_patience", config.overfit_patience);
    reader.finish();
    try {
        validate(config);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
    return config;
}

TrainConfig train_config_from_json(const json& value, const std::string& path) {
    return train_config_from_json(value, TrainConfig{}, path);
}

json to_json(const TrainingHistory& history) {
    json epochs = json::array();
    for (const auto& e : history.epochs) {
        epochs.push_back(json{{"train_loss", e.train_loss},
                              {"train_accuracy", e.train_accuracy},
                              {"val_loss", optional_json(e.val_loss)},
                              {"val_accuracy", optional_json(e.val_accuracy)},
                              {"learning_rate", e.learning_rate}});
    }
    return json{{"epochs", epochs}, {"stopped_early_at", optional_json(history.stopped_early_at)}};
}

TrainingHistory history_from_json(const json& value) {
    JsonReader reader(value, "history");
    TrainingHistory history;
    for (const auto& item : reader.raw("epochs")) {
        JsonReader epoch(item, "history.epochs");
        EpochRecord record;
        record.train_loss = epoch.get<double>("train_loss");
        record.train_accuracy = epoch.get<double>("train_accuracy");
        record.val_loss = epoch.optional<double>("val_loss");
        record.val_accuracy = epoch.optional<double>("val_accuracy");
        record.learning_rate = epoch.get<double>("learning_rate");
        epoch.finish();
        history.epochs.push_back(record);
    }
    history.stopped_early_at = reader.optional<int>("stopped_early_at");
    reader.finish();
    return history;
}

json to_json(const dataset::ClassCatalog& catalog) {
    return json{{"labels", catalog.labels()}, {"negative_label", optional_json(catalog.negative_label())}};
}

dataset::ClassCatalog catalog_from_json(const json& value) {
    JsonReader reader(value, "catalog");
    auto labels = reader.get<std::vector<std::string>>("labels");
    auto negative = reader.optional<std::string>("negative_label");
    reader.finish();
    return dataset::ClassCatalog(std::move(labels), std::move(negative));
}

}  // namespace bombus::model
