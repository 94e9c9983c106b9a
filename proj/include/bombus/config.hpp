#pragma once

#include "bombus/augment.hpp"
#include "bombus/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bombus::interface {

struct DatasetSection {
    std::optional<std::string> manifest;   // existing manifest; skips `dataset build`
    std::optional<std::string> root;       // <root>/<label>/*.png|jpg
    std::optional<std::string> test_root;  // same layout, pre-assigned to test
    std::optional<std::string> negatives;  // flat directory of negative-class images
    std::optional<std::string> negative_label;
    std::vector<std::string> labels;       // empty: sorted class directories
    double train_fraction = 0.85;
    std::uint64_t seed = 0;
    int geometry = 224;

    bool operator==(const DatasetSection& other) const = default;
};

struct ModelSection {
    std::optional<std::string> preset;
    model::BackboneSpec backbone = model::make_backbone_spec(model::BackboneName::vgg16);
    model::HeadConfig head;
    model::OptimizerConfig optimizer;
    model::TrainConfig train;
    std::uint64_t init_seed = 0;  // head weight initialisation

    bool operator==(const ModelSection& other) const = default;
};

enum class EnsembleMode { softmax_sum, encoder_composite };

struct EnsembleSection {
    std::vector<std::string> members;  // CSV matrices or model artifact directories
    EnsembleMode mode = EnsembleMode::softmax_sum;
    // encoder_composite only
    model::HeadConfig head;
    model::OptimizerConfig optimizer;
    model::TrainConfig train;

    bool operator==(const EnsembleSection& other) const = default;
};

struct EvalSection {
    std::vector<int> k{1, 3};
    std::int64_t threshold = 150;
    std::optional<std::string> negative_label;
    bool exclude_negative = false;

    bool operator==(const EvalSection& other) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    DatasetSection dataset;
    std::optional<augment::AugmentationPolicy> augmentation;
    ModelSection model;
    std::optional<EnsembleSection> ensemble;
    EvalSection eval;
    std::string output = "output";

    // Directory relative paths are resolved against (the config file's).
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::string& path) const;
    bool operator==(const ExperimentConfig& other) const;
};

std::string_view to_string(EnsembleMode mode) noexcept;
EnsembleMode parse_ensemble_mode(std::string_view text);

// Presets ------------------------------------------------------------------

const std::vector<std::string>& preset_names();
// Model section for a named preset; unknown names throw `unknown_preset`.
ModelSection preset(std::string_view name);

// Parsing ------------------------------------------------------------------

ExperimentConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
ExperimentConfig config_from_json(nlohmann::json document, const std::filesystem::path& base_dir = {});
// Fully resolved, canonical form: parsing it again yields an equal config.
nlohmann::json config_to_json(const ExperimentConfig& config);
std::string serialize_config(const ExperimentConfig& config);

// Applies `a.b.c=value`; the value is read as JSON when it parses, otherwise
// as a string.
void apply_override(nlohmann::json& document, std::string_view assignment);

nlohmann::json to_json(const augment::AugmentationPolicy& policy);
augment::AugmentationPolicy policy_from_json(const nlohmann::json& value, std::uint64_t default_seed,
                                             const std::string& path = "augmentation");

}  // namespace bombus::interface
