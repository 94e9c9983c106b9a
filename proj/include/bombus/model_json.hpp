#pragma once

#include "bombus/model.hpp"

#include <nlohmann/json.hpp>

#include <string>

// JSON forms of the model-level configuration and bookkeeping types, shared
// by artifacts and experiment configs. Readers reject unknown keys.
namespace bombus::model {

nlohmann::json to_json(const BackboneSpec& spec);
nlohmann::json to_json(const HeadConfig& config);
nlohmann::json to_json(const OptimizerConfig& config);
nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const TrainingHistory& history);
nlohmann::json to_json(const dataset::ClassCatalog& catalog);

BackboneSpec backbone_from_json(const nlohmann::json& value, const std::string& path = "backbone");
HeadConfig head_from_json(const nlohmann::json& value, const std::string& path = "head");
OptimizerConfig optimizer_from_json(const nlohmann::json& value, const std::string& path = "optimizer");
TrainConfig train_config_from_json(const nlohmann::json& value, const std::string& path = "train");
TrainingHistory history_from_json(const nlohmann::json& value);
dataset::ClassCatalog catalog_from_json(const nlohmann::json& value);

// Applies the keys present in `value` on top of `base` (used for presets
// with overrides). Unknown keys are rejected.
HeadConfig head_from_json(const nlohmann::json& value, const HeadConfig& base, const std::string& path);
OptimizerConfig optimizer_from_json(const nlohmann::json& value, const OptimizerConfig& base, const std::string& path);
TrainConfig train_config_from_json(const nlohmann::json& value, const TrainConfig& base, const std::string& path);

}  // namespace bombus::model
