#include "bombus/dataset.hpp"
#include "bombus/error.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace bombus::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "bombus.manifest";
constexpr int kFormatVersion = 1;

std::string context(std::string_view origin, std::size_t line) {
    return std::string(origin) + ":" + std::to_string(line) + ": ";
}

const json& require(const json& object, const char* key, std::string_view where) {
    const auto it = object.find(key);
    if (it == object.end()) {
        throw Error("malformed_record", std::string(where) + "missing key '" + key + "'");
    }
    return *it;
}

std::string require_string(const json& object, const char* key, std::string_view where) {
    const auto& value = require(object, key, where);
    if (!value.is_string()) {
        throw Error("malformed_record", std::string(where) + "key '" + key + "' must be a string");
    }
    return value.get<std::string>();
}

ImageRecord parse_record(const json& object, std::string_view where) {
    static const std::unordered_set<std::string> kKeys{"id", "path", "label", "split", "source",
                                                       "parent_id"};
    if (!object.is_object()) {
        throw Error("malformed_record", std::string(where) + "record must be a JSON object");
    }
    for (const auto& item : object.items()) {
        if (!kKeys.contains(item.key())) {
            throw Error("malformed_record", std::string(where) + "unknown key '" + item.key() + "'");
        }
    }
    ImageRecord record;
    record.id = require_string(object, "id", where);
    record.path = require_string(object, "path", where);
    record.label = require_string(object, "label", where);
    try {
        record.split = parse_split(require_string(object, "split", where));
        record.source = parse_source(require_string(object, "source", where));
    } catch (const Error& e) {
        throw Error(e.code(), std::string(where) + e.what());
    }
    if (const auto it = object.find("parent_id"); it != object.end() && !it->is_null()) {
        if (!it->is_string()) {
            throw Error("malformed_record", std::string(where) + "parent_id must be a string or null");
        }
        record.parent_id = it->get<std::string>();
    }
    if (record.id.empty()) {
        throw Error("malformed_record", std::string(where) + "empty id");
    }
    return record;
}

json record_to_json(const ImageRecord& record) {
    json out = json::object();
    out["id"] = record.id;
    out["path"] = record.path;
    out["label"] = record.label;
    out["split"] = std::string(to_string(record.split));
    out["source"] = std::string(to_string(record.source));
    out["parent_id"] = record.parent_id ? json(*record.parent_id) : json(nullptr);
    return out;
}

}  // namespace

fs::path DatasetManifest::resolve(const ImageRecord& record) const {
    const fs::path path(record.path);
    return path.is_absolute() ? path : base_dir / path;
}

const ImageRecord* DatasetManifest::find(std::string_view id) const {
    for (const auto& record : records) {
        if (record.id == id) {
            return &record;
        }
    }
    return nullptr;
}

ManifestSummary validate(const DatasetManifest& manifest) {
    std::unordered_map<std::string_view, const ImageRecord*> by_id;
    by_id.reserve(manifest.records.size());
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& record = manifest.records[i];
        const std::string where = "record " + std::to_string(i) + " ('" + record.id + "'): ";
        if (!by_id.emplace(record.id, &record).second) {
            throw Error("duplicate_id", where + "duplicate id '" + record.id + "'");
        }
        if (!manifest.catalog.contains(record.label)) {
            throw Error("unknown_label", where + "label '" + record.label + "' is not in the catalog");
        }
        const bool negative_label =
            manifest.catalog.negative_label() && record.label == *manifest.catalog.negative_label();
        if (record.source == Source::negative && !negative_label) {
            throw Error("label_mismatch", where + "negative record carries species label '" +
                                              record.label + "'");
        }
        if (record.source == Source::augmented) {
            if (!record.parent_id) {
                throw Error("malformed_record", where + "augmented record without parent_id");
            }
        } else if (record.parent_id) {
            throw Error("malformed_record", where + "only augmented records may carry a parent_id");
        }
    }
    for (const auto& record : manifest.records) {
        if (record.source != Source::augmented) {
            continue;
        }
        const auto it = by_id.find(*record.parent_id);
        if (it == by_id.end() || it->second->source == Source::augmented) {
            throw Error("malformed_record", "record '" + record.id +
                                                "': parent_id must reference a non-augmented record");
        }
        if (it->second->label != record.label) {
            throw Error("label_mismatch",
                        "record '" + record.id + "': augmented label differs from its parent");
        }
    }

    ManifestSummary summary;
    summary.counts = class_distribution(manifest);
    for (const auto& label : manifest.catalog.labels()) {
        if (summary.counts[label] == 0) {
            summary.empty_classes.push_back(label);
        }
    }
    return summary;
}

std::map<std::string, std::size_t> class_distribution(const DatasetManifest& manifest) {
    std::map<std::string, std::size_t> counts;
    for (const auto& label : manifest.catalog.labels()) {
        counts[label] = 0;
    }
    for (const auto& record : manifest.records) {
        ++counts[record.label];
    }
    return counts;
}

std::vector<std::size_t> class_counts(const DatasetManifest& manifest, Split split) {
    std::vector<std::size_t> counts(manifest.catalog.size(), 0);
    for (const auto& record : manifest.records) {
        if (record.split != split) {
            continue;
        }
        if (const auto index = manifest.catalog.index_of(record.label)) {
            ++counts[*index];
        }
    }
    return counts;
}

DatasetManifest parse_manifest(std::string_view text, const fs::path& base_dir, std::string_view origin) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_number = 0;
    bool have_header = false;
    std::unordered_set<std::string> seen_ids;
    DatasetManifest manifest;
    manifest.base_dir = base_dir;

    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = context(origin, line_number);
        json object;
        try {
            object = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error("malformed_record", where + "invalid JSON: " + e.what());
        }
        if (!have_header) {
            static const std::unordered_set<std::string> kKeys{"format", "version", "labels",
                                                               "negative_label", "seed"};
            if (!object.is_object()) {
                throw Error("malformed_record", where + "header must be a JSON object");
            }
            for (const auto& item : object.items()) {
                if (!kKeys.contains(item.key())) {
                    throw Error("malformed_record", where + "unknown header key '" + item.key() + "'");
                }
            }
            if (const auto it = object.find("version"); it != object.end() && *it != kFormatVersion) {
                throw Error("version_mismatch", where + "unsupported manifest version " + it->dump());
            }
            const auto& labels = require(object, "labels", where);
            if (!labels.is_array()) {
                throw Error("malformed_record", where + "labels must be an array");
            }
            std::optional<std::string> negative;
            if (const auto it = object.find("negative_label"); it != object.end() && !it->is_null()) {
                negative = it->get<std::string>();
            }
            try {
                manifest.catalog = ClassCatalog(labels.get<std::vector<std::string>>(), negative);
            } catch (const Error& e) {
                throw Error(e.code(), where + e.what());
            } catch (const json::exception& e) {
                throw Error("malformed_record", where + "labels must be strings");
            }
            if (const auto it = object.find("seed"); it != object.end()) {
                if (!it->is_number_unsigned()) {
                    throw Error("malformed_record", where + "seed must be a non-negative integer");
                }
                manifest.seed = it->get<std::uint64_t>();
            }
            have_header = true;
            continue;
        }
        auto record = parse_record(object, where);
        if (!seen_ids.insert(record.id).second) {
            throw Error("duplicate_id", where + "duplicate id '" + record.id + "'");
        }
        if (!manifest.catalog.contains(record.label)) {
            throw Error("unknown_label", where + "label '" + record.label + "' is not in the catalog");
        }
        manifest.records.push_back(std::move(record));
    }
    if (!have_header) {
        throw Error("malformed_record", std::string(origin) + ": missing header line");
    }
    validate(manifest);
    return manifest;
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("missing_file", "manifest not found: " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_manifest(buffer.str(), path.parent_path(), path.string());
}

std::string serialize_manifest(const DatasetManifest& manifest) {
    json header = json::object();
    header["format"] = kFormat;
    header["version"] = kFormatVersion;
    header["labels"] = manifest.catalog.labels();
    header["negative_label"] =
        manifest.catalog.negative_label() ? json(*manifest.catalog.negative_label()) : json(nullptr);
    header["seed"] = manifest.seed;
    std::string out = header.dump() + "\n";
    for (const auto& record : manifest.records) {
        out += record_to_json(record).dump();
        out += '\n';
    }
    return out;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("unwritable_output", "cannot write manifest " + path.string());
    }
    out << serialize_manifest(manifest);
}

}  // namespace bombus::dataset
