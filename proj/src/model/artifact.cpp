#include "bombus/error.hpp"
#include "bombus/json_reader.hpp"
#include "bombus/model.hpp"
#include "bombus/model_json.hpp"
#include "bombus/sha256.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace bombus::model {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "bombus.model";
constexpr std::array<char, 8> kTensorMagic{'B', 'O', 'M', 'B', 'F', '3', '2', '\0'};
constexpr const char* kChecksums = "SHA256SUMS";
constexpr std::array<const char*, 3> kFiles{"model.json", "head.bin", "backbone.bin"};

static_assert(std::endian::native == std::endian::little, "tensor files are little-endian float32");

void write_bytes(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("unwritable_output", "cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("unwritable_output", "failed writing " + path.string());
    }
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("corrupted_artifact", "missing artifact file " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string encode_tensor(std::span<const float> values) {
    std::string out(kTensorMagic.begin(), kTensorMagic.end());
    const std::uint64_t count = values.size();
    out.append(reinterpret_cast<const char*>(&count), sizeof(count));
    out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(float));
    return out;
}

std::vector<float> decode_tensor(std::string_view bytes, const std::string& name) {
    const std::size_t header = kTensorMagic.size() + sizeof(std::uint64_t);
    if (bytes.size() < header || std::memcmp(bytes.data(), kTensorMagic.data(), kTensorMagic.size()) != 0) {
        throw Error("corrupted_artifact", name + ": not a tensor file");
    }
    std::uint64_t count = 0;
    std::memcpy(&count, bytes.data() + kTensorMagic.size(), sizeof(count));
    if (bytes.size() != header + count * sizeof(float)) {
        throw Error("corrupted_artifact", name + ": size does not match its header");
    }
    std::vector<float> values(count);
    std::memcpy(values.data(), bytes.data() + header, count * sizeof(float));
    return values;
}

std::map<std::string, std::string> read_checksums(const fs::path& directory) {
    std::istringstream in(read_bytes(directory / kChecksums));
    std::map<std::string, std::string> sums;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto split = line.find("  ");
        if (split != 64) {
            throw Error("corrupted_artifact", "malformed SHA256SUMS line");
        }
        sums[line.substr(split + 2)] = line.substr(0, split);
    }
    return sums;
}

}  // namespace

void save_model(const TrainedModel& model, const fs::path& directory) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) {
        throw Error("unwritable_output", "cannot create " + directory.string() + ": " + ec.message());
    }
    json document{{"format", kFormat},
                  {"version", kArtifactVersion},
                  {"backbone", to_json(model.backbone->spec())},
                  {"backbone_digest", model.backbone->parameter_digest()},
                  {"head", to_json(model.head.config())},
                  {"head_input_width", model.head.input_width()},
                  {"catalog", to_json(model.catalog)},
                  {"history", to_json(model.history)},
                  {"provenance", model.provenance}};
    const std::map<std::string, std::string> contents{
        {"model.json", document.dump(2) + "\n"},
        {"head.bin", encode_tensor(model.head.serialize())},
        {"backbone.bin", encode_tensor(model.backbone->parameters())},
    };
    std::string sums;
    for (const char* name : kFiles) {
        const auto& bytes = contents.at(name);
        write_bytes(directory / name, bytes);
        sums += sha256_hex(bytes) + "  " + name + "\n";
    }
    write_bytes(directory / kChecksums, sums);
}

TrainedModel load_model(const fs::path& directory, const dataset::ClassCatalog* expected_catalog) {
    if (!fs::is_directory(directory)) {
        throw Error("missing_file", "model artifact not found: " + directory.string());
    }
    const auto sums = read_checksums(directory);
    std::map<std::string, std::string> contents;
    for (const char* name : kFiles) {
        const auto it = sums.find(name);
        if (it == sums.end()) {
            throw Error("corrupted_artifact", std::string(name) + " is not covered by SHA256SUMS");
        }
        auto bytes = read_bytes(directory / name);
        if (sha256_hex(bytes) != it->second) {
            throw Error("corrupted_artifact", std::string(name) + " fails its checksum");
        }
        contents[name] = std::move(bytes);
    }

    json document;
    try {
        document = json::parse(contents.at("model.json"));
    } catch (const json::parse_error& e) {
        throw Error("corrupted_artifact", std::string("model.json: ") + e.what());
    }
    JsonReader reader(document, "model.json");
    if (reader.get_or<std::string>("format", "") != kFormat) {
        throw Error("corrupted_artifact", "model.json is not a bombus model");
    }
    const int version = reader.get<int>("version");
    if (version != kArtifactVersion) {
        throw Error("version_mismatch", "artifact version " + std::to_string(version) + ", expected " +
                                            std::to_string(kArtifactVersion));
    }
    const auto spec = backbone_from_json(reader.raw("backbone"));
    const auto head_config = head_from_json(reader.raw("head"));
    const int input_width = reader.get<int>("head_input_width");
    auto catalog = catalog_from_json(reader.raw("catalog"));
    auto history = history_from_json(reader.raw("history"));
    auto provenance = reader.get<std::string>("provenance");
    const auto digest = reader.get<std::string>("backbone_digest");
    reader.finish();

    if (expected_catalog && !expected_catalog->same_labels(catalog)) {
        throw Error("catalog_mismatch", "artifact catalog has " + std::to_string(catalog.size()) +
                                            " classes; the pipeline expects " +
                                            std::to_string(expected_catalog->size()) + " in the same order");
    }
    if (static_cast<int>(catalog.size()) != head_config.output_classes) {
        throw Error("corrupted_artifact", "catalog size differs from the head's output width");
    }

    auto backbone = std::make_shared<const Backbone>(spec, decode_tensor(contents.at("backbone.bin"), "backbone.bin"));
    if (backbone->parameter_digest() != digest) {
        throw Error("corrupted_artifact", "backbone weights do not match their recorded digest");
    }
    if (backbone->output_width(head_config.global_average_pooling) != input_width) {
        throw Error("corrupted_artifact", "head input width does not match the backbone");
    }
    Head head(head_config, input_width, 0);
    head.deserialize(decode_tensor(contents.at("head.bin"), "head.bin"));
    return TrainedModel{std::move(backbone), std::move(head), std::move(catalog), std::move(history),
                        std::move(provenance)};
}

}  // namespace bombus::model
