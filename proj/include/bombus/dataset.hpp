#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bombus::dataset {

enum class Split { train, validation, test, unassigned };
enum class Source { target, negative, augmented };

std::string_view to_string(Split split) noexcept;
std::string_view to_string(Source source) noexcept;
Split parse_split(std::string_view text);
Source parse_source(std::string_view text);

/// Ordered class labels; the position of a label is its class index
/// everywhere downstream (softmax columns, confusion rows, CSV headers).
class ClassCatalog {
public:
    ClassCatalog() = default;
    explicit ClassCatalog(std::vector<std::string> labels,
                          std::optional<std::string> negative_label = std::nullopt);

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& label(std::size_t index) const { return labels_.at(index); }
    std::optional<std::size_t> index_of(std::string_view label) const;
    bool contains(std::string_view label) const { return index_of(label).has_value(); }

    const std::optional<std::string>& negative_label() const noexcept { return negative_label_; }
    std::optional<std::size_t> negative_index() const;

    // Same labels in the same order. The negative designation is ignored.
    bool same_labels(const ClassCatalog& other) const noexcept { return labels_ == other.labels_; }
    bool operator==(const ClassCatalog& other) const = default;

private:
    std::vector<std::string> labels_;
    std::optional<std::string> negative_label_;
};

struct ImageRecord {
    std::string id;
    std::string path;  // relative to the manifest directory unless absolute
    std::string label;
    Split split = Split::unassigned;
    Source source = Source::target;
    std::optional<std::string> parent_id;

    bool operator==(const ImageRecord& other) const = default;
};

struct DatasetManifest {
    ClassCatalog catalog;
    std::vector<ImageRecord> records;
    std::uint64_t seed = 0;
    // Directory that relative record paths are resolved against.
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const ImageRecord& record) const;
    const ImageRecord* find(std::string_view id) const;

    bool operator==(const DatasetManifest& other) const = default;
};

struct ManifestSummary {
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> empty_classes;  // catalog order
};

/// Checks every record invariant; throws bombus::Error naming the offending
/// record. Classes without records are reported, not rejected.
ManifestSummary validate(const DatasetManifest& manifest);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
// JSON Lines text as written by save_manifest.
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                               std::string_view origin = "<memory>");

std::map<std::string, std::size_t> class_distribution(const DatasetManifest& manifest);
// Per-class counts in catalog order, restricted to one split.
std::vector<std::size_t> class_counts(const DatasetManifest& manifest, Split split);

/// Stratified train/validation assignment. Test records are never touched;
/// augmented records follow their parent. Within a class, records are ranked
/// by a seeded hash of their id and the first round(fraction * n) go to train,
/// so the result depends only on (ids, fraction, seed).
DatasetManifest split(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed);

struct NegativeOptions {
    bool allow_test_split = false;
};

DatasetManifest inject_negative_class(const DatasetManifest& manifest,
                                      std::span<const ImageRecord> negatives,
                                      NegativeOptions options = {});

// Images ---------------------------------------------------------------------

struct Geometry {
    int height = 0;
    int width = 0;

    bool operator==(const Geometry& other) const = default;
};

inline constexpr Geometry kGeometry224{224, 224};
inline constexpr Geometry kGeometry299{299, 299};

/// Decoded pixels before standardization: interleaved 8-bit samples with
/// 1 (gray), 3 (RGB) or 4 (RGBA) channels.
struct RawImage {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;
};

/// H x W x 3 interleaved RGB with values in [0, 1].
class StandardizedImage {
public:
    StandardizedImage() = default;
    StandardizedImage(int height, int width, float fill = 0.0f);
    StandardizedImage(int height, int width, std::vector<float> pixels);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    Geometry geometry() const noexcept { return {height_, width_}; }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
    }

    float& at(int row, int col, int channel) {
        return pixels_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
    }
    float at(int row, int col, int channel) const {
        return pixels_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
    }

    std::span<float> pixels() noexcept { return pixels_; }
    std::span<const float> pixels() const noexcept { return pixels_; }

    bool operator==(const StandardizedImage& other) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<float> pixels_;
};

RawImage decode_image(std::span<const std::uint8_t> encoded);
RawImage read_image(const std::filesystem::path& path);

// Gray is replicated, alpha dropped, values scaled to [0, 1], and the result
// stretched or shrunk to `target` without preserving aspect ratio.
StandardizedImage standardize(const RawImage& image, Geometry target);
StandardizedImage standardize(std::span<const std::uint8_t> encoded, Geometry target);
// Resize only; identity when the geometry already matches.
StandardizedImage standardize(const StandardizedImage& image, Geometry target);
StandardizedImage load_standardized(const std::filesystem::path& path, Geometry target);

std::vector<std::uint8_t> encode_png(const StandardizedImage& image);
std::vector<std::uint8_t> encode_png(const RawImage& image);
std::vector<std::uint8_t> encode_jpeg(const RawImage& image, int quality = 95);
void write_png(const StandardizedImage& image, const std::filesystem::path& path);

}  // namespace bombus::dataset
