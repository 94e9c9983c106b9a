#pragma once

#include "bombus/dataset.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bombus::augment {

using dataset::StandardizedImage;

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    bool operator==(const Interval& other) const = default;
};

struct RotationSpec {
    Interval degrees{-45.0, 45.0};
    bool operator==(const RotationSpec& other) const = default;
};

struct ContrastSpec {
    Interval factor{0.5, 1.5};
    bool operator==(const ContrastSpec& other) const = default;
};

struct SaltPepperSpec {
    Interval probability{0.01, 0.05};
    bool operator==(const SaltPepperSpec& other) const = default;
};

// Box sides as fractions of the image height / width.
struct OcclusionSpec {
    Interval height{0.10, 0.40};
    Interval width{0.10, 0.40};
    bool operator==(const OcclusionSpec& other) const = default;
};

using AugmentationOpSpec = std::variant<RotationSpec, ContrastSpec, SaltPepperSpec, OcclusionSpec>;

enum class OpKind { rotation, contrast, salt_pepper, occlusion };

OpKind kind_of(const AugmentationOpSpec& spec) noexcept;
std::string_view to_string(OpKind kind) noexcept;
OpKind parse_op_kind(std::string_view text);

void validate(const AugmentationOpSpec& spec);

struct AugmentationPolicy {
    std::vector<AugmentationOpSpec> ops;
    double augment_rate = 0.25;
    int min_ops = 1;
    int max_ops = 4;
    std::uint64_t seed = 0;

    bool operator==(const AugmentationPolicy& other) const = default;
};

// All four operators at their default ranges.
AugmentationPolicy default_policy(std::uint64_t seed = 0);

void validate(const AugmentationPolicy& policy);

struct Box {
    int row = 0;
    int col = 0;
    int height = 0;
    int width = 0;
};

// Counter-clockwise about the image centre; out-of-frame samples are black.
// Multiples of 90 degrees are exact index permutations where the geometry allows.
StandardizedImage rotate(const StandardizedImage& image, double degrees);

// clamp(mean_c + factor * (x - mean_c), 0, 1) with mean_c the per-channel mean.
StandardizedImage contrast(const StandardizedImage& image, double factor);

// Each pixel position independently becomes black or white (all channels)
// with probability p.
StandardizedImage salt_pepper(const StandardizedImage& image, double p, std::uint64_t seed);

// Zeroes the box after clipping it to the frame.
StandardizedImage occlude(const StandardizedImage& image, Box box);

struct AppliedOp {
    OpKind kind;
    // rotation: {degrees}; contrast: {factor}; salt_pepper: {p, seed};
    // occlusion: {row, col, height, width}
    std::vector<double> parameters;
};

struct AugmentationResult {
    StandardizedImage image;
    std::vector<AppliedOp> applied_ops;
};

/// Samples k in [min_ops, max_ops] distinct operators and their parameters
/// from a generator seeded with draw_seed, then applies them in the order the
/// policy lists them.
AugmentationResult apply_policy(const StandardizedImage& image, const AugmentationPolicy& policy,
                                std::uint64_t draw_seed);

// Per-record seed used by build_augmented_set; stable across runs.
std::uint64_t record_seed(const AugmentationPolicy& policy, std::string_view record_id) noexcept;

// Indices of train records picked for augmentation (Bernoulli at augment_rate).
std::vector<std::size_t> select_for_augmentation(const dataset::DatasetManifest& manifest,
                                                 const AugmentationPolicy& policy);

// "<stem>.aug<n>.png" beside the original.
std::string augmented_path(std::string_view original_path, int n = 1);

struct AugmentedSetOptions {
    dataset::Geometry geometry = dataset::kGeometry224;
    // When false only the manifest is produced (no image I/O).
    bool write_images = true;
};

/// Adds one augmented sibling per selected train record and writes its PNG
/// next to the original.
dataset::DatasetManifest build_augmented_set(const dataset::DatasetManifest& manifest,
                                             const AugmentationPolicy& policy,
                                             AugmentedSetOptions options = {});

}  // namespace bombus::augment
