#pragma once

#include "bombus/dataset.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bombus::model {

enum class BackboneName { vgg16, vgg19, resnet50, inception_v3 };
enum class WeightSource { pretrained, random };

std::string_view to_string(BackboneName name) noexcept;
std::string_view to_string(WeightSource source) noexcept;
BackboneName parse_backbone_name(std::string_view text);
WeightSource parse_weight_source(std::string_view text);

// Input geometry each architecture requires.
dataset::Geometry required_geometry(BackboneName name) noexcept;

struct BackboneSpec {
    BackboneName name = BackboneName::vgg16;
    dataset::Geometry input_geometry = dataset::kGeometry224;
    // Width of the globally pooled feature vector. Without pooling the head
    // sees grid * grid * feature_dim values.
    int feature_dim = 0;
    int grid = 0;
    WeightSource weight_source = WeightSource::pretrained;
    // Seeds the random-init weights; ignored for pretrained weights.
    std::uint64_t weight_seed = 0;

    bool operator==(const BackboneSpec& other) const = default;
};

// Fills geometry, grid and feature_dim from the adapter for `name`.
BackboneSpec make_backbone_spec(BackboneName name, WeightSource source = WeightSource::pretrained,
                                std::uint64_t weight_seed = 0);

/// Frozen convolutional feature extractor standing in for an architecture.
///
/// Stage 1 is a 3x3 bank over colour-opponent planes (smoothing, Sobel,
/// diagonal and Laplacian kernels for pretrained weights), rectified into
/// both polarities and average-pooled. Stage 2 is a strided 3x3 convolution
/// with ReLU, adaptively pooled (mean and max) onto the architecture's output
/// grid, followed by a 1x1 projection to feature_dim channels with ReLU.
/// Architecture-specific input scaling happens in preprocess().
///
/// Instances are immutable; features() is safe to call concurrently.
class Backbone {
public:
    explicit Backbone(BackboneSpec spec);
    // Restores persisted weights; the size must match the spec's layout.
    Backbone(BackboneSpec spec, std::vector<float> parameters);

    const BackboneSpec& spec() const noexcept { return spec_; }
    int output_width(bool global_average_pooling) const noexcept;

    // Architecture-specific channel scaling: "caffe" style BGR mean
    // subtraction for VGG/ResNet, [-1, 1] scaling for Inception.
    std::vector<float> preprocess(const dataset::StandardizedImage& image) const;

    // grid x grid x feature_dim map (channel fastest) or its global average.
    std::vector<float> features(const dataset::StandardizedImage& image,
                                bool global_average_pooling) const;

    std::span<const float> parameters() const noexcept { return parameters_; }
    std::string parameter_digest() const;

private:
    BackboneSpec spec_;
    int stage2_channels_ = 0;
    std::vector<float> parameters_;
};

}  // namespace bombus::model
