#include "bombus/backbone.hpp"
#include "bombus/error.hpp"
#include "bombus/rng.hpp"
#include "bombus/sha256.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace bombus::model {

namespace {

constexpr int kStage1Kernels = 18;  // 3 colour-opponent planes x 6 spatial kernels
constexpr int kStage1Channels = 2 * kStage1Kernels;
constexpr int kKernelTaps = 9;

struct Architecture {
    dataset::Geometry geometry;
    int grid;
    int feature_dim;
    int stage2_channels;
    bool caffe_preprocessing;
};

Architecture architecture(BackboneName name) {
    switch (name) {
        case BackboneName::vgg16: return {dataset::kGeometry224, 7, 512, 48, true};
        case BackboneName::vgg19: return {dataset::kGeometry224, 7, 512, 64, true};
        case BackboneName::resnet50: return {dataset::kGeometry224, 7, 2048, 64, true};
        case BackboneName::inception_v3: return {dataset::kGeometry299, 8, 2048, 64, false};
    }
    throw Error("unknown_backbone", "unknown backbone");
}

std::size_t stage1_size() { return kStage1Kernels * 3 * kKernelTaps + kStage1Kernels; }
std::size_t stage2_size(int s2) { return static_cast<std::size_t>(s2) * kStage1Channels * kKernelTaps + s2; }
std::size_t projection_size(int s2, int dim) { return static_cast<std::size_t>(dim) * 2 * s2 + dim; }

// Analytic stage-1 bank: opponent colour weights x spatial derivative kernels.
void fill_analytic_stage1(std::span<float> out) {
    constexpr std::array<std::array<float, 3>, 3> kOpponent{{
        {1.0f / 3, 1.0f / 3, 1.0f / 3},
        {0.5f, -0.5f, 0.0f},
        {-0.25f, -0.25f, 0.5f},
    }};
    constexpr std::array<std::array<float, 9>, 6> kSpatial{{
        {1 / 16.f, 2 / 16.f, 1 / 16.f, 2 / 16.f, 4 / 16.f, 2 / 16.f, 1 / 16.f, 2 / 16.f, 1 / 16.f},
        {-0.25f, 0.f, 0.25f, -0.5f, 0.f, 0.5f, -0.25f, 0.f, 0.25f},
        {-0.25f, -0.5f, -0.25f, 0.f, 0.f, 0.f, 0.25f, 0.5f, 0.25f},
        {0.f, 0.25f, 0.5f, -0.25f, 0.f, 0.25f, -0.5f, -0.25f, 0.f},
        {0.5f, 0.25f, 0.f, 0.25f, 0.f, -0.25f, 0.f, -0.25f, -0.5f},
        {0.f, 0.5f, 0.f, 0.5f, -2.f, 0.5f, 0.f, 0.5f, 0.f},
    }};
    std::size_t k = 0;
    for (const auto& colour : kOpponent) {
        for (const auto& spatial : kSpatial) {
            for (int c = 0; c < 3; ++c) {
                for (int t = 0; t < kKernelTaps; ++t) {
                    out[(k * 3 + c) * kKernelTaps + t] = colour[c] * spatial[t];
                }
            }
            ++k;
        }
    }
    std::fill(out.begin() + kStage1Kernels * 3 * kKernelTaps, out.end(), 0.0f);
}

void fill_he(std::span<float> weights, std::span<float> bias, int fan_in, Rng& rng) {
    const double scale = std::sqrt(2.0 / fan_in);
    for (auto& w : weights) {
        w = static_cast<float>(rng.normal() * scale);
    }
    std::fill(bias.begin(), bias.end(), 0.0f);
}

std::vector<float> generate_parameters(const BackboneSpec& spec, int s2) {
    const std::size_t n1 = stage1_size();
    const std::size_t n2 = stage2_size(s2);
    const std::size_t n3 = projection_size(s2, spec.feature_dim);
    std::vector<float> params(n1 + n2 + n3);
    std::span<float> all(params);
    auto stage1 = all.subspan(0, n1);
    auto stage2 = all.subspan(n1, n2);
    auto proj = all.subspan(n1 + n2, n3);

    const std::string name(to_string(spec.name));
    const bool pretrained = spec.weight_source == WeightSource::pretrained;
    Rng rng(pretrained ? hash_string("bombus.pretrained." + name)
                       : mix_seed(spec.weight_seed, hash_string("bombus.random." + name)));
    if (pretrained) {
        fill_analytic_stage1(stage1);
    } else {
        fill_he(stage1.first(kStage1Kernels * 3 * kKernelTaps), stage1.last(kStage1Kernels), 3 * kKernelTaps, rng);
    }
    fill_he(stage2.first(n2 - s2), stage2.last(s2), kStage1Channels * kKernelTaps, rng);
    fill_he(proj.first(n3 - spec.feature_dim), proj.last(spec.feature_dim), 2 * s2, rng);
    return params;
}

// 3x3 convolution with zero padding 1 and the given stride over an
// interleaved H x W x C map. Weights are [out][in][tap]; bias follows.
std::vector<float> conv3x3(std::span<const float> input, int height, int width, int in_channels,
                           std::span<const float> weights, std::span<const float> bias, int out_channels,
                           int stride, int& out_height, int& out_width) {
    out_height = (height + stride - 1) / stride;
    out_width = (width + stride - 1) / stride;
    std::vector<float> output(static_cast<std::size_t>(out_height) * out_width * out_channels);
    std::vector<float> patch(static_cast<std::size_t>(in_channels) * kKernelTaps);
    for (int r = 0; r < out_height; ++r) {
        for (int c = 0; c < out_width; ++c) {
            // Gather the patch as [in][tap] to match the weight layout.
            for (int dy = 0; dy < 3; ++dy) {
                for (int dx = 0; dx < 3; ++dx) {
                    const int y = r * stride + dy - 1;
                    const int x = c * stride + dx - 1;
                    const int tap = dy * 3 + dx;
                    const bool inside = y >= 0 && x >= 0 && y < height && x < width;
                    const float* src = inside ? &input[(static_cast<std::size_t>(y) * width + x) * in_channels] : nullptr;
                    for (int ch = 0; ch < in_channels; ++ch) {
                        patch[static_cast<std::size_t>(ch) * kKernelTaps + tap] = inside ? src[ch] : 0.0f;
                    }
                }
            }
            float* dst = &output[(static_cast<std::size_t>(r) * out_width + c) * out_channels];
            for (int o = 0; o < out_channels; ++o) {
                const float* w = &weights[static_cast<std::size_t>(o) * patch.size()];
                float acc = bias[o];
                for (std::size_t i = 0; i < patch.size(); ++i) {
                    acc += w[i] * patch[i];
                }
                dst[o] = acc;
            }
        }
    }
    return output;
}

}  // namespace

std::string_view to_string(BackboneName name) noexcept {
    switch (name) {
        case BackboneName::vgg16: return "vgg16";
        case BackboneName::vgg19: return "vgg19";
        case BackboneName::resnet50: return "resnet50";
        case BackboneName::inception_v3: return "inception_v3";
    }
    return "vgg16";
}

std::string_view to_string(WeightSource source) noexcept {
    return source == WeightSource::pretrained ? "pretrained" : "random";
}

BackboneName parse_backbone_name(std::string_view text) {
    if (text == "vgg16") return BackboneName::vgg16;
    if (text == "vgg19") return BackboneName::vgg19;
    if (text == "resnet50") return BackboneName::resnet50;
    if (text == "inception_v3") return BackboneName::inception_v3;
    throw Error("unknown_backbone", "unknown backbone '" + std::string(text) + "'");
}

WeightSource parse_weight_source(std::string_view text) {
    if (text == "pretrained") return WeightSource::pretrained;
    if (text == "random") return WeightSource::random;
    throw Error("invalid_config", "unknown weight source '" + std::string(text) + "'");
}

dataset::Geometry required_geometry(BackboneName name) noexcept {
    return name == BackboneName::inception_v3 ? dataset::kGeometry299 : dataset::kGeometry224;
}

BackboneSpec make_backbone_spec(BackboneName name, WeightSource source, std::uint64_t weight_seed) {
    const auto arch = architecture(name);
    return BackboneSpec{name, arch.geometry, arch.feature_dim, arch.grid, source, weight_seed};
}

Backbone::Backbone(BackboneSpec spec) : spec_(spec) {
    const auto arch = architecture(spec_.name);
    if (spec_.input_geometry != arch.geometry) {
        throw Error("geometry_mismatch", std::string(to_string(spec_.name)) + " requires " +
                                             std::to_string(arch.geometry.height) + "x" +
                                             std::to_string(arch.geometry.width) + " input");
    }
    if (spec_.feature_dim != arch.feature_dim || spec_.grid != arch.grid) {
        throw Error("invalid_backbone", "feature geometry does not match the " +
                                            std::string(to_string(spec_.name)) + " adapter");
    }
    stage2_channels_ = arch.stage2_channels;
    parameters_ = generate_parameters(spec_, stage2_channels_);
}

Backbone::Backbone(BackboneSpec spec, std::vector<float> parameters) : Backbone(spec) {
    if (parameters.size() != parameters_.size()) {
        throw Error("corrupted_artifact", "backbone parameter count does not match the architecture");
    }
    parameters_ = std::move(parameters);
}

int Backbone::output_width(bool global_average_pooling) const noexcept {
    return global_average_pooling ? spec_.feature_dim : spec_.grid * spec_.grid * spec_.feature_dim;
}

std::vector<float> Backbone::preprocess(const dataset::StandardizedImage& image) const {
    std::vector<float> out(image.pixels().size());
    const auto pixels = image.pixels();
    const bool caffe = architecture(spec_.name).caffe_preprocessing;
    // ImageNet channel means in BGR order, on the 0-255 scale.
    constexpr std::array<float, 3> kMeanBgr{103.939f, 116.779f, 123.68f};
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        for (int ch = 0; ch < 3; ++ch) {
            if (caffe) {
                const float value = pixels[p * 3 + (2 - ch)] * 255.0f;
                out[p * 3 + ch] = (value - kMeanBgr[ch]) / 255.0f;
            } else {
                out[p * 3 + ch] = pixels[p * 3 + ch] * 2.0f - 1.0f;
            }
        }
    }
    return out;
}

std::vector<float> Backbone::features(const dataset::StandardizedImage& image, bool global_average_pooling) const {
    if (image.geometry() != spec_.input_geometry) {
        throw Error("geometry_mismatch", "image is " + std::to_string(image.height()) + "x" +
                                             std::to_string(image.width()) + ", " +
                                             std::string(to_string(spec_.name)) + " expects " +
                                             std::to_string(spec_.input_geometry.height) + "x" +
                                             std::to_string(spec_.input_geometry.width));
    }
    const int s2 = stage2_channels_;
    const std::span<const float> all(parameters_);
    const auto stage1 = all.subspan(0, stage1_size());
    const auto stage2 = all.subspan(stage1_size(), stage2_size(s2));
    const auto proj = all.subspan(stage1_size() + stage2_size(s2));

    // Stage 1: strided analytic bank, both polarities rectified.
    int h1 = 0;
    int w1 = 0;
    const auto input = preprocess(image);
    const auto responses = conv3x3(input, image.height(), image.width(), 3,
                                   stage1.first(kStage1Kernels * 3 * kKernelTaps),
                                   stage1.last(kStage1Kernels), kStage1Kernels, 2, h1, w1);
    const int hp = h1 / 2;
    const int wp = w1 / 2;
    std::vector<float> pooled(static_cast<std::size_t>(hp) * wp * kStage1Channels, 0.0f);
    for (int r = 0; r < hp; ++r) {
        for (int c = 0; c < wp; ++c) {
            float* dst = &pooled[(static_cast<std::size_t>(r) * wp + c) * kStage1Channels];
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const float* src = &responses[(static_cast<std::size_t>(2 * r + dy) * w1 + 2 * c + dx) * kStage1Kernels];
                    for (int k = 0; k < kStage1Kernels; ++k) {
                        dst[k] += 0.25f * std::max(src[k], 0.0f);
                        dst[kStage1Kernels + k] += 0.25f * std::max(-src[k], 0.0f);
                    }
                }
            }
        }
    }

    // Stage 2: strided 3x3 convolution with ReLU.
    int h2 = 0;
    int w2 = 0;
    auto maps = conv3x3(pooled, hp, wp, kStage1Channels, stage2.first(stage2.size() - s2), stage2.last(s2), s2, 2, h2, w2);
    for (auto& v : maps) {
        v = std::max(v, 0.0f);
    }

    // Adaptive mean/max pooling onto the output grid, then 1x1 projection.
    const int grid = spec_.grid;
    const int dim = spec_.feature_dim;
    const auto proj_weights = proj.first(proj.size() - dim);
    const auto proj_bias = proj.last(dim);
    std::vector<float> cell(2 * static_cast<std::size_t>(s2));
    std::vector<float> out(static_cast<std::size_t>(grid) * grid * dim);
    for (int gy = 0; gy < grid; ++gy) {
        const int y0 = gy * h2 / grid;
        const int y1 = std::max(y0 + 1, ((gy + 1) * h2 + grid - 1) / grid);
        for (int gx = 0; gx < grid; ++gx) {
            const int x0 = gx * w2 / grid;
            const int x1 = std::max(x0 + 1, ((gx + 1) * w2 + grid - 1) / grid);
            std::fill(cell.begin(), cell.begin() + s2, 0.0f);
            std::fill(cell.begin() + s2, cell.end(), 0.0f);
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const float* src = &maps[(static_cast<std::size_t>(y) * w2 + x) * s2];
                    for (int k = 0; k < s2; ++k) {
                        cell[k] += src[k];
                        cell[s2 + k] = std::max(cell[s2 + k], src[k]);
                    }
                }
            }
            const float inv = 1.0f / static_cast<float>((y1 - y0) * (x1 - x0));
            for (int k = 0; k < s2; ++k) {
                cell[k] *= inv;
            }
            float* dst = &out[(static_cast<std::size_t>(gy) * grid + gx) * dim];
            for (int o = 0; o < dim; ++o) {
                const float* w = &proj_weights[static_cast<std::size_t>(o) * cell.size()];
                float acc = proj_bias[o];
                for (std::size_t i = 0; i < cell.size(); ++i) {
                    acc += w[i] * cell[i];
                }
                dst[o] = std::max(acc, 0.0f);
            }
        }
    }
    if (!global_average_pooling) {
        return out;
    }
    std::vector<float> pooled_out(dim, 0.0f);
    for (int cell_index = 0; cell_index < grid * grid; ++cell_index) {
        for (int o = 0; o < dim; ++o) {
            pooled_out[o] += out[static_cast<std::size_t>(cell_index) * dim + o];
        }
    }
    const float inv_cells = 1.0f / static_cast<float>(grid * grid);
    for (auto& v : pooled_out) {
        v *= inv_cells;
    }
    return pooled_out;
}

std::string Backbone::parameter_digest() const {
    return sha256_hex(std::string_view(reinterpret_cast<const char*>(parameters_.data()),
                                       parameters_.size() * sizeof(float)));
}

}  // namespace bombus::model
