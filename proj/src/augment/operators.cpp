#include "bombus/augment.hpp"
#include "bombus/error.hpp"
#include "bombus/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace bombus::augment {

namespace {

// Bilinear sample where every neighbour outside the frame reads as black.
float sample(const StandardizedImage& image, double y, double x, int channel) {
    const double fy = std::floor(y);
    const double fx = std::floor(x);
    const int y0 = static_cast<int>(fy);
    const int x0 = static_cast<int>(fx);
    const double wy = y - fy;
    const double wx = x - fx;
    auto at = [&](int r, int c) -> double {
        if (r < 0 || c < 0 || r >= image.height() || c >= image.width()) {
            return 0.0;
        }
        return image.at(r, c, channel);
    };
    const double top = (1.0 - wx) * at(y0, x0) + wx * at(y0, x0 + 1);
    const double bottom = (1.0 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1);
    const double value = (1.0 - wy) * top + wy * bottom;
    return static_cast<float>(std::clamp(value, 0.0, 1.0));
}

template <typename SourceIndex>
StandardizedImage permute(const StandardizedImage& image, SourceIndex source) {
    StandardizedImage out(image.height(), image.width());
    for (int r = 0; r < image.height(); ++r) {
        for (int c = 0; c < image.width(); ++c) {
            const auto [sr, sc] = source(r, c);
            for (int ch = 0; ch < 3; ++ch) {
                out.at(r, c, ch) = image.at(sr, sc, ch);
            }
        }
    }
    return out;
}

}  // namespace

StandardizedImage rotate(const StandardizedImage& image, double degrees) {
    double reduced = std::fmod(degrees, 360.0);
    if (reduced < 0.0) {
        reduced += 360.0;
    }
    const int h = image.height();
    const int w = image.width();
    if (reduced == 0.0) {
        return image;
    }
    if (reduced == 180.0) {
        return permute(image, [&](int r, int c) { return std::array{h - 1 - r, w - 1 - c}; });
    }
    if (h == w && reduced == 90.0) {
        return permute(image, [&](int r, int c) { return std::array{c, w - 1 - r}; });
    }
    if (h == w && reduced == 270.0) {
        return permute(image, [&](int r, int c) { return std::array{h - 1 - c, r}; });
    }

    const double theta = reduced * std::numbers::pi / 180.0;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double cy = (h - 1) / 2.0;
    const double cx = (w - 1) / 2.0;
    StandardizedImage out(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            // Inverse map of a visual counter-clockwise turn (rows grow downward).
            const double x = c - cx;
            const double y = r - cy;
            const double sx = x * cos_t - y * sin_t + cx;
            const double sy = x * sin_t + y * cos_t + cy;
            for (int ch = 0; ch < 3; ++ch) {
                out.at(r, c, ch) = sample(image, sy, sx, ch);
            }
        }
    }
    return out;
}

StandardizedImage contrast(const StandardizedImage& image, double factor) {
    if (!(factor >= 0.0) || !std::isfinite(factor)) {
        throw Error("invalid_parameter", "contrast factor must be a finite value >= 0");
    }
    if (factor == 1.0) {
        return image;
    }
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    const auto pixels = image.pixels();
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        mean[i % 3] += pixels[i];
    }
    for (auto& m : mean) {
        m /= static_cast<double>(image.pixel_count());
    }
    StandardizedImage out = image;
    auto target = out.pixels();
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double m = mean[i % 3];
        target[i] = static_cast<float>(std::clamp(m + factor * (pixels[i] - m), 0.0, 1.0));
    }
    return out;
}

StandardizedImage salt_pepper(const StandardizedImage& image, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) {
        throw Error("invalid_parameter", "salt-and-pepper probability must lie in [0, 1]");
    }
    StandardizedImage out = image;
    Rng rng(seed);
    for (int r = 0; r < out.height(); ++r) {
        for (int c = 0; c < out.width(); ++c) {
            if (!rng.bernoulli(p)) {
                continue;
            }
            const float value = (rng.next() & 1U) ? 1.0f : 0.0f;
            for (int ch = 0; ch < 3; ++ch) {
                out.at(r, c, ch) = value;
            }
        }
    }
    return out;
}

StandardizedImage occlude(const StandardizedImage& image, Box box) {
    const long r0 = std::max<long>(box.row, 0);
    const long c0 = std::max<long>(box.col, 0);
    const long r1 = std::min<long>(static_cast<long>(box.row) + std::max(box.height, 0), image.height());
    const long c1 = std::min<long>(static_cast<long>(box.col) + std::max(box.width, 0), image.width());
    StandardizedImage out = image;
    for (long r = r0; r < r1; ++r) {
        for (long c = c0; c < c1; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                out.at(static_cast<int>(r), static_cast<int>(c), ch) = 0.0f;
            }
        }
    }
    return out;
}

}  // namespace bombus::augment
