#include "bombus/dataset.hpp"
#include "bombus/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <fstream>
#include <iterator>

namespace bombus::dataset {

namespace fs = std::filesystem;

namespace {

void check_geometry(Geometry target) {
    if (target.height <= 0 || target.width <= 0) {
        throw Error("invalid_geometry", "target geometry must be positive");
    }
}

// Float RGB mat (CV_32FC3) -> standardized image, clamped to [0, 1].
StandardizedImage from_mat(const cv::Mat& rgb) {
    StandardizedImage out(rgb.rows, rgb.cols);
    auto pixels = out.pixels();
    for (int r = 0; r < rgb.rows; ++r) {
        const float* row = rgb.ptr<float>(r);
        std::copy(row, row + rgb.cols * 3, pixels.begin() + static_cast<std::ptrdiff_t>(r) * rgb.cols * 3);
    }
    for (auto& v : pixels) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
    return out;
}

cv::Mat to_mat(const StandardizedImage& image) {
    cv::Mat mat(image.height(), image.width(), CV_32FC3);
    const auto pixels = image.pixels();
    for (int r = 0; r < image.height(); ++r) {
        std::copy_n(pixels.begin() + static_cast<std::ptrdiff_t>(r) * image.width() * 3,
                    image.width() * 3, mat.ptr<float>(r));
    }
    return mat;
}

cv::Mat resize_to(const cv::Mat& src, Geometry target) {
    if (src.rows == target.height && src.cols == target.width) {
        return src.clone();
    }
    const bool shrinking = target.height <= src.rows && target.width <= src.cols;
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(target.width, target.height), 0, 0,
               shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
    return dst;
}

}  // namespace

StandardizedImage::StandardizedImage(int height, int width, float fill)
    : height_(height), width_(width),
      pixels_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3, fill) {
    if (height <= 0 || width <= 0) {
        throw Error("invalid_geometry", "image dimensions must be positive");
    }
}

StandardizedImage::StandardizedImage(int height, int width, std::vector<float> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (height <= 0 || width <= 0) {
        throw Error("invalid_geometry", "image dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3) {
        throw Error("invalid_geometry", "pixel buffer does not match H x W x 3");
    }
    for (float v : pixels_) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw Error("invalid_pixels", "pixel values must lie in [0, 1]");
        }
    }
}

RawImage decode_image(std::span<const std::uint8_t> encoded) {
    if (encoded.empty()) {
        throw Error("undecodable_image", "empty image data");
    }
    const cv::Mat buffer(1, static_cast<int>(encoded.size()), CV_8U,
                         const_cast<std::uint8_t*>(encoded.data()));
    cv::Mat mat;
    try {
        mat = cv::imdecode(buffer, cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception&) {
        mat.release();
    }
    if (mat.empty()) {
        throw Error("undecodable_image", "image bytes could not be decoded");
    }
    if (mat.depth() == CV_16U) {
        mat.convertTo(mat, CV_8U, 1.0 / 257.0);
    } else if (mat.depth() != CV_8U) {
        throw Error("undecodable_image", "unsupported sample depth");
    }
    switch (mat.channels()) {
        case 1: break;
        case 3: cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB); break;
        case 4: cv::cvtColor(mat, mat, cv::COLOR_BGRA2RGBA); break;
        default: throw Error("undecodable_image", "unsupported channel count");
    }
    RawImage out;
    out.height = mat.rows;
    out.width = mat.cols;
    out.channels = mat.channels();
    if (!mat.isContinuous()) {
        mat = mat.clone();
    }
    out.data.assign(mat.datastart, mat.dataend);
    return out;
}

RawImage read_image(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("missing_file", "image not found: " + path.string());
    }
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

StandardizedImage standardize(const RawImage& image, Geometry target) {
    check_geometry(target);
    if (image.height <= 0 || image.width <= 0) {
        throw Error("invalid_geometry", "image has a zero dimension");
    }
    if (image.channels != 1 && image.channels != 3 && image.channels != 4) {
        throw Error("undecodable_image", "images must have 1, 3 or 4 channels");
    }
    const std::size_t expected =
        static_cast<std::size_t>(image.height) * image.width * static_cast<std::size_t>(image.channels);
    if (image.data.size() != expected) {
        throw Error("undecodable_image", "raw buffer does not match its dimensions");
    }
    const cv::Mat raw(image.height, image.width, CV_8UC(image.channels),
                      const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat rgb;
    if (image.channels == 1) {
        cv::cvtColor(raw, rgb, cv::COLOR_GRAY2RGB);
    } else if (image.channels == 4) {
        cv::cvtColor(raw, rgb, cv::COLOR_RGBA2RGB);
    } else {
        rgb = raw;
    }
    // Exact division, so a same-size input maps to v / 255 bit for bit.
    cv::Mat scaled(rgb.rows, rgb.cols, CV_32FC3);
    for (int r = 0; r < rgb.rows; ++r) {
        const auto* in = rgb.ptr<std::uint8_t>(r);
        auto* out = scaled.ptr<float>(r);
        for (int i = 0; i < rgb.cols * 3; ++i) {
            out[i] = static_cast<float>(in[i]) / 255.0f;
        }
    }
    return from_mat(resize_to(scaled, target));
}

StandardizedImage standardize(std::span<const std::uint8_t> encoded, Geometry target) {
    return standardize(decode_image(encoded), target);
}

StandardizedImage standardize(const StandardizedImage& image, Geometry target) {
    check_geometry(target);
    if (image.geometry() == target) {
        return image;
    }
    return from_mat(resize_to(to_mat(image), target));
}

StandardizedImage load_standardized(const fs::path& path, Geometry target) {
    return standardize(read_image(path), target);
}

std::vector<std::uint8_t> encode_png(const StandardizedImage& image) {
    cv::Mat bgr(image.height(), image.width(), CV_8UC3);
    for (int r = 0; r < image.height(); ++r) {
        auto* row = bgr.ptr<std::uint8_t>(r);
        for (int c = 0; c < image.width(); ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                const float v = image.at(r, c, 2 - ch) * 255.0f + 0.5f;
                row[c * 3 + ch] = static_cast<std::uint8_t>(std::clamp(v, 0.0f, 255.0f));
            }
        }
    }
    std::vector<std::uint8_t> out;
    cv::imencode(".png", bgr, out);
    return out;
}

namespace {

cv::Mat raw_to_bgr_mat(const RawImage& image) {
    const cv::Mat raw(image.height, image.width, CV_8UC(image.channels),
                      const_cast<std::uint8_t*>(image.data.data()));
    cv::Mat mat;
    switch (image.channels) {
        case 1: mat = raw.clone(); break;
        case 3: cv::cvtColor(raw, mat, cv::COLOR_RGB2BGR); break;
        case 4: cv::cvtColor(raw, mat, cv::COLOR_RGBA2BGRA); break;
        default: throw Error("undecodable_image", "unsupported channel count");
    }
    return mat;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RawImage& image) {
    std::vector<std::uint8_t> out;
    cv::imencode(".png", raw_to_bgr_mat(image), out);
    return out;
}

std::vector<std::uint8_t> encode_jpeg(const RawImage& image, int quality) {
    std::vector<std::uint8_t> out;
    cv::imencode(".jpg", raw_to_bgr_mat(image), out, {cv::IMWRITE_JPEG_QUALITY, quality});
    return out;
}

void write_png(const StandardizedImage& image, const fs::path& path) {
    const auto bytes = encode_png(image);
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("unwritable_output", "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("unwritable_output", "failed writing " + path.string());
    }
}

}  // namespace bombus::dataset
