#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace bombus::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("bombus-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

dataset::StandardizedImage random_image(int height, int width, Rng& rng) {
    dataset::StandardizedImage image(height, width);
    for (auto& v : image.pixels()) {
        v = static_cast<float>(rng.uniform());
    }
    return image;
}

dataset::StandardizedImage shape_image(Shape shape, int size, Rng& rng) {
    dataset::StandardizedImage image(size, size);
    const float background = static_cast<float>(rng.uniform(0.0, 0.25));
    float colour[3];
    for (auto& c : colour) {
        c = static_cast<float>(rng.uniform(0.55, 1.0));
    }
    const double s = size;
    const double radius = rng.uniform(0.18, 0.28) * s;
    const double cy = rng.uniform(0.35, 0.65) * s;
    const double cx = rng.uniform(0.35, 0.65) * s;
    const double period = rng.uniform(0.12, 0.18) * s;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            bool inside = false;
            const double dy = r + 0.5 - cy;
            const double dx = c + 0.5 - cx;
            switch (shape) {
                case Shape::disc: inside = dx * dx + dy * dy <= radius * radius; break;
                case Shape::square: inside = std::abs(dx) <= radius && std::abs(dy) <= radius; break;
                case Shape::stripes: inside = std::fmod(r + 0.5, period) < period / 2.0; break;
            }
            for (int ch = 0; ch < 3; ++ch) {
                const float noise = static_cast<float>(rng.uniform(-0.05, 0.05));
                image.at(r, c, ch) = std::clamp((inside ? colour[ch] : background) + noise, 0.0f, 1.0f);
            }
        }
    }
    return image;
}

dataset::DatasetManifest write_shape_manifest(const fs::path& dir, int per_class, int size, std::uint64_t seed,
                                              double train_fraction, int test_per_class) {
    dataset::DatasetManifest manifest;
    manifest.catalog = dataset::ClassCatalog(shape_labels());
    manifest.seed = seed;
    manifest.base_dir = dir;
    Rng rng(seed);
    for (std::size_t k = 0; k < shape_labels().size(); ++k) {
        const auto& label = shape_labels()[k];
        for (int i = 0; i < per_class + test_per_class; ++i) {
            dataset::ImageRecord record;
            record.id = label + "-" + std::to_string(i);
            record.path = "images/" + label + "/" + std::to_string(i) + ".png";
            record.label = label;
            record.split = i < per_class ? dataset::Split::unassigned : dataset::Split::test;
            dataset::write_png(shape_image(static_cast<Shape>(k), size, rng), dir / record.path);
            manifest.records.push_back(record);
        }
    }
    manifest = dataset::split(manifest, train_fraction, seed);
    dataset::save_manifest(manifest, dir / "manifest.jsonl");
    return manifest;
}

void write_shape_tree(const fs::path& root, int per_class, int size, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t k = 0; k < shape_labels().size(); ++k) {
        for (int i = 0; i < per_class; ++i) {
            dataset::write_png(shape_image(static_cast<Shape>(k), size, rng),
                               root / shape_labels()[k] / (std::to_string(i) + ".png"));
        }
    }
}

std::vector<std::string> make_ids(std::size_t n, const std::string& prefix) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(prefix + std::to_string(i));
    }
    return ids;
}

dataset::ClassCatalog letter_catalog(std::size_t classes) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < classes; ++i) {
        labels.push_back("c" + std::to_string(i));
    }
    return dataset::ClassCatalog(labels);
}

ensemble::ProbabilityMatrix random_probabilities(const std::vector<std::string>& ids,
                                                 const dataset::ClassCatalog& catalog, Rng& rng) {
    ensemble::ProbabilityMatrix m{ids, catalog,
                                  Eigen::MatrixXd(static_cast<Eigen::Index>(ids.size()),
                                                  static_cast<Eigen::Index>(catalog.size()))};
    for (Eigen::Index i = 0; i < m.rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.rows.cols(); ++j) {
            m.rows(i, j) = -std::log(1.0 - rng.uniform());
        }
        m.rows.row(i) /= m.rows.row(i).sum();
    }
    return m;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

}  // namespace bombus::testing
