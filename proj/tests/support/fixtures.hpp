#pragma once

#include "bombus/dataset.hpp"
#include "bombus/ensemble.hpp"
#include "bombus/rng.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bombus::testing {

// Unique directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& child) const { return path_ / child; }

private:
    std::filesystem::path path_;
};

enum class Shape { disc, square, stripes };

inline const std::vector<std::string>& shape_labels() {
    static const std::vector<std::string> labels{"disc", "square", "stripes"};
    return labels;
}

// A bright shape of random colour, size and position on a dark noisy field.
dataset::StandardizedImage shape_image(Shape shape, int size, Rng& rng);

dataset::StandardizedImage random_image(int height, int width, Rng& rng);

// Writes `per_class` PNGs per shape under <dir>/images/<label>/ and returns a
// manifest saved as <dir>/manifest.jsonl, split with `train_fraction`.
dataset::DatasetManifest write_shape_manifest(const std::filesystem::path& dir, int per_class, int size,
                                              std::uint64_t seed, double train_fraction = 1.0,
                                              int test_per_class = 0);

// Class directories <root>/<label>/<n>.png for `dataset build`.
void write_shape_tree(const std::filesystem::path& root, int per_class, int size, std::uint64_t seed);

std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "img");
dataset::ClassCatalog letter_catalog(std::size_t classes);

// Rows drawn from a flat Dirichlet, renormalised so each sums to one.
ensemble::ProbabilityMatrix random_probabilities(const std::vector<std::string>& ids,
                                                 const dataset::ClassCatalog& catalog, Rng& rng);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace bombus::testing
