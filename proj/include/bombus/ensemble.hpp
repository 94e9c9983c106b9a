#pragma once

#include "bombus/dataset.hpp"
#include "bombus/model.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bombus::ensemble {

inline constexpr double kRowSumTolerance = 1e-5;
inline constexpr double kCompositeSumTolerance = 1e-4;

/// Softmax rows (N x C) for an ordered list of images; the interchange unit
/// between models, composites and evaluation.
struct ProbabilityMatrix {
    std::vector<std::string> image_ids;
    dataset::ClassCatalog catalog;
    Eigen::MatrixXd rows;
};

/// Element-wise sum of `members` probability matrices; rows sum to members.
struct CompositeScores {
    std::vector<std::string> image_ids;
    dataset::ClassCatalog catalog;
    Eigen::MatrixXd rows;
    int members = 1;
};

struct TopKPrediction {
    std::string image_id;
    std::vector<std::string> ranked_labels;
    std::vector<double> scores;
};

void validate(const ProbabilityMatrix& matrix);
void validate(const CompositeScores& scores);

// A single member viewed as a composite (members = 1).
CompositeScores as_scores(const ProbabilityMatrix& matrix);

// Reorders rows to `image_ids`; the id sets must be identical.
ProbabilityMatrix align(const ProbabilityMatrix& matrix, std::span<const std::string> image_ids);

/// Sums member rows without renormalising. Members must agree on catalog
/// order and on image id order; nothing is reindexed silently.
CompositeScores sum_softmax(std::span<const ProbabilityMatrix> matrices);

// Highest k labels per image, descending; equal scores rank by ascending
// catalog index.
std::vector<TopKPrediction> top_k(const CompositeScores& scores, int k);
std::vector<std::size_t> ranked_indices(const Eigen::Ref<const Eigen::RowVectorXd>& row);

ProbabilityMatrix predict(const model::TrainedModel& model, std::vector<std::string> image_ids,
                          std::span<const dataset::StandardizedImage> images);

// Interchange CSV: `image_id,<label_1>,...,<label_C>`, 17 significant digits.
std::string to_csv(const Eigen::MatrixXd& rows, std::span<const std::string> image_ids,
                   const dataset::ClassCatalog& catalog);
void write_csv(const ProbabilityMatrix& matrix, const std::filesystem::path& path);
void write_csv(const CompositeScores& scores, const std::filesystem::path& path);
ProbabilityMatrix read_probability_csv(const std::filesystem::path& path);
// Accepts probability or composite files; `members` is inferred from the row sums.
CompositeScores read_scores_csv(const std::filesystem::path& path);
ProbabilityMatrix parse_probability_csv(std::string_view text, std::string_view origin = "<memory>");
CompositeScores parse_scores_csv(std::string_view text, std::string_view origin = "<memory>");

// Minimal RFC 4180 field splitting (quotes, doubled quotes).
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_field(std::string_view text);

// Encoder composite ---------------------------------------------------------

/// Frozen members whose penultimate features are concatenated and fed to a
/// new trainable head.
struct EncoderComposite {
    std::vector<std::shared_ptr<const model::TrainedModel>> members;
    model::Head head;
    dataset::ClassCatalog catalog;
    model::TrainingHistory history;

    int input_width() const noexcept { return head.input_width(); }
};

EncoderComposite build_encoder_composite(std::vector<std::shared_ptr<const model::TrainedModel>> members,
                                         const model::HeadConfig& head, std::uint64_t seed = 0);

// Concatenated member features, width x N. Images are re-standardized to
// each member's geometry as needed.
Eigen::MatrixXf encode(const EncoderComposite& composite, std::span<const dataset::StandardizedImage> images);

// Trains only the new head, on features cached once per image.
void train_encoder_composite(EncoderComposite& composite, const dataset::DatasetManifest& manifest,
                             const model::TrainConfig& tc, const model::OptimizerConfig& oc,
                             const model::EpochCallback& on_epoch = {});
void train_encoder_composite(EncoderComposite& composite, std::span<const dataset::StandardizedImage> train_images,
                             std::span<const int> train_labels, std::span<const dataset::StandardizedImage> val_images,
                             std::span<const int> val_labels, const model::TrainConfig& tc,
                             const model::OptimizerConfig& oc);

ProbabilityMatrix predict(const EncoderComposite& composite, std::vector<std::string> image_ids,
                          std::span<const dataset::StandardizedImage> images);

}  // namespace bombus::ensemble
