#pragma once

#include "bombus/backbone.hpp"
#include "bombus/dataset.hpp"
#include "bombus/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bombus::model {

// Head ----------------------------------------------------------------------

inline constexpr int kMaxHiddenLayers = 3;
inline constexpr int kMinNodes = 64;
inline constexpr int kMaxNodes = 2048;
inline constexpr double kMaxDropout = 0.75;

/// Fully connected layers trained on top of the frozen backbone. Hidden
/// layers use ReLU (Dense -> [BatchNorm] -> ReLU -> Dropout); the output layer
/// is a softmax over output_classes.
struct HeadConfig {
    int hidden_layers = 0;
    std::vector<int> nodes_per_layer;
    double dropout = 0.0;
    bool batch_norm = false;
    bool global_average_pooling = true;
    int output_classes = 30;

    bool operator==(const HeadConfig& other) const = default;
};

void validate(const HeadConfig& config);

struct DenseLayer {
    Eigen::MatrixXf weights;  // out x in
    Eigen::VectorXf bias;
};

struct BatchNormLayer {
    Eigen::VectorXf gamma;
    Eigen::VectorXf beta;
    Eigen::VectorXf moving_mean;
    Eigen::VectorXf moving_variance;
};

// Activations kept from a training forward pass for backprop.
struct ForwardCache {
    struct Hidden {
        Eigen::MatrixXf input;
        Eigen::MatrixXf normalized;  // x-hat, batch norm only
        Eigen::VectorXf inv_std;
        Eigen::MatrixXf activated;   // post-normalisation, pre-ReLU
        Eigen::MatrixXf dropout_mask;
    };
    std::vector<Hidden> hidden;
    Eigen::MatrixXf last;  // input to the output layer
};

class Head {
public:
    Head() = default;
    // Glorot-uniform dense weights, zero biases.
    Head(HeadConfig config, int input_width, std::uint64_t seed);

    const HeadConfig& config() const noexcept { return config_; }
    int input_width() const noexcept { return input_width_; }
    std::size_t trainable_parameter_count() const noexcept;

    // Samples are columns: inputs is input_width x N. Returns N x C
    // probabilities in double precision.
    Eigen::MatrixXd predict(const Eigen::MatrixXf& inputs) const;
    // Last hidden activation (inference mode), or the inputs when there are
    // no hidden layers. width x N.
    Eigen::MatrixXf penultimate(const Eigen::MatrixXf& inputs) const;
    int penultimate_width() const noexcept;

    // Training mode forward pass (batch statistics, dropout); returns logits.
    Eigen::MatrixXf forward_train(const Eigen::MatrixXf& inputs, Rng& rng, ForwardCache& cache);
    // Gradients w.r.t. every block of parameter_blocks(), given dLoss/dLogits.
    std::vector<Eigen::VectorXf> backward(const ForwardCache& cache, const Eigen::MatrixXf& grad_logits) const;

    // Trainable tensors in a fixed order; the flag marks dense kernels (the
    // only tensors subject to weight decay).
    struct Block {
        std::span<float> values;
        bool is_kernel;
    };
    std::vector<Block> parameter_blocks();
    // Every persisted float: trainable tensors then moving statistics.
    std::vector<float> serialize() const;
    void deserialize(std::span<const float> values);

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

private:
    Eigen::MatrixXf hidden_inference(const Eigen::MatrixXf& inputs) const;

    HeadConfig config_;
    int input_width_ = 0;
    std::vector<DenseLayer> layers_;     // hidden layers then the output layer
    std::vector<BatchNormLayer> norms_;  // one per hidden layer when enabled
};

// Optimizer -----------------------------------------------------------------

enum class OptimizerKind { adam, sgd };
enum class DecayUnit { steps, epochs };

struct LrDecay {
    double rate = 0.96;
    std::int64_t interval = 100;
    DecayUnit unit = DecayUnit::steps;

    bool operator==(const LrDecay& other) const = default;
};

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    std::optional<LrDecay> decay;
    std::optional<double> weight_decay;
    std::optional<double> momentum;  // sgd only

    bool operator==(const OptimizerConfig& other) const = default;
};

void validate(const OptimizerConfig& config);

/// learning_rate * rate^floor(step / interval). With DecayUnit::epochs the
/// interval is scaled by steps_per_epoch.
double lr_at(std::int64_t step, const OptimizerConfig& config, std::int64_t steps_per_epoch = 1);

class Optimizer {
public:
    explicit Optimizer(OptimizerConfig config);
    // One update of every block at the given learning rate.
    void step(std::vector<Head::Block>& blocks, const std::vector<Eigen::VectorXf>& gradients, double lr);

private:
    OptimizerConfig config_;
    std::int64_t iterations_ = 0;
    std::vector<Eigen::VectorXf> first_moment_;
    std::vector<Eigen::VectorXf> second_moment_;
};

// Training ------------------------------------------------------------------

struct TrainConfig {
    int epochs = 10;
    int batch_size = 64;
    double train_fraction = 0.85;
    std::uint64_t seed = 0;
    bool use_augmented = false;
    std::optional<int> overfit_patience;  // unset: never stop early

    bool operator==(const TrainConfig& other) const = default;
};

void validate(const TrainConfig& config);

struct EpochRecord {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    std::optional<double> val_loss;  // unset when the validation split is empty
    std::optional<double> val_accuracy;
    double learning_rate = 0.0;

    bool operator==(const EpochRecord& other) const = default;
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    std::optional<int> stopped_early_at;  // 1-based epoch at which the detector fired

    bool operator==(const TrainingHistory& other) const = default;
};

/// True when, at the end of `history`, validation loss has stayed above its
/// running minimum for max(patience, 1) consecutive epochs while training
/// loss did not increase over the same epochs.
bool detect_overfit(const TrainingHistory& history, int patience);
// First 1-based epoch at which detect_overfit would fire, if any.
std::optional<int> first_overfit_epoch(const TrainingHistory& history, int patience);

struct Model {
    std::shared_ptr<const Backbone> backbone;
    Head head;
};

struct TrainedModel {
    std::shared_ptr<const Backbone> backbone;
    Head head;
    dataset::ClassCatalog catalog;
    TrainingHistory history;
    // Resolved configuration snapshot and seeds, kept verbatim (JSON text).
    std::string provenance;
};

Model build_model(const BackboneSpec& backbone, const HeadConfig& head, std::uint64_t seed = 0);

// Labelled feature columns for head training.
struct FeatureSet {
    Eigen::MatrixXf features;  // width x N
    std::vector<int> labels;
};

using EpochCallback = std::function<void(int epoch, const EpochRecord&)>;

/// Mini-batch categorical cross-entropy on precomputed features. Batches are
/// reshuffled every epoch from the seed; validation data is fixed.
TrainingHistory train_head(Head& head, const FeatureSet& train, const FeatureSet& validation,
                           const TrainConfig& tc, const OptimizerConfig& oc,
                           const EpochCallback& on_epoch = {});

FeatureSet compute_features(const Backbone& backbone, bool global_average_pooling,
                            std::span<const dataset::StandardizedImage> images, std::span<const int> labels);

struct TrainOptions {
    std::string provenance;
    EpochCallback on_epoch;
};

TrainedModel train(const Model& model, const dataset::DatasetManifest& manifest, const TrainConfig& tc,
                   const OptimizerConfig& oc, const TrainOptions& options = {});

// N x C softmax rows in input order.
Eigen::MatrixXd predict_probs(const TrainedModel& model, std::span<const dataset::StandardizedImage> images);
// N x width penultimate activations.
Eigen::MatrixXf extract_features(const TrainedModel& model, std::span<const dataset::StandardizedImage> images);
int feature_width(const TrainedModel& model) noexcept;

// Artifacts -----------------------------------------------------------------

inline constexpr int kArtifactVersion = 1;

void save_model(const TrainedModel& model, const std::filesystem::path& directory);
// Verifies checksums and version; when `expected_catalog` is given the stored
// catalog must match it label for label.
TrainedModel load_model(const std::filesystem::path& directory,
                        const dataset::ClassCatalog* expected_catalog = nullptr);

}  // namespace bombus::model
