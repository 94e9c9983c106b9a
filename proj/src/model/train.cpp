#include "bombus/error.hpp"
#include "bombus/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace bombus::model {

namespace {

// Runs fn(i) for i in [0, n) on a few workers; results must be written to
// per-index slots so the outcome does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
    const std::size_t workers = std::min<std::size_t>(std::max(1U, std::thread::hardware_concurrency()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            (void)w;
            for (std::size_t i = next++; i < n && !failed; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

struct LossAndAccuracy {
    double loss;
    double accuracy;
};

LossAndAccuracy evaluate(const Head& head, const FeatureSet& data) {
    const Eigen::MatrixXd probs = head.predict(data.features);
    double loss = 0.0;
    std::size_t correct = 0;
    for (Eigen::Index n = 0; n < probs.rows(); ++n) {
        const int label = data.labels[static_cast<std::size_t>(n)];
        loss -= std::log(std::max(probs(n, label), 1e-300));
        Eigen::Index best = 0;
        probs.row(n).maxCoeff(&best);
        correct += best == label ? 1 : 0;
    }
    const auto count = static_cast<double>(probs.rows());
    return {loss / count, static_cast<double>(correct) / count};
}

void check_labels(const FeatureSet& set, int classes, int width, const char* name) {
    if (static_cast<std::size_t>(set.features.cols()) != set.labels.size()) {
        throw Error("internal", std::string(name) + " features and labels differ in length");
    }
    if (set.features.cols() > 0 && set.features.rows() != width) {
        throw Error("geometry_mismatch", std::string(name) + " features have the wrong width");
    }
    for (const int label : set.labels) {
        if (label < 0 || label >= classes) {
            throw Error("catalog_mismatch", std::string(name) + " label index outside the head's classes");
        }
    }
}

}  // namespace

void validate(const TrainConfig& config) {
    if (config.epochs < 1) {
        throw Error("invalid_train_config", "epochs must be >= 1");
    }
    if (config.batch_size < 1) {
        throw Error("invalid_train_config", "batch_size must be >= 1");
    }
    if (!(config.train_fraction >= 0.0 && config.train_fraction <= 1.0)) {
        throw Error("invalid_train_config", "train_fraction must lie in [0, 1]");
    }
    if (config.overfit_patience && *config.overfit_patience < 0) {
        throw Error("invalid_train_config", "overfit_patience must be >= 0");
    }
}

Model build_model(const BackboneSpec& backbone, const HeadConfig& head, std::uint64_t seed) {
    validate(head);
    auto adapter = std::make_shared<const Backbone>(backbone);
    const int width = adapter->output_width(head.global_average_pooling);
    return Model{std::move(adapter), Head(head, width, seed)};
}

TrainingHistory train_head(Head& head, const FeatureSet& train, const FeatureSet& validation,
                           const TrainConfig& tc, const OptimizerConfig& oc, const EpochCallback& on_epoch) {
    validate(tc);
    validate(oc);
    const int classes = head.config().output_classes;
    check_labels(train, classes, head.input_width(), "train");
    check_labels(validation, classes, head.input_width(), "validation");
    const auto n = static_cast<std::size_t>(train.features.cols());
    if (n == 0) {
        throw Error("empty_train_split", "the train split is empty");
    }
    const auto batch = static_cast<std::size_t>(tc.batch_size);
    if (batch > n) {
        throw Error("batch_too_large", "batch size " + std::to_string(batch) + " exceeds the " +
                                           std::to_string(n) + " train samples");
    }
    const auto steps_per_epoch = static_cast<std::int64_t>((n + batch - 1) / batch);

    Optimizer optimizer(oc);
    Rng dropout_rng(mix_seed(tc.seed, hash_string("bombus.dropout")));
    std::vector<int> order(n);
    std::int64_t step = 0;
    TrainingHistory history;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        EpochRecord record;
        record.learning_rate = lr_at(step, oc, steps_per_epoch);

        std::iota(order.begin(), order.end(), 0);
        Rng shuffle(mix_seed(mix_seed(tc.seed, hash_string("bombus.shuffle")), static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.below(i))]);
        }

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t size = std::min(batch, n - start);
            const std::vector<int> index(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(start + size));
            const Eigen::MatrixXf inputs = train.features(Eigen::all, index);

            ForwardCache cache;
            const Eigen::MatrixXf logits = head.forward_train(inputs, dropout_rng, cache);
            Eigen::MatrixXf grad(logits.rows(), logits.cols());
            double batch_loss = 0.0;
            for (Eigen::Index j = 0; j < logits.cols(); ++j) {
                const Eigen::VectorXd z = logits.col(j).cast<double>();
                const double max = z.maxCoeff();
                const Eigen::VectorXd e = (z.array() - max).exp();
                const double total = e.sum();
                const int label = train.labels[static_cast<std::size_t>(index[static_cast<std::size_t>(j)])];
                batch_loss += std::log(total) + max - z(label);
                Eigen::Index best = 0;
                z.maxCoeff(&best);
                correct += best == label ? 1 : 0;
                Eigen::VectorXd p = e / total;
                p(label) -= 1.0;
                grad.col(j) = (p / static_cast<double>(size)).cast<float>();
            }
            if (!std::isfinite(batch_loss)) {
                throw Error("non_finite_loss", "non-finite loss at epoch " + std::to_string(epoch + 1) +
                                                   ", step " + std::to_string(step));
            }
            loss_sum += batch_loss;

            const auto gradients = head.backward(cache, grad);
            auto blocks = head.parameter_blocks();
            optimizer.step(blocks, gradients, lr_at(step, oc, steps_per_epoch));
            ++step;
        }
        record.train_loss = loss_sum / static_cast<double>(n);
        record.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
        if (validation.features.cols() > 0) {
            const auto val = evaluate(head, validation);
            if (!std::isfinite(val.loss)) {
                throw Error("non_finite_loss", "non-finite validation loss at epoch " + std::to_string(epoch + 1));
            }
            record.val_loss = val.loss;
            record.val_accuracy = val.accuracy;
        }
        history.epochs.push_back(record);
        if (on_epoch) {
            on_epoch(epoch + 1, record);
        }
        if (tc.overfit_patience && detect_overfit(history, *tc.overfit_patience)) {
            history.stopped_early_at = epoch + 1;
            break;
        }
    }
    return history;
}

FeatureSet compute_features(const Backbone& backbone, bool global_average_pooling,
                            std::span<const dataset::StandardizedImage> images, std::span<const int> labels) {
    FeatureSet set;
    set.features.resize(backbone.output_width(global_average_pooling), static_cast<Eigen::Index>(images.size()));
    set.labels.assign(labels.begin(), labels.end());
    parallel_for(images.size(), [&](std::size_t i) {
        const auto f = backbone.features(images[i], global_average_pooling);
        set.features.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXf>(f.data(), static_cast<Eigen::Index>(f.size()));
    });
    return set;
}

namespace {

FeatureSet load_split(const Backbone& backbone, bool gap, const dataset::DatasetManifest& manifest,
                      const std::vector<const dataset::ImageRecord*>& records) {
    FeatureSet set;
    set.features.resize(backbone.output_width(gap), static_cast<Eigen::Index>(records.size()));
    set.labels.resize(records.size());
    parallel_for(records.size(), [&](std::size_t i) {
        const auto& record = *records[i];
        const auto image = dataset::load_standardized(manifest.resolve(record), backbone.spec().input_geometry);
        const auto f = backbone.features(image, gap);
        set.features.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXf>(f.data(), static_cast<Eigen::Index>(f.size()));
        set.labels[i] = static_cast<int>(*manifest.catalog.index_of(record.label));
    });
    return set;
}

}  // namespace

TrainedModel train(const Model& model, const dataset::DatasetManifest& manifest, const TrainConfig& tc,
                   const OptimizerConfig& oc, const TrainOptions& options) {
    validate(tc);
    validate(oc);
    if (static_cast<int>(manifest.catalog.size()) != model.head.config().output_classes) {
        throw Error("catalog_mismatch", "catalog has " + std::to_string(manifest.catalog.size()) +
                                            " classes, head outputs " +
                                            std::to_string(model.head.config().output_classes));
    }
    std::vector<const dataset::ImageRecord*> train_records;
    std::vector<const dataset::ImageRecord*> val_records;
    for (const auto& record : manifest.records) {
        const bool augmented = record.source == dataset::Source::augmented;
        if (record.split == dataset::Split::train && (!augmented || tc.use_augmented)) {
            train_records.push_back(&record);
        } else if (record.split == dataset::Split::validation && !augmented) {
            val_records.push_back(&record);
        }
    }
    if (train_records.empty()) {
        throw Error("empty_train_split", "the manifest has no train records");
    }
    if (static_cast<std::size_t>(tc.batch_size) > train_records.size()) {
        throw Error("batch_too_large", "batch size " + std::to_string(tc.batch_size) + " exceeds the " +
                                           std::to_string(train_records.size()) + " train records");
    }

    const bool gap = model.head.config().global_average_pooling;
    const auto train_set = load_split(*model.backbone, gap, manifest, train_records);
    const auto val_set = load_split(*model.backbone, gap, manifest, val_records);

    TrainedModel trained{model.backbone, model.head, manifest.catalog, {}, options.provenance};
    trained.history = train_head(trained.head, train_set, val_set, tc, oc, options.on_epoch);
    return trained;
}

Eigen::MatrixXd predict_probs(const TrainedModel& model, std::span<const dataset::StandardizedImage> images) {
    if (images.empty()) {
        throw Error("empty_input", "no images to predict");
    }
    const auto set = compute_features(*model.backbone, model.head.config().global_average_pooling, images, {});
    return model.head.predict(set.features);
}

Eigen::MatrixXf extract_features(const TrainedModel& model, std::span<const dataset::StandardizedImage> images) {
    if (images.empty()) {
        throw Error("empty_input", "no images to encode");
    }
    const auto set = compute_features(*model.backbone, model.head.config().global_average_pooling, images, {});
    return model.head.penultimate(set.features).transpose();
}

int feature_width(const TrainedModel& model) noexcept {
    return model.head.penultimate_width();
}

}  // namespace bombus::model
