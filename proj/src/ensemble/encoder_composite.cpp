#include "bombus/ensemble.hpp"
#include "bombus/error.hpp"

namespace bombus::ensemble {

EncoderComposite build_encoder_composite(std::vector<std::shared_ptr<const model::TrainedModel>> members,
                                         const model::HeadConfig& head, std::uint64_t seed) {
    if (members.size() < 2) {
        throw Error("invalid_composite", "an encoder composite needs at least two members");
    }
    const auto& catalog = members.front()->catalog;
    int width = 0;
    for (const auto& member : members) {
        if (!member->catalog.same_labels(catalog)) {
            throw Error("catalog_mismatch", "composite members disagree on the catalog");
        }
        width += model::feature_width(*member);
    }
    model::HeadConfig config = head;
    if (config.output_classes != static_cast<int>(catalog.size())) {
        throw Error("catalog_mismatch", "composite head outputs " + std::to_string(config.output_classes) +
                                            " classes, members use " + std::to_string(catalog.size()));
    }
    // The members' pooling already happened; the flag has no meaning here.
    config.global_average_pooling = true;
    return EncoderComposite{std::move(members), model::Head(config, width, seed), catalog, {}};
}

Eigen::MatrixXf encode(const EncoderComposite& composite, std::span<const dataset::StandardizedImage> images) {
    if (images.empty()) {
        throw Error("empty_input", "no images to encode");
    }
    Eigen::MatrixXf out(composite.input_width(), static_cast<Eigen::Index>(images.size()));
    Eigen::Index offset = 0;
    for (const auto& member : composite.members) {
        const auto geometry = member->backbone->spec().input_geometry;
        std::vector<dataset::StandardizedImage> resized;
        resized.reserve(images.size());
        for (const auto& image : images) {
            resized.push_back(dataset::standardize(image, geometry));
        }
        const Eigen::MatrixXf features = model::extract_features(*member, resized);  // N x width
        out.middleRows(offset, features.cols()) = features.transpose();
        offset += features.cols();
    }
    return out;
}

namespace {

model::FeatureSet feature_set(const EncoderComposite& composite, std::span<const dataset::StandardizedImage> images,
                              std::span<const int> labels) {
    model::FeatureSet set;
    set.labels.assign(labels.begin(), labels.end());
    if (images.empty()) {
        set.features.resize(composite.input_width(), 0);
        return set;
    }
    set.features = encode(composite, images);
    return set;
}

}  // namespace

void train_encoder_composite(EncoderComposite& composite, std::span<const dataset::StandardizedImage> train_images,
                             std::span<const int> train_labels, std::span<const dataset::StandardizedImage> val_images,
                             std::span<const int> val_labels, const model::TrainConfig& tc,
                             const model::OptimizerConfig& oc) {
    if (train_images.empty()) {
        throw Error("empty_train_split", "the train split is empty");
    }
    const auto train = feature_set(composite, train_images, train_labels);
    const auto val = feature_set(composite, val_images, val_labels);
    composite.history = model::train_head(composite.head, train, val, tc, oc);
}

void train_encoder_composite(EncoderComposite& composite, const dataset::DatasetManifest& manifest,
                             const model::TrainConfig& tc, const model::OptimizerConfig& oc,
                             const model::EpochCallback& on_epoch) {
    if (!manifest.catalog.same_labels(composite.catalog)) {
        throw Error("catalog_mismatch", "manifest catalog differs from the composite members'");
    }
    // Load once at the largest member geometry; encode() resizes per member.
    dataset::Geometry geometry = dataset::kGeometry224;
    for (const auto& member : composite.members) {
        const auto g = member->backbone->spec().input_geometry;
        if (g.height * g.width > geometry.height * geometry.width) {
            geometry = g;
        }
    }
    std::vector<dataset::StandardizedImage> train_images;
    std::vector<dataset::StandardizedImage> val_images;
    std::vector<int> train_labels;
    std::vector<int> val_labels;
    for (const auto& record : manifest.records) {
        const bool augmented = record.source == dataset::Source::augmented;
        const bool is_train = record.split == dataset::Split::train && (!augmented || tc.use_augmented);
        const bool is_val = record.split == dataset::Split::validation && !augmented;
        if (!is_train && !is_val) {
            continue;
        }
        auto image = dataset::load_standardized(manifest.resolve(record), geometry);
        const int label = static_cast<int>(*manifest.catalog.index_of(record.label));
        (is_train ? train_images : val_images).push_back(std::move(image));
        (is_train ? train_labels : val_labels).push_back(label);
    }
    if (train_images.empty()) {
        throw Error("empty_train_split", "the manifest has no train records");
    }
    const auto train = feature_set(composite, train_images, train_labels);
    const auto val = feature_set(composite, val_images, val_labels);
    composite.history = model::train_head(composite.head, train, val, tc, oc, on_epoch);
}

ProbabilityMatrix predict(const EncoderComposite& composite, std::vector<std::string> image_ids,
                          std::span<const dataset::StandardizedImage> images) {
    if (image_ids.size() != images.size()) {
        throw Error("invalid_input", "one image id is needed per image");
    }
    ProbabilityMatrix out{std::move(image_ids), composite.catalog, composite.head.predict(encode(composite, images))};
    validate(out);
    return out;
}

}  // namespace bombus::ensemble
