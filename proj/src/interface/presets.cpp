#include "bombus/config.hpp"

#include "bombus/error.hpp"

namespace bombus::interface {

namespace {

model::HeadConfig dense_head(int layers, int nodes, double dropout, bool gap) {
    model::HeadConfig head;
    head.hidden_layers = layers;
    head.nodes_per_layer.assign(static_cast<std::size_t>(layers), nodes);
    head.dropout = dropout;
    head.global_average_pooling = gap;
    head.output_classes = 30;
    return head;
}

model::OptimizerConfig adam(double lr) {
    model::OptimizerConfig optimizer;
    optimizer.kind = model::OptimizerKind::adam;
    optimizer.learning_rate = lr;
    return optimizer;
}

model::TrainConfig schedule(int epochs, int batch, double fraction) {
    model::TrainConfig train;
    train.epochs = epochs;
    train.batch_size = batch;
    train.train_fraction = fraction;
    return train;
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"vgg19-best", "vgg16-best", "resnet50-final", "inception-best"};
    return names;
}

ModelSection preset(std::string_view name) {
    using model::BackboneName;
    using model::WeightSource;
    ModelSection section;
    section.preset = std::string(name);
    if (name == "vgg19-best") {
        section.backbone = model::make_backbone_spec(BackboneName::vgg19, WeightSource::pretrained);
        section.head = dense_head(2, 2048, 0.5, false);
        section.optimizer = adam(1e-5);
        section.optimizer.decay = model::LrDecay{0.96, 100, model::DecayUnit::steps};
        section.train = schedule(10, 64, 0.85);
    } else if (name == "vgg16-best") {
        section.backbone = model::make_backbone_spec(BackboneName::vgg16, WeightSource::pretrained);
        section.head = dense_head(3, 2048, 0.3, false);
        section.optimizer = adam(1e-4);
        section.train = schedule(20, 64, 0.80);
    } else if (name == "resnet50-final") {
        section.backbone = model::make_backbone_spec(BackboneName::resnet50, WeightSource::random);
        section.head = dense_head(0, 0, 0.0, true);
        section.optimizer = adam(5e-4);
        section.train = schedule(15, 64, 0.80);
    } else if (name == "inception-best") {
        section.backbone = model::make_backbone_spec(BackboneName::inception_v3, WeightSource::pretrained);
        section.head = dense_head(2, 1536, 0.5, true);
        section.optimizer = adam(5e-5);
        section.train = schedule(21, 12, 0.85);
    } else {
        throw Error("unknown_preset", "unknown preset '" + std::string(name) + "'");
    }
    return section;
}

}  // namespace bombus::interface
