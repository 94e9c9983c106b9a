#include "bombus/error.hpp"
#include "bombus/model.hpp"

#include <cmath>

namespace bombus::model {

namespace {

constexpr float kBatchNormEpsilon = 1e-3f;
constexpr float kBatchNormMomentum = 0.99f;

Eigen::VectorXf as_vector(const Eigen::MatrixXf& m) {
    return Eigen::Map<const Eigen::VectorXf>(m.data(), m.size());
}

}  // namespace

void validate(const HeadConfig& config) {
    if (config.hidden_layers < 0 || config.hidden_layers > kMaxHiddenLayers) {
        throw Error("invalid_head", "hidden_layers must lie in [0, 3], got " + std::to_string(config.hidden_layers));
    }
    if (static_cast<int>(config.nodes_per_layer.size()) != config.hidden_layers) {
        throw Error("invalid_head", "nodes_per_layer must list one width per hidden layer");
    }
    for (const int nodes : config.nodes_per_layer) {
        if (nodes < kMinNodes || nodes > kMaxNodes) {
            throw Error("invalid_head", "hidden layer width must lie in [64, 2048], got " + std::to_string(nodes));
        }
    }
    if (!(config.dropout >= 0.0 && config.dropout <= kMaxDropout)) {
        throw Error("invalid_head", "dropout must lie in [0, 0.75]");
    }
    if (config.output_classes < 1) {
        throw Error("invalid_head", "output_classes must be positive");
    }
}

Head::Head(HeadConfig config, int input_width, std::uint64_t seed)
    : config_(std::move(config)), input_width_(input_width) {
    validate(config_);
    if (input_width_ <= 0) {
        throw Error("invalid_head", "head input width must be positive");
    }
    Rng rng(mix_seed(seed, hash_string("bombus.head")));
    int in = input_width_;
    auto make_dense = [&](int out) {
        DenseLayer layer;
        const double limit = std::sqrt(6.0 / (in + out));
        layer.weights.resize(out, in);
        for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
                layer.weights(i, j) = static_cast<float>(rng.uniform(-limit, limit));
            }
        }
        layer.bias = Eigen::VectorXf::Zero(out);
        in = out;
        return layer;
    };
    for (const int nodes : config_.nodes_per_layer) {
        layers_.push_back(make_dense(nodes));
        if (config_.batch_norm) {
            norms_.push_back({Eigen::VectorXf::Ones(nodes), Eigen::VectorXf::Zero(nodes),
                              Eigen::VectorXf::Zero(nodes), Eigen::VectorXf::Ones(nodes)});
        }
    }
    layers_.push_back(make_dense(config_.output_classes));
}

std::size_t Head::trainable_parameter_count() const noexcept {
    std::size_t count = 0;
    for (const auto& layer : layers_) {
        count += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    }
    for (const auto& norm : norms_) {
        count += static_cast<std::size_t>(norm.gamma.size() + norm.beta.size());
    }
    return count;
}

int Head::penultimate_width() const noexcept {
    return config_.hidden_layers == 0 ? input_width_ : config_.nodes_per_layer.back();
}

namespace {

// Column-at-a-time affine map so a sample's result does not depend on its
// position in the batch.
Eigen::MatrixXf affine_per_sample(const Eigen::MatrixXf& weights, const Eigen::VectorXf& bias,
                                  const Eigen::MatrixXf& inputs) {
    Eigen::MatrixXf out(weights.rows(), inputs.cols());
    Eigen::VectorXf column(inputs.rows());
    for (Eigen::Index n = 0; n < inputs.cols(); ++n) {
        column = inputs.col(n);
        out.col(n).noalias() = weights * column;
        out.col(n) += bias;
    }
    return out;
}

}  // namespace

Eigen::MatrixXf Head::hidden_inference(const Eigen::MatrixXf& inputs) const {
    if (inputs.rows() != input_width_) {
        throw Error("geometry_mismatch", "head expects " + std::to_string(input_width_) + " input features, got " +
                                             std::to_string(inputs.rows()));
    }
    Eigen::MatrixXf a = inputs;
    for (int l = 0; l < config_.hidden_layers; ++l) {
        Eigen::MatrixXf z = affine_per_sample(layers_[l].weights, layers_[l].bias, a);
        if (config_.batch_norm) {
            const auto& norm = norms_[l];
            const Eigen::VectorXf scale =
                norm.gamma.array() / (norm.moving_variance.array() + kBatchNormEpsilon).sqrt();
            const Eigen::VectorXf shift = norm.beta.array() - norm.moving_mean.array() * scale.array();
            z = (z.array().colwise() * scale.array()).colwise() + shift.array();
        }
        a = z.cwiseMax(0.0f);
    }
    return a;
}

Eigen::MatrixXf Head::penultimate(const Eigen::MatrixXf& inputs) const {
    return hidden_inference(inputs);
}

Eigen::MatrixXd Head::predict(const Eigen::MatrixXf& inputs) const {
    const Eigen::MatrixXf last = hidden_inference(inputs);
    const auto& out = layers_.back();
    const Eigen::MatrixXd logits = affine_per_sample(out.weights, out.bias, last).cast<double>();
    Eigen::MatrixXd probs(logits.cols(), logits.rows());
    for (Eigen::Index n = 0; n < logits.cols(); ++n) {
        const double max = logits.col(n).maxCoeff();
        const Eigen::VectorXd e = (logits.col(n).array() - max).exp();
        probs.row(n) = (e / e.sum()).transpose();
    }
    return probs;
}

Eigen::MatrixXf Head::forward_train(const Eigen::MatrixXf& inputs, Rng& rng, ForwardCache& cache) {
    cache.hidden.assign(static_cast<std::size_t>(config_.hidden_layers), {});
    Eigen::MatrixXf a = inputs;
    const auto n = static_cast<float>(inputs.cols());
    for (int l = 0; l < config_.hidden_layers; ++l) {
        auto& h = cache.hidden[static_cast<std::size_t>(l)];
        h.input = a;
        Eigen::MatrixXf z = affine_per_sample(layers_[l].weights, layers_[l].bias, a);
        if (config_.batch_norm) {
            auto& norm = norms_[l];
            const Eigen::VectorXf mean = z.rowwise().mean();
            const Eigen::MatrixXf centered = z.colwise() - mean;
            const Eigen::VectorXf variance = centered.array().square().rowwise().sum() / n;
            h.inv_std = (variance.array() + kBatchNormEpsilon).rsqrt();
            h.normalized = centered.array().colwise() * h.inv_std.array();
            z = (h.normalized.array().colwise() * norm.gamma.array()).colwise() + norm.beta.array();
            norm.moving_mean = kBatchNormMomentum * norm.moving_mean + (1.0f - kBatchNormMomentum) * mean;
            norm.moving_variance = kBatchNormMomentum * norm.moving_variance + (1.0f - kBatchNormMomentum) * variance;
        }
        h.activated = z;
        a = z.cwiseMax(0.0f);
        if (config_.dropout > 0.0) {
            const float keep = static_cast<float>(1.0 - config_.dropout);
            h.dropout_mask.resize(a.rows(), a.cols());
            for (Eigen::Index j = 0; j < a.cols(); ++j) {
                for (Eigen::Index i = 0; i < a.rows(); ++i) {
                    h.dropout_mask(i, j) = rng.uniform() < keep ? 1.0f / keep : 0.0f;
                }
            }
            a = a.cwiseProduct(h.dropout_mask);
        }
    }
    cache.last = a;
    const auto& out = layers_.back();
    return (out.weights * a).colwise() + out.bias;
}

std::vector<Eigen::VectorXf> Head::backward(const ForwardCache& cache, const Eigen::MatrixXf& grad_logits) const {
    const int hidden = config_.hidden_layers;
    std::vector<Eigen::VectorXf> per_layer_weight(layers_.size());
    std::vector<Eigen::VectorXf> per_layer_bias(layers_.size());
    std::vector<Eigen::VectorXf> per_norm_gamma(norms_.size());
    std::vector<Eigen::VectorXf> per_norm_beta(norms_.size());

    const auto& out = layers_.back();
    per_layer_weight.back() = as_vector(grad_logits * cache.last.transpose());
    per_layer_bias.back() = grad_logits.rowwise().sum();
    Eigen::MatrixXf grad = out.weights.transpose() * grad_logits;

    const auto n = static_cast<float>(grad_logits.cols());
    for (int l = hidden - 1; l >= 0; --l) {
        const auto& h = cache.hidden[static_cast<std::size_t>(l)];
        if (config_.dropout > 0.0) {
            grad = grad.cwiseProduct(h.dropout_mask);
        }
        grad = (h.activated.array() > 0.0f).select(grad, 0.0f);
        if (config_.batch_norm) {
            const auto& norm = norms_[l];
            per_norm_gamma[l] = (grad.cwiseProduct(h.normalized)).rowwise().sum();
            per_norm_beta[l] = grad.rowwise().sum();
            const Eigen::MatrixXf grad_hat = grad.array().colwise() * norm.gamma.array();
            const Eigen::VectorXf sum_hat = grad_hat.rowwise().sum();
            const Eigen::VectorXf sum_hat_x = grad_hat.cwiseProduct(h.normalized).rowwise().sum();
            Eigen::MatrixXf centered = (grad_hat * n).colwise() - sum_hat;
            centered.array() -= h.normalized.array().colwise() * sum_hat_x.array();
            grad = (centered.array().colwise() * (h.inv_std.array() / n)).matrix();
        }
        per_layer_weight[l] = as_vector(grad * h.input.transpose());
        per_layer_bias[l] = grad.rowwise().sum();
        if (l > 0) {
            grad = layers_[l].weights.transpose() * grad;
        }
    }

    std::vector<Eigen::VectorXf> grads;
    for (int l = 0; l < hidden; ++l) {
        grads.push_back(std::move(per_layer_weight[l]));
        grads.push_back(std::move(per_layer_bias[l]));
        if (config_.batch_norm) {
            grads.push_back(std::move(per_norm_gamma[l]));
            grads.push_back(std::move(per_norm_beta[l]));
        }
    }
    grads.push_back(std::move(per_layer_weight.back()));
    grads.push_back(std::move(per_layer_bias.back()));
    return grads;
}

std::vector<Head::Block> Head::parameter_blocks() {
    std::vector<Block> blocks;
    auto span_of = [](auto& m) { return std::span<float>(m.data(), static_cast<std::size_t>(m.size())); };
    for (int l = 0; l < config_.hidden_layers; ++l) {
        blocks.push_back({span_of(layers_[l].weights), true});
        blocks.push_back({span_of(layers_[l].bias), false});
        if (config_.batch_norm) {
            blocks.push_back({span_of(norms_[l].gamma), false});
            blocks.push_back({span_of(norms_[l].beta), false});
        }
    }
    blocks.push_back({span_of(layers_.back().weights), true});
    blocks.push_back({span_of(layers_.back().bias), false});
    return blocks;
}

std::vector<float> Head::serialize() const {
    std::vector<float> out;
    auto append = [&](const auto& m) { out.insert(out.end(), m.data(), m.data() + m.size()); };
    for (const auto& layer : layers_) {
        append(layer.weights);
        append(layer.bias);
    }
    for (const auto& norm : norms_) {
        append(norm.gamma);
        append(norm.beta);
        append(norm.moving_mean);
        append(norm.moving_variance);
    }
    return out;
}

void Head::deserialize(std::span<const float> values) {
    std::size_t offset = 0;
    auto take = [&](auto& m) {
        const auto size = static_cast<std::size_t>(m.size());
        if (offset + size > values.size()) {
            throw Error("corrupted_artifact", "head weights are truncated");
        }
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), size, m.data());
        offset += size;
    };
    for (auto& layer : layers_) {
        take(layer.weights);
        take(layer.bias);
    }
    for (auto& norm : norms_) {
        take(norm.gamma);
        take(norm.beta);
        take(norm.moving_mean);
        take(norm.moving_variance);
    }
    if (offset != values.size()) {
        throw Error("corrupted_artifact", "head weights have trailing data");
    }
}

}  // namespace bombus::model
