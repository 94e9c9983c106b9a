#include "bombus/error.hpp"
#include "bombus/model.hpp"

#include <cmath>

namespace bombus::model {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-7;

}  // namespace

void validate(const OptimizerConfig& config) {
    if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
        throw Error("invalid_optimizer", "learning_rate must be > 0");
    }
    if (config.decay) {
        if (!(config.decay->rate > 0.0 && config.decay->rate <= 1.0)) {
            throw Error("invalid_optimizer", "decay rate must lie in (0, 1]");
        }
        if (config.decay->interval < 1) {
            throw Error("invalid_optimizer", "decay interval must be >= 1");
        }
    }
    if (config.weight_decay && !(*config.weight_decay >= 0.0)) {
        throw Error("invalid_optimizer", "weight_decay must be >= 0");
    }
    if (config.momentum) {
        if (config.kind != OptimizerKind::sgd) {
            throw Error("invalid_optimizer", "momentum applies to sgd only");
        }
        if (!(*config.momentum >= 0.0 && *config.momentum < 1.0)) {
            throw Error("invalid_optimizer", "momentum must lie in [0, 1)");
        }
    }
}

double lr_at(std::int64_t step, const OptimizerConfig& config, std::int64_t steps_per_epoch) {
    if (!config.decay || step <= 0) {
        return config.learning_rate;
    }
    std::int64_t interval = config.decay->interval;
    if (config.decay->unit == DecayUnit::epochs) {
        interval *= std::max<std::int64_t>(steps_per_epoch, 1);
    }
    const auto periods = static_cast<double>(step / interval);
    return config.learning_rate * std::pow(config.decay->rate, periods);
}

Optimizer::Optimizer(OptimizerConfig config) : config_(std::move(config)) {
    validate(config_);
}

void Optimizer::step(std::vector<Head::Block>& blocks, const std::vector<Eigen::VectorXf>& gradients, double lr) {
    if (blocks.size() != gradients.size()) {
        throw Error("internal", "gradient/parameter block count mismatch");
    }
    if (first_moment_.empty()) {
        for (const auto& block : blocks) {
            first_moment_.push_back(Eigen::VectorXf::Zero(static_cast<Eigen::Index>(block.values.size())));
            second_moment_.push_back(Eigen::VectorXf::Zero(static_cast<Eigen::Index>(block.values.size())));
        }
    }
    ++iterations_;
    const double decay = config_.weight_decay.value_or(0.0);

    for (std::size_t b = 0; b < blocks.size(); ++b) {
        Eigen::Map<Eigen::VectorXf> w(blocks[b].values.data(), static_cast<Eigen::Index>(blocks[b].values.size()));
        const auto& g = gradients[b];
        if (config_.kind == OptimizerKind::adam) {
            auto& m = first_moment_[b];
            auto& v = second_moment_[b];
            m = static_cast<float>(kAdamBeta1) * m + static_cast<float>(1.0 - kAdamBeta1) * g;
            v = static_cast<float>(kAdamBeta2) * v + static_cast<float>(1.0 - kAdamBeta2) * g.cwiseAbs2();
            const double t = static_cast<double>(iterations_);
            const auto corrected = static_cast<float>(lr * std::sqrt(1.0 - std::pow(kAdamBeta2, t)) /
                                                      (1.0 - std::pow(kAdamBeta1, t)));
            w.array() -= corrected * m.array() / (v.array().sqrt() + static_cast<float>(kAdamEpsilon));
        } else if (config_.momentum && *config_.momentum > 0.0) {
            auto& velocity = first_moment_[b];
            velocity = static_cast<float>(*config_.momentum) * velocity - static_cast<float>(lr) * g;
            w += velocity;
        } else {
            w -= static_cast<float>(lr) * g;
        }
        // Decoupled weight decay on kernels.
        if (decay > 0.0 && blocks[b].is_kernel) {
            w *= static_cast<float>(1.0 - lr * decay);
        }
    }
}

}  // namespace bombus::model
