#include "bombus/model.hpp"

#include <algorithm>
#include <limits>

namespace bombus::model {

namespace {

bool fires_at(const TrainingHistory& history, std::size_t length, int patience) {
    const std::size_t window = static_cast<std::size_t>(std::max(patience, 1));
    if (length < window + 1) {
        return false;
    }
    const auto& epochs = history.epochs;
    // Running minimum of validation loss before the window opens.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + window < length; ++i) {
        if (!epochs[i].val_loss) {
            return false;
        }
        best = std::min(best, *epochs[i].val_loss);
    }
    for (std::size_t i = length - window; i < length; ++i) {
        if (!epochs[i].val_loss || !(*epochs[i].val_loss > best)) {
            return false;
        }
        if (epochs[i].train_loss > epochs[i - 1].train_loss) {
            return false;
        }
    }
    return true;
}

}  // namespace

bool detect_overfit(const TrainingHistory& history, int patience) {
    return fires_at(history, history.epochs.size(), patience);
}

std::optional<int> first_overfit_epoch(const TrainingHistory& history, int patience) {
    for (std::size_t length = 1; length <= history.epochs.size(); ++length) {
        if (fires_at(history, length, patience)) {
            return static_cast<int>(length);
        }
    }
    return std::nullopt;
}

}  // namespace bombus::model
