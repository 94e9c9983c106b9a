#include "bombus/ensemble.hpp"
#include "bombus/error.hpp"

#include <algorithm>
#include <numeric>

namespace bombus::ensemble {

CompositeScores sum_softmax(std::span<const ProbabilityMatrix> matrices) {
    if (matrices.empty()) {
        throw Error("empty_ensemble", "sum_softmax needs at least one member");
    }
    const auto& first = matrices.front();
    for (const auto& member : matrices) {
        validate(member);
        if (!member.catalog.same_labels(first.catalog)) {
            throw Error("catalog_mismatch", "ensemble members disagree on the catalog labels or their order");
        }
        if (member.image_ids != first.image_ids) {
            throw Error("image_id_mismatch", "ensemble members disagree on image ids or their order; align them first");
        }
    }
    CompositeScores out{first.image_ids, first.catalog, Eigen::MatrixXd::Zero(first.rows.rows(), first.rows.cols()),
                        static_cast<int>(matrices.size())};
    for (const auto& member : matrices) {
        out.rows += member.rows;
    }
    return out;
}

std::vector<std::size_t> ranked_indices(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    std::vector<std::size_t> order(static_cast<std::size_t>(row.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return row(static_cast<Eigen::Index>(a)) > row(static_cast<Eigen::Index>(b));
    });
    return order;
}

std::vector<TopKPrediction> top_k(const CompositeScores& scores, int k) {
    if (k < 1 || k > static_cast<int>(scores.catalog.size())) {
        throw Error("invalid_k", "k must lie in [1, " + std::to_string(scores.catalog.size()) + "]");
    }
    std::vector<TopKPrediction> out;
    out.reserve(scores.image_ids.size());
    for (Eigen::Index r = 0; r < scores.rows.rows(); ++r) {
        const auto order = ranked_indices(scores.rows.row(r));
        TopKPrediction prediction{scores.image_ids[static_cast<std::size_t>(r)], {}, {}};
        for (int i = 0; i < k; ++i) {
            prediction.ranked_labels.push_back(scores.catalog.label(order[static_cast<std::size_t>(i)]));
            prediction.scores.push_back(scores.rows(r, static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)])));
        }
        out.push_back(std::move(prediction));
    }
    return out;
}

ProbabilityMatrix predict(const model::TrainedModel& model, std::vector<std::string> image_ids,
                          std::span<const dataset::StandardizedImage> images) {
    if (image_ids.size() != images.size()) {
        throw Error("invalid_input", "one image id is needed per image");
    }
    ProbabilityMatrix out{std::move(image_ids), model.catalog, model::predict_probs(model, images)};
    validate(out);
    return out;
}

}  // namespace bombus::ensemble
