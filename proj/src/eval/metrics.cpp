#include "bombus/error.hpp"
#include "bombus/eval.hpp"

#include <fstream>
#include <sstream>

namespace bombus::eval {

namespace {

std::size_t label_index(const dataset::ClassCatalog& catalog, std::string_view label) {
    const auto index = catalog.index_of(label);
    if (!index) {
        throw Error("unknown_label", "label '" + std::string(label) + "' is not in the catalog");
    }
    return *index;
}

const std::string& truth_for(const TruthMap& truth, const std::string& id) {
    const auto it = truth.find(id);
    if (it == truth.end()) {
        throw Error("missing_truth", "no truth label for image '" + id + "'");
    }
    return it->second;
}

}  // namespace

TruthMap parse_truth_csv(std::string_view text, std::string_view origin) {
    std::istringstream in{std::string(text)};
    std::string line;
    TruthMap truth;
    std::size_t line_number = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = ensemble::split_csv_line(line);
        const std::string where = std::string(origin) + ":" + std::to_string(line_number) + ": ";
        if (header) {
            if (fields.size() != 2 || fields[0] != "image_id" || fields[1] != "label") {
                throw Error("malformed_csv", where + "truth header must be image_id,label");
            }
            header = false;
            continue;
        }
        if (fields.size() != 2) {
            throw Error("malformed_csv", where + "expected image_id,label");
        }
        if (!truth.emplace(fields[0], fields[1]).second) {
            throw Error("duplicate_id", where + "duplicate image id '" + fields[0] + "'");
        }
    }
    if (header) {
        throw Error("malformed_csv", std::string(origin) + ": missing header");
    }
    return truth;
}

TruthMap read_truth_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("missing_file", "cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_truth_csv(buffer.str(), path.string());
}

TruthMap truth_from_manifest(const dataset::DatasetManifest& manifest, dataset::Split split) {
    TruthMap truth;
    for (const auto& record : manifest.records) {
        if (record.split == split) {
            truth.emplace(record.id, record.label);
        }
    }
    return truth;
}

std::string truth_to_csv(const TruthMap& truth) {
    std::string out = "image_id,label\n";
    for (const auto& [id, label] : truth) {
        out += ensemble::csv_field(id) + "," + ensemble::csv_field(label) + "\n";
    }
    return out;
}

double top_k_accuracy(const ensemble::CompositeScores& scores, const TruthMap& truth, int k) {
    if (k < 1 || k > static_cast<int>(scores.catalog.size())) {
        throw Error("invalid_k", "k must lie in [1, " + std::to_string(scores.catalog.size()) + "]");
    }
    if (scores.image_ids.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (std::size_t r = 0; r < scores.image_ids.size(); ++r) {
        const auto expected = label_index(scores.catalog, truth_for(truth, scores.image_ids[r]));
        const auto order = ensemble::ranked_indices(scores.rows.row(static_cast<Eigen::Index>(r)));
        for (int i = 0; i < k; ++i) {
            if (order[static_cast<std::size_t>(i)] == expected) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(scores.image_ids.size());
}

double top_k_accuracy(const ensemble::ProbabilityMatrix& matrix, const TruthMap& truth, int k) {
    return top_k_accuracy(ensemble::as_scores(matrix), truth, k);
}

ConfusionMatrix::ConfusionMatrix(dataset::ClassCatalog catalog)
    : catalog_(std::move(catalog)), counts_(catalog_.size() * catalog_.size(), 0) {}

void ConfusionMatrix::add(std::size_t actual, std::size_t predicted, std::int64_t count) {
    if (actual >= size() || predicted >= size()) {
        throw Error("unknown_label", "confusion index outside the catalog");
    }
    if (count < 0) {
        throw Error("invalid_matrix", "confusion counts must be non-negative");
    }
    counts_[actual * size() + predicted] += count;
}

std::int64_t ConfusionMatrix::total() const noexcept {
    std::int64_t sum = 0;
    for (const auto c : counts_) {
        sum += c;
    }
    return sum;
}

std::int64_t ConfusionMatrix::row_total(std::size_t actual) const {
    std::int64_t sum = 0;
    for (std::size_t j = 0; j < size(); ++j) {
        sum += at(actual, j);
    }
    return sum;
}

std::int64_t ConfusionMatrix::column_total(std::size_t predicted) const {
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < size(); ++i) {
        sum += at(i, predicted);
    }
    return sum;
}

ConfusionMatrix confusion(std::span<const std::string> predicted, std::span<const std::string> actual,
                          const dataset::ClassCatalog& catalog) {
    if (predicted.size() != actual.size()) {
        throw Error("image_id_mismatch", "predictions and truth are not aligned");
    }
    ConfusionMatrix cm(catalog);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        cm.add(label_index(catalog, actual[i]), label_index(catalog, predicted[i]));
    }
    return cm;
}

ConfusionMatrix confusion(const std::vector<ensemble::TopKPrediction>& predictions, const TruthMap& truth,
                          const dataset::ClassCatalog& catalog) {
    ConfusionMatrix cm(catalog);
    for (const auto& prediction : predictions) {
        if (prediction.ranked_labels.empty()) {
            throw Error("invalid_input", "prediction for '" + prediction.image_id + "' is empty");
        }
        cm.add(label_index(catalog, truth_for(truth, prediction.image_id)),
               label_index(catalog, prediction.ranked_labels.front()));
    }
    return cm;
}

std::vector<PrecisionRecall> precision_recall(const ConfusionMatrix& cm) {
    std::vector<PrecisionRecall> out(cm.size());
    for (std::size_t c = 0; c < cm.size(); ++c) {
        const auto diagonal = static_cast<double>(cm.at(c, c));
        const auto row = cm.row_total(c);
        const auto column = cm.column_total(c);
        auto& pr = out[c];
        pr.recall_undefined = row == 0;
        pr.precision_undefined = column == 0;
        pr.recall = row == 0 ? 0.0 : diagonal / static_cast<double>(row);
        pr.precision = column == 0 ? 0.0 : diagonal / static_cast<double>(column);
    }
    return out;
}

Leakage leakage(const ConfusionMatrix& cm, std::string_view negative_label) {
    const auto negative = cm.catalog().index_of(negative_label);
    if (!negative) {
        throw Error("missing_negative_label", "negative label '" + std::string(negative_label) + "' is not in the catalog");
    }
    Leakage out;
    for (std::size_t row = 0; row < cm.size(); ++row) {
        if (row == *negative) {
            continue;
        }
        out.count += cm.at(row, *negative);
        out.target_total += cm.row_total(row);
    }
    out.fraction = out.target_total == 0 ? 0.0 : static_cast<double>(out.count) / static_cast<double>(out.target_total);
    return out;
}

CountSeries count_correlation_series(const ConfusionMatrix& cm, const std::map<std::string, std::int64_t>& train_counts,
                                     std::int64_t threshold) {
    const auto pr = precision_recall(cm);
    CountSeries series;
    series.threshold = threshold;
    for (std::size_t c = 0; c < cm.size(); ++c) {
        const auto& label = cm.catalog().label(c);
        const auto it = train_counts.find(label);
        if (it == train_counts.end()) {
            throw Error("missing_train_count", "no train count for class '" + label + "'");
        }
        const std::int64_t count = it->second;
        const std::int64_t fp = cm.column_total(c) - cm.at(c, c);
        series.false_positives.push_back({label, count, static_cast<double>(fp)});
        series.recall.push_back({label, count, pr[c].recall});
        series.precision.push_back({label, count, pr[c].precision});
        auto& bucket = count < threshold ? series.below : series.above;
        bucket.classes.push_back(label);
        bucket.false_positives += fp;
    }
    return series;
}

MetricsReport evaluate(const ensemble::CompositeScores& scores, const TruthMap& truth, const ReportOptions& options) {
    MetricsReport report;
    report.model_id = options.model_id;
    report.provenance = options.provenance;
    report.evaluated = static_cast<std::int64_t>(scores.image_ids.size());
    const int classes = static_cast<int>(scores.catalog.size());
    std::vector<int> ks = options.k_values;
    for (const int k : ks) {
        report.top_k.push_back({k, top_k_accuracy(scores, truth, k)});
    }
    report.top1_accuracy = top_k_accuracy(scores, truth, 1);
    if (classes >= 3) {
        report.top3_accuracy = top_k_accuracy(scores, truth, 3);
    }

    report.negative_label = options.negative_label ? options.negative_label : scores.catalog.negative_label();
    dataset::ClassCatalog catalog = scores.catalog;
    if (report.negative_label && catalog.contains(*report.negative_label)) {
        catalog = dataset::ClassCatalog(catalog.labels(), report.negative_label);
    }
    report.confusion = confusion(ensemble::top_k(scores, 1), truth, catalog);
    const auto pr = precision_recall(report.confusion);
    for (std::size_t c = 0; c < scores.catalog.size(); ++c) {
        ClassMetrics metrics;
        metrics.label = scores.catalog.label(c);
        metrics.precision = pr[c].precision;
        metrics.recall = pr[c].recall;
        metrics.precision_undefined = pr[c].precision_undefined;
        metrics.recall_undefined = pr[c].recall_undefined;
        metrics.support = report.confusion.row_total(c);
        metrics.false_positives = report.confusion.column_total(c) - report.confusion.at(c, c);
        if (options.train_counts) {
            if (const auto it = options.train_counts->find(metrics.label); it != options.train_counts->end()) {
                metrics.train_count = it->second;
            }
        }
        report.per_class.push_back(std::move(metrics));
    }

    if (report.negative_label) {
        report.leakage = leakage(report.confusion, *report.negative_label);
    }
    if (options.train_counts) {
        report.series = count_correlation_series(report.confusion, *options.train_counts, options.threshold);
    }
    return report;
}

}  // namespace bombus::eval
