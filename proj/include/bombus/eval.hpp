#pragma once

#include "bombus/dataset.hpp"
#include "bombus/ensemble.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bombus::eval {

// image id -> true label
using TruthMap = std::map<std::string, std::string>;

TruthMap read_truth_csv(const std::filesystem::path& path);
TruthMap parse_truth_csv(std::string_view text, std::string_view origin = "<memory>");
// Truth for one split of a manifest.
TruthMap truth_from_manifest(const dataset::DatasetManifest& manifest, dataset::Split split);
std::string truth_to_csv(const TruthMap& truth);

/// Fraction of scored images whose true label is among their k best.
double top_k_accuracy(const ensemble::CompositeScores& scores, const TruthMap& truth, int k);
double top_k_accuracy(const ensemble::ProbabilityMatrix& matrix, const TruthMap& truth, int k);

/// Rows are actual classes, columns predicted classes.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(dataset::ClassCatalog catalog);

    const dataset::ClassCatalog& catalog() const noexcept { return catalog_; }
    std::size_t size() const noexcept { return catalog_.size(); }
    std::int64_t at(std::size_t actual, std::size_t predicted) const { return counts_[actual * size() + predicted]; }
    void add(std::size_t actual, std::size_t predicted, std::int64_t count = 1);

    std::int64_t total() const noexcept;
    std::int64_t row_total(std::size_t actual) const;
    std::int64_t column_total(std::size_t predicted) const;

    bool operator==(const ConfusionMatrix& other) const = default;

private:
    dataset::ClassCatalog catalog_;
    std::vector<std::int64_t> counts_;
};

// predicted[i] and actual[i] describe the same image.
ConfusionMatrix confusion(std::span<const std::string> predicted, std::span<const std::string> actual,
                          const dataset::ClassCatalog& catalog);
// Top-1 of each prediction against the truth map.
ConfusionMatrix confusion(const std::vector<ensemble::TopKPrediction>& predictions, const TruthMap& truth,
                          const dataset::ClassCatalog& catalog);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    // Zero denominators report 0.0 with the flag set.
    bool precision_undefined = false;
    bool recall_undefined = false;
};

std::vector<PrecisionRecall> precision_recall(const ConfusionMatrix& cm);

struct Leakage {
    std::int64_t count = 0;
    double fraction = 0.0;
    std::int64_t target_total = 0;  // images in non-negative rows
};

/// Target-class images predicted as the negative class. Negative-class rows
/// are left out of both numerator and denominator.
Leakage leakage(const ConfusionMatrix& cm, std::string_view negative_label);

struct SeriesPoint {
    std::string label;
    std::int64_t train_count = 0;
    double value = 0.0;
};

struct ThresholdBucket {
    std::vector<std::string> classes;
    std::int64_t false_positives = 0;
};

struct CountSeries {
    std::vector<SeriesPoint> false_positives;
    std::vector<SeriesPoint> recall;
    std::vector<SeriesPoint> precision;
    std::int64_t threshold = 150;
    ThresholdBucket below;  // train_count < threshold
    ThresholdBucket above;
};

inline constexpr std::int64_t kDefaultCountThreshold = 150;

CountSeries count_correlation_series(const ConfusionMatrix& cm, const std::map<std::string, std::int64_t>& train_counts,
                                     std::int64_t threshold = kDefaultCountThreshold);

// Reports ----------------------------------------------------------------------

inline constexpr int kReportSchemaVersion = 1;

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    std::int64_t support = 0;
    std::optional<std::int64_t> train_count;
    std::int64_t false_positives = 0;
};

struct TopKAccuracy {
    int k = 1;
    double accuracy = 0.0;
};

struct MetricsReport {
    std::string model_id;
    std::map<std::string, std::string> provenance;
    std::int64_t evaluated = 0;
    std::vector<TopKAccuracy> top_k;
    double top1_accuracy = 0.0;
    std::optional<double> top3_accuracy;  // unset for catalogs under 3 classes
    std::vector<ClassMetrics> per_class;
    std::optional<std::string> negative_label;
    std::optional<Leakage> leakage;
    ConfusionMatrix confusion;
    std::optional<CountSeries> series;
};

struct ReportOptions {
    std::vector<int> k_values{1, 3};
    std::int64_t threshold = kDefaultCountThreshold;
    std::optional<std::map<std::string, std::int64_t>> train_counts;
    std::optional<std::string> negative_label;
    std::string model_id = "model";
    std::map<std::string, std::string> provenance;
};

MetricsReport evaluate(const ensemble::CompositeScores& scores, const TruthMap& truth, const ReportOptions& options);

enum class ReportFormat { json, markdown };
ReportFormat parse_report_format(std::string_view text);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& document);
// Throws bombus::Error("invalid_report", ...) on the first schema violation.
void validate_report_json(const nlohmann::json& document);

struct MarkdownOptions {
    // Leaves the negative class out of the per-class table.
    bool exclude_negative = false;
};

std::string render_report(const MetricsReport& report, ReportFormat format, MarkdownOptions options = {});
// One comparison row per report: model, top-1, top-3.
std::string render_comparison(std::span<const MetricsReport> reports);

// `label,train_count,value` rows.
std::string series_csv(const std::vector<SeriesPoint>& points);
// Writes fp_vs_count.csv, recall_vs_count.csv and precision_vs_count.csv.
void write_series(const CountSeries& series, const std::filesystem::path& directory);

}  // namespace bombus::eval
