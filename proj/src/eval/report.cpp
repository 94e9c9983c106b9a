#include "bombus/error.hpp"
#include "bombus/eval.hpp"
#include "bombus/json_reader.hpp"

#include <cstdio>
#include <fstream>

namespace bombus::eval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kSchema = "bombus.metrics_report";

template <typename T>
json optional_json(const std::optional<T>& value) {
    return value ? json(*value) : json(nullptr);
}

std::string percent(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.1f%%", value * 100.0);
    return buffer;
}

std::string percent(double value, bool undefined) {
    return undefined ? percent(value) + " (undefined)" : percent(value);
}

json series_json(const std::vector<SeriesPoint>& points) {
    json out = json::array();
    for (const auto& p : points) {
        out.push_back(json{{"label", p.label}, {"train_count", p.train_count}, {"value", p.value}});
    }
    return out;
}

std::vector<SeriesPoint> series_from_json(const json& value) {
    std::vector<SeriesPoint> out;
    for (const auto& item : value) {
        JsonReader reader(item, "series");
        out.push_back({reader.get<std::string>("label"), reader.get<std::int64_t>("train_count"),
                       reader.get<double>("value")});
        reader.finish();
    }
    return out;
}

json bucket_json(const ThresholdBucket& bucket) {
    return json{{"classes", bucket.classes}, {"false_positives", bucket.false_positives}};
}

ThresholdBucket bucket_from_json(const json& value) {
    JsonReader reader(value, "threshold_summary");
    ThresholdBucket bucket{reader.get<std::vector<std::string>>("classes"),
                           reader.get<std::int64_t>("false_positives")};
    reader.finish();
    return bucket;
}

[[noreturn]] void invalid(const std::string& message) {
    throw Error("invalid_report", message);
}

void expect(bool condition, const std::string& message) {
    if (!condition) {
        invalid(message);
    }
}

bool is_ratio(const json& value) {
    return value.is_number() && value.get<double>() >= 0.0 && value.get<double>() <= 1.0;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("unwritable_output", "cannot write " + path.string());
    }
    out << text;
}

}  // namespace

ReportFormat parse_report_format(std::string_view text) {
    if (text == "json") return ReportFormat::json;
    if (text == "markdown" || text == "md") return ReportFormat::markdown;
    throw Error("unknown_format", "unknown report format '" + std::string(text) + "'");
}

json report_to_json(const MetricsReport& report) {
    json top_k = json::array();
    for (const auto& entry : report.top_k) {
        top_k.push_back(json{{"k", entry.k}, {"accuracy", entry.accuracy}});
    }
    json per_class = json::array();
    for (const auto& c : report.per_class) {
        per_class.push_back(json{{"label", c.label},
                                 {"precision", c.precision},
                                 {"precision_undefined", c.precision_undefined},
                                 {"recall", c.recall},
                                 {"recall_undefined", c.recall_undefined},
                                 {"support", c.support},
                                 {"train_count", optional_json(c.train_count)},
                                 {"false_positives", c.false_positives}});
    }
    json counts = json::array();
    for (std::size_t i = 0; i < report.confusion.size(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < report.confusion.size(); ++j) {
            row.push_back(report.confusion.at(i, j));
        }
        counts.push_back(std::move(row));
    }
    json leakage_json = nullptr;
    if (report.leakage) {
        leakage_json = json{{"negative_label", optional_json(report.negative_label)},
                            {"count", report.leakage->count},
                            {"fraction", report.leakage->fraction},
                            {"target_total", report.leakage->target_total}};
    }
    json series = nullptr;
    if (report.series) {
        series = json{{"threshold", report.series->threshold},
                      {"false_positives", series_json(report.series->false_positives)},
                      {"recall", series_json(report.series->recall)},
                      {"precision", series_json(report.series->precision)},
                      {"below_threshold", bucket_json(report.series->below)},
                      {"at_or_above_threshold", bucket_json(report.series->above)}};
    }
    return json{{"schema", kSchema},
                {"schema_version", kReportSchemaVersion},
                {"model_id", report.model_id},
                {"provenance", report.provenance},
                {"evaluated", report.evaluated},
                {"top_k", top_k},
                {"top1_accuracy", report.top1_accuracy},
                {"top3_accuracy", optional_json(report.top3_accuracy)},
                {"per_class", per_class},
                {"leakage", leakage_json},
                {"confusion", json{{"labels", report.confusion.catalog().labels()}, {"counts", counts}}},
                {"count_series", series}};
}

void validate_report_json(const json& document) {
    expect(document.is_object(), "report must be an object");
    static const std::vector<std::string> kKeys{"schema", "schema_version", "model_id", "provenance",
                                                "evaluated", "top_k", "top1_accuracy", "top3_accuracy",
                                                "per_class", "leakage", "confusion", "count_series"};
    for (const auto& key : kKeys) {
        expect(document.contains(key), "missing key '" + key + "'");
    }
    for (const auto& item : document.items()) {
        expect(std::find(kKeys.begin(), kKeys.end(), item.key()) != kKeys.end(), "unknown key '" + item.key() + "'");
    }
    expect(document["schema"] == kSchema, "wrong schema name");
    expect(document["schema_version"] == kReportSchemaVersion, "unsupported schema_version");
    expect(document["model_id"].is_string(), "model_id must be a string");
    expect(document["provenance"].is_object(), "provenance must be an object");
    expect(document["evaluated"].is_number_integer() && document["evaluated"].get<std::int64_t>() >= 0,
           "evaluated must be a non-negative integer");
    const auto evaluated = document["evaluated"].get<std::int64_t>();
    expect(document["top_k"].is_array(), "top_k must be an array");
    for (const auto& entry : document["top_k"]) {
        expect(entry.is_object() && entry.contains("k") && entry["k"].is_number_integer() && entry["k"].get<int>() >= 1,
               "top_k entries need an integer k >= 1");
        expect(entry.contains("accuracy") && is_ratio(entry["accuracy"]), "top_k accuracy must lie in [0, 1]");
    }
    expect(is_ratio(document["top1_accuracy"]), "top1_accuracy must lie in [0, 1]");
    expect(document["top3_accuracy"].is_null() || is_ratio(document["top3_accuracy"]),
           "top3_accuracy must be null or lie in [0, 1]");

    const auto& confusion = document["confusion"];
    expect(confusion.is_object() && confusion.contains("labels") && confusion.contains("counts"),
           "confusion needs labels and counts");
    expect(confusion["labels"].is_array(), "confusion labels must be an array");
    const auto classes = confusion["labels"].size();
    expect(confusion["counts"].is_array() && confusion["counts"].size() == classes, "confusion must be C x C");
    std::int64_t total = 0;
    for (const auto& row : confusion["counts"]) {
        expect(row.is_array() && row.size() == classes, "confusion must be C x C");
        for (const auto& cell : row) {
            expect(cell.is_number_integer() && cell.get<std::int64_t>() >= 0, "confusion counts must be non-negative");
            total += cell.get<std::int64_t>();
        }
    }
    expect(total == evaluated, "confusion total differs from evaluated");

    expect(document["per_class"].is_array() && document["per_class"].size() == classes,
           "per_class needs one entry per class");
    std::int64_t support = 0;
    for (const auto& entry : document["per_class"]) {
        for (const char* key : {"label", "precision", "precision_undefined", "recall", "recall_undefined",
                                "support", "train_count", "false_positives"}) {
            expect(entry.contains(key), std::string("per_class entry missing '") + key + "'");
        }
        expect(is_ratio(entry["precision"]) && is_ratio(entry["recall"]), "precision/recall must lie in [0, 1]");
        expect(entry["precision_undefined"].is_boolean() && entry["recall_undefined"].is_boolean(),
               "undefined flags must be booleans");
        expect(entry["support"].is_number_integer(), "support must be an integer");
        expect(entry["train_count"].is_null() || entry["train_count"].is_number_integer(),
               "train_count must be null or an integer");
        support += entry["support"].get<std::int64_t>();
    }
    expect(support == evaluated, "per-class support does not sum to evaluated");

    const auto& leak = document["leakage"];
    if (!leak.is_null()) {
        expect(leak.is_object() && leak.contains("count") && leak.contains("fraction") && leak.contains("target_total") &&
                   leak.contains("negative_label"),
               "leakage needs negative_label, count, fraction and target_total");
        expect(is_ratio(leak["fraction"]), "leakage fraction must lie in [0, 1]");
    }
    const auto& series = document["count_series"];
    if (!series.is_null()) {
        for (const char* key : {"threshold", "false_positives", "recall", "precision", "below_threshold",
                                "at_or_above_threshold"}) {
            expect(series.contains(key), std::string("count_series missing '") + key + "'");
        }
        for (const char* key : {"false_positives", "recall", "precision"}) {
            expect(series[key].is_array() && series[key].size() == classes,
                   std::string("count_series.") + key + " needs one point per class");
        }
    }
}

MetricsReport report_from_json(const json& document) {
    validate_report_json(document);
    MetricsReport report;
    report.model_id = document["model_id"].get<std::string>();
    report.provenance = document["provenance"].get<std::map<std::string, std::string>>();
    report.evaluated = document["evaluated"].get<std::int64_t>();
    for (const auto& entry : document["top_k"]) {
        report.top_k.push_back({entry["k"].get<int>(), entry["accuracy"].get<double>()});
    }
    report.top1_accuracy = document["top1_accuracy"].get<double>();
    if (!document["top3_accuracy"].is_null()) {
        report.top3_accuracy = document["top3_accuracy"].get<double>();
    }
    for (const auto& entry : document["per_class"]) {
        ClassMetrics c;
        c.label = entry["label"].get<std::string>();
        c.precision = entry["precision"].get<double>();
        c.precision_undefined = entry["precision_undefined"].get<bool>();
        c.recall = entry["recall"].get<double>();
        c.recall_undefined = entry["recall_undefined"].get<bool>();
        c.support = entry["support"].get<std::int64_t>();
        if (!entry["train_count"].is_null()) {
            c.train_count = entry["train_count"].get<std::int64_t>();
        }
        c.false_positives = entry["false_positives"].get<std::int64_t>();
        report.per_class.push_back(std::move(c));
    }
    const auto& leak = document["leakage"];
    if (!leak.is_null()) {
        if (!leak["negative_label"].is_null()) {
            report.negative_label = leak["negative_label"].get<std::string>();
        }
        report.leakage = Leakage{leak["count"].get<std::int64_t>(), leak["fraction"].get<double>(),
                                 leak["target_total"].get<std::int64_t>()};
    }
    std::optional<std::string> negative = report.negative_label;
    report.confusion = ConfusionMatrix(dataset::ClassCatalog(document["confusion"]["labels"].get<std::vector<std::string>>(), negative));
    const auto& counts = document["confusion"]["counts"];
    for (std::size_t i = 0; i < counts.size(); ++i) {
        for (std::size_t j = 0; j < counts[i].size(); ++j) {
            report.confusion.add(i, j, counts[i][j].get<std::int64_t>());
        }
    }
    const auto& series = document["count_series"];
    if (!series.is_null()) {
        CountSeries s;
        s.threshold = series["threshold"].get<std::int64_t>();
        s.false_positives = series_from_json(series["false_positives"]);
        s.recall = series_from_json(series["recall"]);
        s.precision = series_from_json(series["precision"]);
        s.below = bucket_from_json(series["below_threshold"]);
        s.above = bucket_from_json(series["at_or_above_threshold"]);
        report.series = std::move(s);
    }
    return report;
}

std::string render_comparison(std::span<const MetricsReport> reports) {
    std::string out = "| Model | Single Class Acc | Top-3 Acc |\n|---|---:|---:|\n";
    for (const auto& report : reports) {
        out += "| " + report.model_id + " | " + percent(report.top1_accuracy) + " | " +
               (report.top3_accuracy ? percent(*report.top3_accuracy) : std::string("n/a")) + " |\n";
    }
    return out;
}

std::string render_report(const MetricsReport& report, ReportFormat format, MarkdownOptions options) {
    if (format == ReportFormat::json) {
        return report_to_json(report).dump(2) + "\n";
    }
    std::string out = "# Evaluation report: " + report.model_id + "\n\n";
    out += "Evaluated images: " + std::to_string(report.evaluated) + "\n\n";

    out += "## Model performance\n\n";
    out += render_comparison(std::span<const MetricsReport>(&report, 1));
    out += "\n| k | Top-k accuracy |\n|---:|---:|\n";
    for (const auto& entry : report.top_k) {
        out += "| " + std::to_string(entry.k) + " | " + percent(entry.accuracy) + " |\n";
    }

    if (report.leakage) {
        out += "\n## Negative-class leakage\n\n";
        out += std::to_string(report.leakage->count) + " of " + std::to_string(report.leakage->target_total) +
               " target images predicted as " + report.negative_label.value_or("negative") + " (" +
               percent(report.leakage->fraction) + ").\n";
    }

    out += "\n## Recall and precision by class\n\n";
    out += "| Class | Recall | Precision | Support | Train images | False positives |\n";
    out += "|---|---:|---:|---:|---:|---:|\n";
    for (const auto& c : report.per_class) {
        if (options.exclude_negative && report.negative_label && c.label == *report.negative_label) {
            continue;
        }
        out += "| " + c.label + " | " + percent(c.recall, c.recall_undefined) + " | " +
               percent(c.precision, c.precision_undefined) + " | " + std::to_string(c.support) + " | " +
               (c.train_count ? std::to_string(*c.train_count) : std::string("-")) + " | " +
               std::to_string(c.false_positives) + " |\n";
    }

    if (report.series) {
        const auto& s = *report.series;
        out += "\n## False positives by training-set size\n\n";
        out += "| Bucket | Classes | False positives |\n|---|---:|---:|\n";
        out += "| train images < " + std::to_string(s.threshold) + " | " + std::to_string(s.below.classes.size()) +
               " | " + std::to_string(s.below.false_positives) + " |\n";
        out += "| train images >= " + std::to_string(s.threshold) + " | " + std::to_string(s.above.classes.size()) +
               " | " + std::to_string(s.above.false_positives) + " |\n";
    }

    out += "\n## Confusion matrix\n\nRows are actual classes, columns predicted classes.\n\n";
    const auto& labels = report.confusion.catalog().labels();
    out += "| Actual \\ Predicted |";
    for (const auto& label : labels) {
        out += " " + label + " |";
    }
    out += "\n|---|";
    for (std::size_t j = 0; j < labels.size(); ++j) {
        out += "---:|";
    }
    out += "\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out += "| " + labels[i] + " |";
        for (std::size_t j = 0; j < labels.size(); ++j) {
            out += " " + std::to_string(report.confusion.at(i, j)) + " |";
        }
        out += "\n";
    }
    return out;
}

std::string series_csv(const std::vector<SeriesPoint>& points) {
    std::string out = "label,train_count,value\n";
    char buffer[32];
    for (const auto& p : points) {
        std::snprintf(buffer, sizeof(buffer), "%.17g", p.value);
        out += ensemble::csv_field(p.label) + "," + std::to_string(p.train_count) + "," + buffer + "\n";
    }
    return out;
}

void write_series(const CountSeries& series, const fs::path& directory) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    write_text(directory / "fp_vs_count.csv", series_csv(series.false_positives));
    write_text(directory / "recall_vs_count.csv", series_csv(series.recall));
    write_text(directory / "precision_vs_count.csv", series_csv(series.precision));
}

}  // namespace bombus::eval
