#include "bombus/dataset.hpp"
#include "bombus/error.hpp"

#include <algorithm>
#include <unordered_set>

namespace bombus::dataset {

std::string_view to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::validation: return "validation";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

std::string_view to_string(Source source) noexcept {
    switch (source) {
        case Source::target: return "target";
        case Source::negative: return "negative";
        case Source::augmented: return "augmented";
    }
    return "target";
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "validation") return Split::validation;
    if (text == "test") return Split::test;
    if (text == "unassigned") return Split::unassigned;
    throw Error("malformed_record", "unknown split '" + std::string(text) + "'");
}

Source parse_source(std::string_view text) {
    if (text == "target") return Source::target;
    if (text == "negative") return Source::negative;
    if (text == "augmented") return Source::augmented;
    throw Error("malformed_record", "unknown source '" + std::string(text) + "'");
}

ClassCatalog::ClassCatalog(std::vector<std::string> labels, std::optional<std::string> negative_label)
    : labels_(std::move(labels)), negative_label_(std::move(negative_label)) {
    std::unordered_set<std::string> seen;
    for (const auto& label : labels_) {
        if (label.empty()) {
            throw Error("invalid_catalog", "catalog contains an empty label");
        }
        if (!seen.insert(label).second) {
            throw Error("invalid_catalog", "duplicate catalog label '" + label + "'");
        }
    }
    if (negative_label_ && !seen.contains(*negative_label_)) {
        throw Error("invalid_catalog",
                    "negative label '" + *negative_label_ + "' is not in the catalog");
    }
}

std::optional<std::size_t> ClassCatalog::index_of(std::string_view label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - labels_.begin());
}

std::optional<std::size_t> ClassCatalog::negative_index() const {
    if (!negative_label_) {
        return std::nullopt;
    }
    return index_of(*negative_label_);
}

}  // namespace bombus::dataset
