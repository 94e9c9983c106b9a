#include "bombus/dataset.hpp"
#include "bombus/error.hpp"
#include "bombus/rng.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace bombus::dataset {

DatasetManifest split(const DatasetManifest& manifest, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
        throw Error("invalid_fraction", "train fraction must lie in [0, 1]");
    }
    DatasetManifest out = manifest;
    out.seed = seed;

    struct Ranked {
        std::uint64_t key;
        std::size_t index;
    };
    std::vector<std::vector<Ranked>> per_class(out.catalog.size());
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        const auto& record = out.records[i];
        if (record.split == Split::test || record.source == Source::augmented) {
            continue;
        }
        const auto cls = out.catalog.index_of(record.label);
        if (!cls) {
            throw Error("unknown_label", "record '" + record.id + "' has label outside the catalog");
        }
        per_class[*cls].push_back({mix_seed(seed, hash_string(record.id)), i});
    }

    for (auto& members : per_class) {
        std::sort(members.begin(), members.end(), [&](const Ranked& a, const Ranked& b) {
            if (a.key != b.key) {
                return a.key < b.key;
            }
            return out.records[a.index].id < out.records[b.index].id;
        });
        const auto n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(members.size())));
        for (std::size_t rank = 0; rank < members.size(); ++rank) {
            out.records[members[rank].index].split = rank < n_train ? Split::train : Split::validation;
        }
    }

    std::unordered_map<std::string_view, Split> assigned;
    for (const auto& record : out.records) {
        if (record.source != Source::augmented) {
            assigned.emplace(record.id, record.split);
        }
    }
    for (auto& record : out.records) {
        if (record.source == Source::augmented && record.parent_id) {
            if (const auto it = assigned.find(*record.parent_id); it != assigned.end()) {
                record.split = it->second;
            }
        }
    }
    return out;
}

DatasetManifest inject_negative_class(const DatasetManifest& manifest,
                                      std::span<const ImageRecord> negatives,
                                      NegativeOptions options) {
    if (negatives.empty()) {
        return manifest;
    }
    const auto& negative_label = manifest.catalog.negative_label();
    if (!negative_label) {
        throw Error("missing_negative_label", "catalog has no negative label");
    }
    DatasetManifest out = manifest;
    out.records.reserve(out.records.size() + negatives.size());
    for (const auto& negative : negatives) {
        if (negative.label != *negative_label) {
            throw Error("label_mismatch", "negative record '" + negative.id + "' carries label '" +
                                              negative.label + "', expected '" + *negative_label + "'");
        }
        if (negative.split == Split::test && !options.allow_test_split) {
            throw Error("negative_in_test",
                        "negative record '" + negative.id + "' assigned to the test split");
        }
        ImageRecord record = negative;
        record.source = Source::negative;
        record.parent_id.reset();
        out.records.push_back(std::move(record));
    }
    validate(out);
    return out;
}

}  // namespace bombus::dataset
