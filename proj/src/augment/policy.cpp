#include "bombus/augment.hpp"
#include "bombus/error.hpp"
#include "bombus/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace bombus::augment {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_interval(const Interval& interval, const char* name, double lo, double hi) {
    if (!std::isfinite(interval.lower) || !std::isfinite(interval.upper) ||
        interval.lower > interval.upper) {
        throw Error("invalid_policy", std::string(name) + " interval must satisfy lower <= upper");
    }
    if (interval.lower < lo || interval.upper > hi) {
        throw Error("invalid_policy", std::string(name) + " interval outside its admissible range");
    }
}

int box_side(double fraction, int extent) {
    return std::clamp(static_cast<int>(std::lround(fraction * extent)), 0, extent);
}

}  // namespace

OpKind kind_of(const AugmentationOpSpec& spec) noexcept {
    return std::visit(overloaded{
                          [](const RotationSpec&) { return OpKind::rotation; },
                          [](const ContrastSpec&) { return OpKind::contrast; },
                          [](const SaltPepperSpec&) { return OpKind::salt_pepper; },
                          [](const OcclusionSpec&) { return OpKind::occlusion; },
                      },
                      spec);
}

std::string_view to_string(OpKind kind) noexcept {
    switch (kind) {
        case OpKind::rotation: return "rotation";
        case OpKind::contrast: return "contrast";
        case OpKind::salt_pepper: return "salt_pepper";
        case OpKind::occlusion: return "occlusion";
    }
    return "rotation";
}

OpKind parse_op_kind(std::string_view text) {
    if (text == "rotation") return OpKind::rotation;
    if (text == "contrast") return OpKind::contrast;
    if (text == "salt_pepper") return OpKind::salt_pepper;
    if (text == "occlusion") return OpKind::occlusion;
    throw Error("invalid_policy", "unknown augmentation operator '" + std::string(text) + "'");
}

void validate(const AugmentationOpSpec& spec) {
    std::visit(overloaded{
                   [](const RotationSpec& s) {
                       check_interval(s.degrees, "rotation degrees", -HUGE_VAL, HUGE_VAL);
                   },
                   [](const ContrastSpec& s) { check_interval(s.factor, "contrast factor", 0.0, HUGE_VAL); },
                   [](const SaltPepperSpec& s) {
                       check_interval(s.probability, "salt-pepper probability", 0.0, 1.0);
                   },
                   [](const OcclusionSpec& s) {
                       check_interval(s.height, "occlusion height", 0.0, 1.0);
                       check_interval(s.width, "occlusion width", 0.0, 1.0);
                   },
               },
               spec);
}

AugmentationPolicy default_policy(std::uint64_t seed) {
    AugmentationPolicy policy;
    policy.ops = {RotationSpec{}, ContrastSpec{}, SaltPepperSpec{}, OcclusionSpec{}};
    policy.seed = seed;
    return policy;
}

void validate(const AugmentationPolicy& policy) {
    if (policy.ops.empty()) {
        throw Error("invalid_policy", "policy needs at least one operator");
    }
    std::unordered_set<int> kinds;
    for (const auto& op : policy.ops) {
        validate(op);
        if (!kinds.insert(static_cast<int>(kind_of(op))).second) {
            throw Error("invalid_policy", "operator '" + std::string(to_string(kind_of(op))) +
                                              "' listed twice");
        }
    }
    if (!(policy.augment_rate >= 0.0 && policy.augment_rate <= 1.0)) {
        throw Error("invalid_policy", "augment_rate must lie in [0, 1]");
    }
    if (policy.min_ops < 1 || policy.min_ops > policy.max_ops ||
        policy.max_ops > static_cast<int>(policy.ops.size())) {
        throw Error("invalid_policy", "operator counts must satisfy 1 <= min_ops <= max_ops <= |ops|");
    }
}

AugmentationResult apply_policy(const StandardizedImage& image, const AugmentationPolicy& policy,
                                std::uint64_t draw_seed) {
    validate(policy);
    Rng rng(draw_seed);
    const auto k = static_cast<std::size_t>(rng.between(policy.min_ops, policy.max_ops));

    std::vector<std::size_t> order(policy.ops.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
        std::swap(order[i], order[j]);
    }
    order.resize(k);
    std::sort(order.begin(), order.end());

    AugmentationResult result{image, {}};
    for (const auto index : order) {
        auto& current = result.image;
        std::visit(overloaded{
                       [&](const RotationSpec& s) {
                           const double degrees = rng.uniform(s.degrees.lower, s.degrees.upper);
                           current = rotate(current, degrees);
                           result.applied_ops.push_back({OpKind::rotation, {degrees}});
                       },
                       [&](const ContrastSpec& s) {
                           const double factor = rng.uniform(s.factor.lower, s.factor.upper);
                           current = contrast(current, factor);
                           result.applied_ops.push_back({OpKind::contrast, {factor}});
                       },
                       [&](const SaltPepperSpec& s) {
                           const double p = rng.uniform(s.probability.lower, s.probability.upper);
                           const std::uint64_t seed = rng.next();
                           current = salt_pepper(current, p, seed);
                           // The seed is recorded as a double; exact for bookkeeping
                           // only up to 2^53.
                           result.applied_ops.push_back({OpKind::salt_pepper, {p, static_cast<double>(seed)}});
                       },
                       [&](const OcclusionSpec& s) {
                           const int h = box_side(rng.uniform(s.height.lower, s.height.upper), current.height());
                           const int w = box_side(rng.uniform(s.width.lower, s.width.upper), current.width());
                           const Box box{static_cast<int>(rng.between(0, current.height() - h)),
                                         static_cast<int>(rng.between(0, current.width() - w)), h, w};
                           current = occlude(current, box);
                           result.applied_ops.push_back(
                               {OpKind::occlusion,
                                {double(box.row), double(box.col), double(box.height), double(box.width)}});
                       },
                   },
                   policy.ops[index]);
    }
    return result;
}

std::uint64_t record_seed(const AugmentationPolicy& policy, std::string_view record_id) noexcept {
    return mix_seed(policy.seed, hash_string(record_id));
}

std::vector<std::size_t> select_for_augmentation(const dataset::DatasetManifest& manifest,
                                                 const AugmentationPolicy& policy) {
    validate(policy);
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& record = manifest.records[i];
        if (record.split != dataset::Split::train || record.source == dataset::Source::augmented) {
            continue;
        }
        Rng rng(mix_seed(record_seed(policy, record.id), 0));
        if (rng.bernoulli(policy.augment_rate)) {
            selected.push_back(i);
        }
    }
    return selected;
}

std::string augmented_path(std::string_view original_path, int n) {
    std::filesystem::path path{std::string(original_path)};
    path.replace_extension();
    return path.generic_string() + ".aug" + std::to_string(n) + ".png";
}

dataset::DatasetManifest build_augmented_set(const dataset::DatasetManifest& manifest,
                                             const AugmentationPolicy& policy,
                                             AugmentedSetOptions options) {
    using dataset::Source;
    using dataset::Split;
    validate(policy);
    const bool has_train = std::any_of(manifest.records.begin(), manifest.records.end(),
                                       [](const auto& r) { return r.split == Split::train; });
    if (!has_train) {
        throw Error("no_train_split", "manifest has no train records; run the split first");
    }

    std::unordered_set<std::string> existing_ids;
    for (const auto& record : manifest.records) {
        existing_ids.insert(record.id);
    }

    dataset::DatasetManifest out = manifest;
    for (const auto index : select_for_augmentation(manifest, policy)) {
        const auto& original = manifest.records[index];
        dataset::ImageRecord sibling;
        sibling.id = original.id + ".aug1";
        if (existing_ids.contains(sibling.id)) {
            throw Error("already_augmented", "record '" + original.id + "' already has an augmented sibling");
        }
        sibling.path = augmented_path(original.path, 1);
        sibling.label = original.label;
        sibling.split = Split::train;
        sibling.source = Source::augmented;
        sibling.parent_id = original.id;

        if (options.write_images) {
            const auto image = dataset::load_standardized(manifest.resolve(original), options.geometry);
            const auto draw_seed = mix_seed(record_seed(policy, original.id), 1);
            const auto augmented = apply_policy(image, policy, draw_seed);
            dataset::write_png(augmented.image, manifest.resolve(sibling));
        }
        out.records.push_back(std::move(sibling));
    }
    return out;
}

}  // namespace bombus::augment
