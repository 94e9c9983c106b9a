#include "fixtures.hpp"

#include "bombus/augment.hpp"
#include "bombus/error.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace bombus::augment {
namespace {

using dataset::StandardizedImage;
using testing::TempDir;

StandardizedImage noise(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    return testing::random_image(h, w, rng);
}

bool in_range(const StandardizedImage& image) {
    for (const float v : image.pixels()) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            return false;
        }
    }
    return true;
}

TEST(Rotate, ZeroIsIdentity) {
    const auto img = noise(17, 23, 1);
    EXPECT_EQ(rotate(img, 0.0), img);
    EXPECT_EQ(rotate(img, 360.0), img);
}

TEST(Rotate, HalfTurnReversesBothAxes) {
    const auto img = noise(15, 22, 2);
    const auto out = rotate(img, 180.0);
    for (int r = 0; r < 15; ++r) {
        for (int c = 0; c < 22; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                ASSERT_EQ(out.at(r, c, ch), img.at(14 - r, 21 - c, ch));
            }
        }
    }
}

TEST(Rotate, QuarterTurnOnSquareIsCounterClockwise) {
    const auto img = noise(9, 9, 3);
    const auto out = rotate(img, 90.0);
    for (int r = 0; r < 9; ++r) {
        for (int c = 0; c < 9; ++c) {
            // Counter-clockwise: the right column moves to the top row.
            ASSERT_EQ(out.at(r, c, 0), img.at(c, 8 - r, 0));
        }
    }
}

TEST(Rotate, FortyFiveDegreesBlackensCornersOnly) {
    const StandardizedImage white(64, 64, 1.0f);
    const auto out = rotate(white, 45.0);
    for (const auto [r, c] : {std::pair{0, 0}, {0, 63}, {63, 0}, {63, 63}}) {
        for (int ch = 0; ch < 3; ++ch) {
            EXPECT_EQ(out.at(r, c, ch), 0.0f);
        }
    }
    EXPECT_FLOAT_EQ(out.at(32, 32, 0), 1.0f);
    // Inside the inscribed circle the rotated frame still covers every pixel.
    for (int r = 0; r < 64; ++r) {
        for (int c = 0; c < 64; ++c) {
            const double dy = r + 0.5 - 32.0;
            const double dx = c + 0.5 - 32.0;
            if (dx * dx + dy * dy < 30.0 * 30.0) {
                ASSERT_NEAR(out.at(r, c, 1), 1.0f, 1e-5) << r << "," << c;
            }
        }
    }
    EXPECT_TRUE(in_range(out));
    EXPECT_EQ(out.geometry(), white.geometry());
}

TEST(Contrast, IdentityAndFlatten) {
    const auto img = noise(8, 8, 4);
    EXPECT_EQ(contrast(img, 1.0), img);
    const auto flat = contrast(img, 0.0);
    for (int ch = 0; ch < 3; ++ch) {
        double mean = 0.0;
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 8; ++c) {
                mean += img.at(r, c, ch);
            }
        }
        mean /= 64.0;
        for (int r = 0; r < 8; ++r) {
            for (int c = 0; c < 8; ++c) {
                ASSERT_NEAR(flat.at(r, c, ch), mean, 1e-6);
            }
        }
    }
    EXPECT_THROW(contrast(img, -0.1), Error);
}

TEST(Contrast, DoublingAroundHalfClampsToEnds) {
    // Values {0.2, 0.8} per channel, mean 0.5: 0.5 + 2 * (v - 0.5) -> {-0.1, 1.1} -> {0, 1}.
    StandardizedImage img(1, 2);
    for (int ch = 0; ch < 3; ++ch) {
        img.at(0, 0, ch) = 0.2f;
        img.at(0, 1, ch) = 0.8f;
    }
    const auto out = contrast(img, 2.0);
    for (int ch = 0; ch < 3; ++ch) {
        EXPECT_EQ(out.at(0, 0, ch), 0.0f);
        EXPECT_EQ(out.at(0, 1, ch), 1.0f);
    }
}

TEST(SaltPepper, BoundariesAndDeterminism) {
    const auto img = noise(32, 32, 5);
    EXPECT_EQ(salt_pepper(img, 0.0, 9), img);
    for (const float v : salt_pepper(img, 1.0, 9).pixels()) {
        ASSERT_TRUE(v == 0.0f || v == 1.0f);
    }
    EXPECT_EQ(salt_pepper(img, 0.3, 9), salt_pepper(img, 0.3, 9));
    EXPECT_NE(salt_pepper(img, 0.3, 9), salt_pepper(img, 0.3, 10));
    EXPECT_THROW(salt_pepper(img, 1.5, 1), Error);
    EXPECT_THROW(salt_pepper(img, -0.5, 1), Error);
}

TEST(SaltPepper, FlipFractionWithinBinomialBounds) {
    const StandardizedImage grey(224, 224, 0.5f);
    const auto out = salt_pepper(grey, 0.1, 42);
    std::size_t flipped = 0;
    std::size_t salt = 0;
    for (int r = 0; r < 224; ++r) {
        for (int c = 0; c < 224; ++c) {
            if (out.at(r, c, 0) != 0.5f) {
                ++flipped;
                salt += out.at(r, c, 0) == 1.0f;
                // The whole pixel flips, not single channels.
                ASSERT_EQ(out.at(r, c, 1), out.at(r, c, 0));
                ASSERT_EQ(out.at(r, c, 2), out.at(r, c, 0));
            }
        }
    }
    const double fraction = static_cast<double>(flipped) / (224.0 * 224.0);
    EXPECT_GE(fraction, 0.08);
    EXPECT_LE(fraction, 0.12);
    const double salt_share = static_cast<double>(salt) / static_cast<double>(flipped);
    EXPECT_NEAR(salt_share, 0.5, 3.0 * std::sqrt(0.25 / static_cast<double>(flipped)));
}

TEST(Occlude, FullFrameZeroAreaAndCount) {
    const auto img = noise(50, 60, 6);
    for (const float v : occlude(img, Box{0, 0, 50, 60}).pixels()) {
        ASSERT_EQ(v, 0.0f);
    }
    EXPECT_EQ(occlude(img, Box{10, 10, 0, 5}), img);

    StandardizedImage ones(50, 60, 1.0f);
    const auto out = occlude(ones, Box{10, 10, 20, 20});
    int zeroed = 0;
    for (int r = 0; r < 50; ++r) {
        for (int c = 0; c < 60; ++c) {
            const bool inside = r >= 10 && r < 30 && c >= 10 && c < 30;
            zeroed += out.at(r, c, 0) == 0.0f;
            for (int ch = 0; ch < 3; ++ch) {
                ASSERT_EQ(out.at(r, c, ch), inside ? 0.0f : 1.0f);
            }
        }
    }
    EXPECT_EQ(zeroed, 400);
}

TEST(Occlude, ClipsToFrame) {
    const auto img = noise(20, 20, 7);
    const auto out = occlude(img, Box{15, -5, 10, 10});
    for (int r = 0; r < 20; ++r) {
        for (int c = 0; c < 20; ++c) {
            const bool inside = r >= 15 && c < 5;
            ASSERT_EQ(out.at(r, c, 2), inside ? 0.0f : img.at(r, c, 2));
        }
    }
}

TEST(Policy, DefaultsAndValidation) {
    const auto policy = default_policy(3);
    EXPECT_EQ(policy.ops.size(), 4u);
    EXPECT_EQ(policy.augment_rate, 0.25);
    EXPECT_NO_THROW(validate(policy));
    auto bad = policy;
    bad.min_ops = 0;
    EXPECT_THROW(validate(bad), Error);
    bad = policy;
    bad.max_ops = 5;
    EXPECT_THROW(validate(bad), Error);
    bad = policy;
    bad.augment_rate = 1.2;
    EXPECT_THROW(validate(bad), Error);
    bad = policy;
    bad.ops[0] = RotationSpec{{10.0, -10.0}};
    EXPECT_THROW(validate(bad), Error);
    bad = policy;
    bad.ops[2] = SaltPepperSpec{{0.5, 1.5}};
    EXPECT_THROW(validate(bad), Error);
}

TEST(Policy, ForcedFullFrameOcclusion) {
    AugmentationPolicy policy;
    policy.ops = {OcclusionSpec{{1.0, 1.0}, {1.0, 1.0}}};
    policy.min_ops = policy.max_ops = 1;
    const auto result = apply_policy(noise(16, 16, 8), policy, 5);
    for (const float v : result.image.pixels()) {
        ASSERT_EQ(v, 0.0f);
    }
    ASSERT_EQ(result.applied_ops.size(), 1u);
    EXPECT_EQ(result.applied_ops[0].kind, OpKind::occlusion);
}

TEST(Policy, SamplingContractOverManyDraws) {
    auto policy = default_policy(1);
    policy.min_ops = 2;
    policy.max_ops = 4;
    const auto img = noise(24, 24, 9);
    std::set<std::size_t> lengths;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto result = apply_policy(img, policy, seed);
        const auto n = result.applied_ops.size();
        ASSERT_GE(n, 2u);
        ASSERT_LE(n, 4u);
        lengths.insert(n);
        std::set<OpKind> kinds;
        int previous = -1;
        for (const auto& op : result.applied_ops) {
            ASSERT_TRUE(kinds.insert(op.kind).second);
            // Listed order is preserved.
            ASSERT_GT(static_cast<int>(op.kind), previous);
            previous = static_cast<int>(op.kind);
        }
        ASSERT_EQ(result.image.geometry(), img.geometry());
        ASSERT_TRUE(in_range(result.image));
    }
    EXPECT_EQ(lengths.size(), 3u);
}

TEST(Policy, Deterministic) {
    const auto img = noise(24, 24, 10);
    const auto policy = default_policy(2);
    const auto a = apply_policy(img, policy, 77);
    const auto b = apply_policy(img, policy, 77);
    EXPECT_EQ(a.image, b.image);
    ASSERT_EQ(a.applied_ops.size(), b.applied_ops.size());
    for (std::size_t i = 0; i < a.applied_ops.size(); ++i) {
        EXPECT_EQ(a.applied_ops[i].parameters, b.applied_ops[i].parameters);
    }
}

dataset::DatasetManifest train_manifest(std::size_t n) {
    dataset::DatasetManifest m;
    m.catalog = dataset::ClassCatalog({"A", "B"});
    for (std::size_t i = 0; i < n; ++i) {
        m.records.push_back({"r" + std::to_string(i), "img/r" + std::to_string(i) + ".png", i % 2 ? "A" : "B",
                             dataset::Split::train});
    }
    return m;
}

TEST(AugmentedSet, RateZeroIsIdentity) {
    auto policy = default_policy(1);
    policy.augment_rate = 0.0;
    const auto m = train_manifest(50);
    EXPECT_EQ(build_augmented_set(m, policy, {dataset::kGeometry224, false}), m);
}

TEST(AugmentedSet, QuarterRateOverTenThousand) {
    const auto policy = default_policy(2026);
    const auto m = train_manifest(10000);
    const auto out = build_augmented_set(m, policy, {dataset::kGeometry224, false});
    const auto added = out.records.size() - m.records.size();
    EXPECT_GE(added, 2300u);
    EXPECT_LE(added, 2700u);
}

TEST(AugmentedSet, FullRateWritesSiblingsNextToOriginals) {
    TempDir dir;
    auto m = train_manifest(6);
    m.base_dir = dir.path();
    Rng rng(4);
    for (const auto& r : m.records) {
        dataset::write_png(testing::random_image(12, 12, rng), m.resolve(r));
    }
    m.records.push_back({"v0", "img/r0.png", "A", dataset::Split::validation});
    m.records.push_back({"t0", "img/r1.png", "A", dataset::Split::test});
    auto policy = default_policy(3);
    policy.augment_rate = 1.0;
    const auto out = build_augmented_set(m, policy, {dataset::Geometry{12, 12}, true});
    ASSERT_EQ(out.records.size(), m.records.size() + 6);
    for (std::size_t i = m.records.size(); i < out.records.size(); ++i) {
        const auto& r = out.records[i];
        EXPECT_EQ(r.source, dataset::Source::augmented);
        EXPECT_EQ(r.split, dataset::Split::train);
        ASSERT_TRUE(r.parent_id);
        const auto* parent = out.find(*r.parent_id);
        ASSERT_NE(parent, nullptr);
        EXPECT_NE(parent->source, dataset::Source::augmented);
        EXPECT_TRUE(std::filesystem::exists(out.resolve(r))) << r.path;
        EXPECT_EQ(r.path, parent->path.substr(0, parent->path.size() - 4) + ".aug1.png");
    }
    EXPECT_NO_THROW(dataset::validate(out));
    EXPECT_THROW(build_augmented_set(out, policy, {dataset::Geometry{12, 12}, false}), Error);
}

TEST(AugmentedSet, NeedsTrainSplit) {
    auto m = train_manifest(4);
    for (auto& r : m.records) {
        r.split = dataset::Split::unassigned;
    }
    EXPECT_THROW(build_augmented_set(m, default_policy(1), {dataset::kGeometry224, false}), Error);
}

}  // namespace
}  // namespace bombus::augment
