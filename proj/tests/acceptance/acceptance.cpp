// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "fixtures.hpp"

#include "bombus/augment.hpp"
#include "bombus/config.hpp"
#include "bombus/ensemble.hpp"
#include "bombus/error.hpp"
#include "bombus/eval.hpp"
#include "bombus/interface.hpp"
#include "bombus/model.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

namespace {

using namespace bombus;
namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool condition, const std::string& what) {
        if (!condition && pass) {
            pass = false;
            detail = what;
        }
    }
};

// Brute-force metrics ----------------------------------------------------------

// Predicted index: first maximum of the row.
std::size_t oracle_argmax(const Eigen::RowVectorXd& row) {
    std::size_t best = 0;
    for (Eigen::Index c = 1; c < row.size(); ++c) {
        if (row(c) > row(static_cast<Eigen::Index>(best))) {
            best = static_cast<std::size_t>(c);
        }
    }
    return best;
}

// Zero-based rank of `target` when ties go to the lower index.
std::size_t oracle_rank(const Eigen::RowVectorXd& row, std::size_t target) {
    std::size_t rank = 0;
    const double t = row(static_cast<Eigen::Index>(target));
    for (Eigen::Index c = 0; c < row.size(); ++c) {
        const double v = row(c);
        if (v > t || (v == t && static_cast<std::size_t>(c) < target)) {
            ++rank;
        }
    }
    return rank;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12; }

Outcome metric_oracle() {
    Outcome o;
    Rng rng(20260101);
    for (int fixture = 0; fixture < 200 && o.pass; ++fixture) {
        const std::size_t classes = 2 + rng.below(9);
        const std::size_t n = 1 + rng.below(200);
        const auto catalog = testing::letter_catalog(classes);
        const auto ids = testing::make_ids(n);
        ensemble::ProbabilityMatrix m{ids, catalog, Eigen::MatrixXd(n, classes)};
        std::vector<std::size_t> truth_index(n);
        eval::TruthMap truth;
        const bool coarse = fixture % 2 == 0;  // coarse scores force ties
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t c = 0; c < classes; ++c) {
                m.rows(i, c) = coarse ? static_cast<double>(1 + rng.below(3)) : rng.uniform(0.01, 1.0);
            }
            m.rows.row(i) /= m.rows.row(i).sum();
            truth_index[i] = rng.below(classes);
            truth[ids[i]] = catalog.label(truth_index[i]);
        }

        std::vector<std::vector<std::int64_t>> counts(classes, std::vector<std::int64_t>(classes, 0));
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[truth_index[i]][oracle_argmax(m.rows.row(i))];
        }
        const auto scores = ensemble::as_scores(m);
        const auto cm = eval::confusion(ensemble::top_k(scores, 1), truth, catalog);
        for (std::size_t a = 0; a < classes; ++a) {
            for (std::size_t p = 0; p < classes; ++p) {
                o.check(cm.at(a, p) == counts[a][p], "confusion count differs in fixture " + std::to_string(fixture));
            }
        }

        const auto pr = eval::precision_recall(cm);
        for (std::size_t c = 0; c < classes; ++c) {
            std::int64_t row = 0;
            std::int64_t column = 0;
            for (std::size_t j = 0; j < classes; ++j) {
                row += counts[c][j];
                column += counts[j][c];
            }
            const double recall = row == 0 ? 0.0 : static_cast<double>(counts[c][c]) / static_cast<double>(row);
            const double precision =
                column == 0 ? 0.0 : static_cast<double>(counts[c][c]) / static_cast<double>(column);
            o.check(close(pr[c].recall, recall) && pr[c].recall_undefined == (row == 0), "recall differs");
            o.check(close(pr[c].precision, precision) && pr[c].precision_undefined == (column == 0),
                    "precision differs");
        }

        const std::size_t negative = rng.below(classes);
        std::int64_t leaked = 0;
        std::int64_t targets = 0;
        for (std::size_t a = 0; a < classes; ++a) {
            if (a == negative) {
                continue;
            }
            leaked += counts[a][negative];
            for (std::size_t p = 0; p < classes; ++p) {
                targets += counts[a][p];
            }
        }
        const auto leak = eval::leakage(cm, catalog.label(negative));
        o.check(leak.count == leaked && leak.target_total == targets, "leakage count differs");
        o.check(close(leak.fraction, targets == 0 ? 0.0 : static_cast<double>(leaked) / static_cast<double>(targets)),
                "leakage fraction differs");

        for (std::size_t k = 1; k <= classes; ++k) {
            std::size_t hits = 0;
            for (std::size_t i = 0; i < n; ++i) {
                hits += oracle_rank(m.rows.row(i), truth_index[i]) < k;
            }
            o.check(close(eval::top_k_accuracy(m, truth, static_cast<int>(k)),
                          static_cast<double>(hits) / static_cast<double>(n)),
                    "top-" + std::to_string(k) + " accuracy differs in fixture " + std::to_string(fixture));
        }
    }
    if (o.pass) {
        o.detail = "200 fixtures";
    }
    return o;
}

// Ensemble argmax law -----------------------------------------------------------

ensemble::ProbabilityMatrix member_rows(const std::vector<std::string>& ids, const dataset::ClassCatalog& catalog,
                                        Rng& rng, bool quantized) {
    if (!quantized) {
        return testing::random_probabilities(ids, catalog, rng);
    }
    // Sixteen units dealt over the classes: exact binary fractions, many ties.
    ensemble::ProbabilityMatrix m{ids, catalog, Eigen::MatrixXd::Zero(ids.size(), catalog.size())};
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (int unit = 0; unit < 16; ++unit) {
            m.rows(i, rng.below(catalog.size())) += 1.0 / 16.0;
        }
    }
    return m;
}

Outcome ensemble_argmax() {
    Outcome o;
    Rng rng(77);
    const auto catalog = testing::letter_catalog(30);
    const auto ids = testing::make_ids(50);
    int ties = 0;
    for (int set = 0; set < 1000 && o.pass; ++set) {
        const std::size_t count = 2 + rng.below(3);
        std::vector<ensemble::ProbabilityMatrix> members;
        for (std::size_t m = 0; m < count; ++m) {
            members.push_back(member_rows(ids, catalog, rng, set % 2 == 1));
        }
        const auto top = ensemble::top_k(ensemble::sum_softmax(members), 1);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            std::vector<double> sums(30, 0.0);
            for (const auto& m : members) {
                for (std::size_t c = 0; c < 30; ++c) {
                    sums[c] += m.rows(i, c);
                }
            }
            std::size_t best = 0;
            for (std::size_t c = 1; c < 30; ++c) {
                if (sums[c] > sums[best]) {
                    best = c;
                }
            }
            ties += std::count(sums.begin(), sums.end(), sums[best]) > 1;
            o.check(top[i].ranked_labels.size() == 1 && top[i].ranked_labels[0] == catalog.label(best),
                    "argmax differs in set " + std::to_string(set));
        }
    }
    if (o.pass) {
        o.detail = "1000 sets, " + std::to_string(ties) + " tied rows";
    }
    return o;
}

// Complementary members ---------------------------------------------------------

Outcome complementary_ensemble() {
    Outcome o;
    constexpr std::size_t n = 200;
    constexpr std::size_t classes = 5;
    Rng rng(314);
    const auto catalog = testing::letter_catalog(classes);
    const auto ids = testing::make_ids(n);
    eval::TruthMap truth;
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = rng.below(classes);
        truth[ids[i]] = catalog.label(labels[i]);
    }

    // Confident and right on its own half; on the other half right only 20 times, and never confident.
    const auto member = [&](std::size_t strong_begin) {
        ensemble::ProbabilityMatrix m{ids, catalog, Eigen::MatrixXd(n, classes)};
        std::size_t weak_hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t t = labels[i];
            if (i >= strong_begin && i < strong_begin + n / 2) {
                m.rows.row(i).setConstant(0.05);
                m.rows(i, t) = 0.8;
            } else if (weak_hits < 20) {
                ++weak_hits;
                m.rows.row(i).setConstant(0.175);
                m.rows(i, t) = 0.3;
            } else {
                m.rows.row(i).setConstant(0.2);
                m.rows(i, t) = 0.1;
                m.rows(i, (t + 1 + rng.below(classes - 1)) % classes) = 0.3;
            }
        }
        return m;
    };
    const std::vector<ensemble::ProbabilityMatrix> members{member(0), member(n / 2)};
    const double a = eval::top_k_accuracy(members[0], truth, 1);
    const double b = eval::top_k_accuracy(members[1], truth, 1);
    const double composite = eval::top_k_accuracy(ensemble::sum_softmax(members), truth, 1);
    o.check(a == 0.6 && b == 0.6, "members are not 60% accurate");
    o.check(composite > a && composite > b, "composite does not beat both members");
    char buffer[96];
    std::snprintf(buffer, sizeof buffer, "members %.3f / %.3f, composite %.3f", a, b, composite);
    if (o.pass) {
        o.detail = buffer;
    } else {
        o.detail += std::string(" (") + buffer + ")";
    }
    return o;
}

// Toy overfit -----------------------------------------------------------------

Outcome toy_overfit() {
    Outcome o;
    testing::TempDir dir;
    const auto manifest = testing::write_shape_manifest(dir.path(), 20, 64, 404, 0.85);
    model::HeadConfig head;
    head.hidden_layers = 1;
    head.nodes_per_layer = {256};
    head.dropout = 0.0;
    // Flattened grid features, as in the VGG presets.
    head.global_average_pooling = false;
    head.output_classes = 3;
    model::TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 8;
    tc.overfit_patience = 5;
    tc.seed = 404;
    model::OptimizerConfig oc;
    oc.learning_rate = 1e-3;
    const auto spec = model::make_backbone_spec(model::BackboneName::vgg16);
    const auto trained = model::train(model::build_model(spec, head, 404), manifest, tc, oc);
    const auto& history = trained.history;

    // Train accuracy recomputed in inference mode from the saved images.
    std::vector<dataset::StandardizedImage> images;
    std::vector<int> labels;
    for (const auto& r : manifest.records) {
        if (r.split == dataset::Split::train) {
            images.push_back(dataset::load_standardized(manifest.resolve(r), spec.input_geometry));
            labels.push_back(static_cast<int>(*manifest.catalog.index_of(r.label)));
        }
    }
    const auto probs = model::predict_probs(trained, images);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Eigen::Index best = 0;
        probs.row(i).maxCoeff(&best);
        correct += best == labels[static_cast<std::size_t>(i)];
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(images.size());

    o.check(manifest.records.size() == 60, "fixture is not 60 images");
    o.check(accuracy >= 0.95, "train accuracy " + std::to_string(accuracy) + " below 0.95");
    const auto stop = model::first_overfit_epoch(history, *tc.overfit_patience);
    o.check(history.stopped_early_at == stop, "stopped_early_at disagrees with the overfit detector");
    const std::size_t expected_epochs = stop ? static_cast<std::size_t>(*stop) : 30u;
    o.check(history.epochs.size() == expected_epochs, "history has " + std::to_string(history.epochs.size()) +
                                                          " records, expected " + std::to_string(expected_epochs));
    const auto steps_per_epoch = static_cast<std::int64_t>((images.size() + 7) / 8);
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        o.check(history.epochs[e].learning_rate == model::lr_at(static_cast<std::int64_t>(e) * steps_per_epoch, oc),
                "epoch " + std::to_string(e + 1) + " records the wrong learning rate");
        o.check(history.epochs[e].val_loss.has_value(), "validation loss missing");
    }
    if (o.pass) {
        o.detail = "train accuracy " + std::to_string(accuracy) + " after " + std::to_string(history.epochs.size()) +
                   " epochs" + (stop ? " (early stop)" : "");
    }
    return o;
}

// Augmentation ----------------------------------------------------------------

Outcome augmentation_suite() {
    Outcome o;
    Rng rng(8);
    const auto image = testing::random_image(224, 224, rng);

    // (a) determinism
    const auto policy = augment::default_policy(5);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        o.check(augment::apply_policy(image, policy, seed).image == augment::apply_policy(image, policy, seed).image,
                "apply_policy is not deterministic");
    }

    // (b) rate
    dataset::DatasetManifest m;
    m.catalog = dataset::ClassCatalog({"A", "B"});
    for (int i = 0; i < 10000; ++i) {
        m.records.push_back({"r" + std::to_string(i), "r" + std::to_string(i) + ".png", i % 2 ? "A" : "B",
                             dataset::Split::train});
    }
    const auto selected = augment::select_for_augmentation(m, augment::default_policy(2026));
    const double rate = static_cast<double>(selected.size()) / 10000.0;
    o.check(rate >= 0.23 && rate <= 0.27, "augmentation rate " + std::to_string(rate));

    // (c) occlusion
    const auto occluded = augment::occlude(image, augment::Box{10, 10, 20, 20});
    std::size_t zeroed = 0;
    for (int r = 0; r < 224; ++r) {
        for (int c = 0; c < 224; ++c) {
            const bool inside = r >= 10 && r < 30 && c >= 10 && c < 30;
            for (int ch = 0; ch < 3; ++ch) {
                if (inside) {
                    o.check(occluded.at(r, c, ch) == 0.0f, "occluded pixel not zero");
                } else {
                    o.check(occluded.at(r, c, ch) == image.at(r, c, ch), "pixel outside the box changed");
                }
            }
            zeroed += inside;
        }
    }
    o.check(zeroed == 400, "box did not cover 400 pixels");

    // (d) salt and pepper at p = 0.1, 3 sigma
    const dataset::StandardizedImage grey(224, 224, 0.5f);
    const auto noisy = augment::salt_pepper(grey, 0.1, 42);
    std::size_t flipped = 0;
    for (int r = 0; r < 224; ++r) {
        for (int c = 0; c < 224; ++c) {
            flipped += noisy.at(r, c, 0) != 0.5f;
        }
    }
    const double pixels = 224.0 * 224.0;
    const double sigma = std::sqrt(0.1 * 0.9 / pixels);
    const double fraction = static_cast<double>(flipped) / pixels;
    o.check(std::abs(fraction - 0.1) <= 3.0 * sigma, "flip fraction " + std::to_string(fraction));

    // (e) contrast hand case
    dataset::StandardizedImage pair(1, 2);
    for (int ch = 0; ch < 3; ++ch) {
        pair.at(0, 0, ch) = 0.2f;
        pair.at(0, 1, ch) = 0.8f;
    }
    const auto stretched = augment::contrast(pair, 2.0);
    for (int ch = 0; ch < 3; ++ch) {
        o.check(stretched.at(0, 0, ch) == 0.0f && stretched.at(0, 1, ch) == 1.0f, "contrast hand case");
    }
    o.check(augment::contrast(image, 1.0) == image, "contrast 1.0 is not the identity");

    if (o.pass) {
        char buffer[96];
        std::snprintf(buffer, sizeof buffer, "rate %.4f, flip fraction %.4f", rate, fraction);
        o.detail = buffer;
    }
    return o;
}

// Learning-rate schedule --------------------------------------------------------

Outcome lr_schedule() {
    Outcome o;
    const auto oc = interface::preset("vgg19-best").optimizer;
    o.check(oc.learning_rate == 1e-5, "vgg19-best base rate");
    long double factor = 1.0L;
    double worst = 0.0;
    for (std::int64_t step = 0; step <= 1000000; ++step) {
        if (step > 0 && step % 100 == 0) {
            factor *= 0.96L;
        }
        const long double expected = 1e-5L * factor;
        const double relative = static_cast<double>(std::abs((model::lr_at(step, oc) - expected) / expected));
        worst = std::max(worst, relative);
    }
    o.check(worst <= 1e-12, "relative error " + std::to_string(worst));
    if (o.pass) {
        char buffer[64];
        std::snprintf(buffer, sizeof buffer, "max relative error %.2e", worst);
        o.detail = buffer;
    }
    return o;
}

// Softmax and shapes ------------------------------------------------------------

Outcome softmax_contracts() {
    Outcome o;
    testing::TempDir dir;
    Rng rng(30);
    dataset::DatasetManifest manifest;
    std::vector<std::string> labels;
    for (int c = 0; c < 30; ++c) {
        labels.push_back("species-" + std::to_string(c));
    }
    manifest.catalog = dataset::ClassCatalog(labels);
    manifest.base_dir = dir.path();
    for (int c = 0; c < 30; ++c) {
        for (int i = 0; i < 2; ++i) {
            const std::string id = labels[static_cast<std::size_t>(c)] + "-" + std::to_string(i);
            dataset::write_png(testing::random_image(32, 32, rng), dir / (id + ".png"));
            manifest.records.push_back({id, id + ".png", labels[static_cast<std::size_t>(c)], dataset::Split::train});
        }
    }
    std::vector<dataset::StandardizedImage> queries;
    for (int i = 0; i < 12; ++i) {
        queries.push_back(dataset::standardize(testing::random_image(40, 50, rng), dataset::kGeometry224));
    }

    for (const auto& name : {std::string("vgg16-best"), std::string("resnet50-final")}) {
        auto section = interface::preset(name);
        if (section.head.hidden_layers > 0) {
            section.head.hidden_layers = 1;
            section.head.nodes_per_layer = {64};
        }
        section.train.epochs = 1;
        section.train.batch_size = 8;
        const auto trained =
            model::train(model::build_model(section.backbone, section.head, 1), manifest, section.train, section.optimizer);
        const auto probs = model::predict_probs(trained, queries);
        o.check(probs.rows() == 12 && probs.cols() == 30, name + ": shape is not 12 x 30");
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            o.check(std::abs(probs.row(i).sum() - 1.0) <= 1e-5 && probs.row(i).minCoeff() >= 0.0,
                    name + ": row is not a distribution");
        }
        model::save_model(trained, dir / name);
        const auto loaded = model::load_model(dir / name);
        const double drift = (model::predict_probs(loaded, queries) - probs).cwiseAbs().maxCoeff();
        o.check(drift <= 1e-6, name + ": save/load drift " + std::to_string(drift));
    }
    if (o.pass) {
        o.detail = "vgg16 and resnet50 heads, 30 classes";
    }
    return o;
}

// Presets ---------------------------------------------------------------------

Outcome preset_fidelity() {
    Outcome o;
    using model::BackboneName;
    using model::WeightSource;
    const auto expect_head = [&](const model::HeadConfig& h, int layers, int nodes, double dropout, bool gap,
                                 const std::string& name) {
        o.check(h.hidden_layers == layers && h.nodes_per_layer == std::vector<int>(static_cast<std::size_t>(layers), nodes) &&
                    h.dropout == dropout && h.global_average_pooling == gap && h.output_classes == 30,
                name + ": head differs");
    };

    const auto vgg19 = interface::preset("vgg19-best");
    o.check(vgg19.backbone.name == BackboneName::vgg19 && vgg19.backbone.weight_source == WeightSource::pretrained,
            "vgg19-best backbone");
    expect_head(vgg19.head, 2, 2048, 0.5, false, "vgg19-best");
    o.check(vgg19.optimizer.learning_rate == 1e-5 && vgg19.optimizer.decay &&
                vgg19.optimizer.decay->rate == 0.96 && vgg19.optimizer.decay->interval == 100,
            "vgg19-best optimizer");

    const auto vgg16 = interface::preset("vgg16-best");
    o.check(vgg16.backbone.name == BackboneName::vgg16 && vgg16.backbone.weight_source == WeightSource::pretrained,
            "vgg16-best backbone");
    expect_head(vgg16.head, 3, 2048, 0.3, false, "vgg16-best");
    o.check(vgg16.optimizer.learning_rate == 1e-4 && !vgg16.optimizer.decay, "vgg16-best optimizer");

    const auto resnet = interface::preset("resnet50-final");
    o.check(resnet.backbone.name == BackboneName::resnet50 && resnet.backbone.weight_source == WeightSource::random,
            "resnet50-final backbone");
    expect_head(resnet.head, 0, 0, 0.0, true, "resnet50-final");
    o.check(resnet.optimizer.learning_rate == 5e-4 && resnet.train.epochs == 15, "resnet50-final schedule");

    const auto inception = interface::preset("inception-best");
    o.check(inception.backbone.name == BackboneName::inception_v3 &&
                inception.backbone.weight_source == WeightSource::pretrained,
            "inception-best backbone");
    expect_head(inception.head, 2, 1536, 0.5, true, "inception-best");
    o.check(inception.optimizer.learning_rate == 5e-5 && inception.train.batch_size == 12, "inception-best schedule");

    for (const auto& name : interface::preset_names()) {
        interface::ExperimentConfig config;
        config.model = interface::preset(name);
        const auto snapshot = interface::config_to_json(config)["model"].dump(2) + "\n";
        const auto golden = fs::path(BOMBUS_SOURCE_DIR) / "tests/golden/presets" / (name + ".json");
        o.check(snapshot == testing::read_file(golden), name + ": snapshot differs from golden file");
        // The snapshot parses back to the same preset.
        const auto reparsed = interface::config_from_json(json{{"model", json::parse(snapshot)}});
        o.check(reparsed.model == config.model, name + ": snapshot does not round-trip");
    }
    if (o.pass) {
        o.detail = "4 presets";
    }
    return o;
}

// End to end ------------------------------------------------------------------

Outcome end_to_end() {
    Outcome o;
    testing::TempDir dir;
    testing::write_shape_tree(dir / "train", 6, 48, 1);
    testing::write_shape_tree(dir / "test", 2, 48, 2);
    testing::write_shape_tree(dir / "bees", 4, 48, 3);
    const json config{
        {"seed", 3},
        {"dataset",
         {{"root", "train"}, {"test_root", "test"}, {"negatives", "bees/stripes"}, {"negative_label", "honeybee"},
          {"geometry", 64}}},
        {"augmentation", json::object()},
        {"model",
         {{"preset", "vgg19-best"},
          {"head", {{"output_classes", 4}, {"nodes_per_layer", {64, 64}}}},
          {"optimizer", {{"learning_rate", 1e-3}}},
          {"train", {{"epochs", 1}, {"batch_size", 4}, {"use_augmented", true}}}}},
        {"output", "run"}};
    testing::write_file(dir / "config.json", config.dump(2));
    const auto cfg = (dir / "config.json").string();
    const auto run = (dir / "run");
    const auto second = (dir / "run-b");

    const auto step = [&](std::vector<std::string> args) {
        if (!o.pass) {
            return;
        }
        std::ostringstream out;
        std::ostringstream err;
        args.insert(args.end(), {"--config", cfg});
        const int status = interface::run_command(args, out, err);
        std::string joined;
        for (const auto& a : args) {
            joined += a + " ";
        }
        o.check(status == 0, joined + "exited " + std::to_string(status) + ": " + err.str());
    };
    step({"dataset", "build"});
    step({"augment"});
    step({"train"});
    step({"predict"});
    step({"train", "--set", "model.init_seed=99", "--output", second.string(),
          "--manifest", (run / "augment" / "manifest.jsonl").string()});
    step({"predict", "--output", second.string(), "--model", (second / "train" / "model").string(),
          "--manifest", (run / "dataset" / "manifest.jsonl").string()});
    step({"ensemble", "--members", (run / "predict" / "probabilities.csv").string(),
          (second / "predict" / "probabilities.csv").string()});
    step({"evaluate", "--model-id", "composite"});
    step({"report"});
    if (!o.pass) {
        return o;
    }

    const auto document = json::parse(testing::read_file(run / "evaluate" / "report.json"));
    try {
        eval::validate_report_json(document);
    } catch (const Error& e) {
        o.check(false, std::string("report.json fails validation: ") + e.what());
    }
    o.check(document["evaluated"] == 6, "expected 6 evaluated test images");
    for (const auto* name : {"fp_vs_count.csv", "recall_vs_count.csv", "precision_vs_count.csv"}) {
        const auto path = run / "evaluate" / name;
        o.check(fs::exists(path), std::string(name) + " missing");
        if (fs::exists(path)) {
            const auto text = testing::read_file(path);
            o.check(text.rfind("label,train_count,value\n", 0) == 0 && std::count(text.begin(), text.end(), '\n') == 5,
                    std::string(name) + " malformed");
        }
    }
    o.check(fs::exists(run / "report" / "report.md"), "report.md missing");
    for (const auto* stage : {"dataset", "augment", "train", "predict", "ensemble", "evaluate", "report"}) {
        o.check(fs::exists(run / stage / "config.json"), std::string(stage) + "/config.json missing");
    }
    if (o.pass) {
        o.detail = "top-1 " + document["top1_accuracy"].dump() + " on 6 test images";
    }
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"metric oracle equivalence", metric_oracle},
        {"ensemble argmax law", ensemble_argmax},
        {"complementary ensemble improvement", complementary_ensemble},
        {"toy overfit", toy_overfit},
        {"augmentation suite", augmentation_suite},
        {"learning-rate schedule", lr_schedule},
        {"softmax and shape contracts", softmax_contracts},
        {"preset fidelity", preset_fidelity},
        {"end-to-end pipeline", end_to_end},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = criteria[i].second();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !outcome.pass;
        std::printf("%s %zu %s: %s (%.1f s)\n", outcome.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    outcome.detail.c_str(), seconds);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
