#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "support.hpp"
#include "tsf/classify.hpp"
#include "tsf/errors.hpp"

using namespace tsf;

namespace {

/// Well-separated clusters in (k, eps_prime) space: class c draws features
/// near (k_c, e_c) with jitter far below the centroid spacing.
MaterialDataset blob_dataset(int n_classes, int per_class, int w, std::uint64_t seed) {
    MaterialDataset data;
    tsft::FixtureRng rng(seed);
    const int d = 2 * w * w;
    for (int c = 0; c < n_classes; ++c) {
        data.label_names.push_back("mat" + std::to_string(c));
        const double kc = 2e-8 + 4e-8 * c;
        const double ec = 0.5 + 0.4 * c;
        for (int s = 0; s < per_class; ++s) {
            FeatureVector fv;
            fv.label = c;
            fv.values.resize(d);
            for (int i = 0; i < w * w; ++i) {
                fv.values[i] = kc + rng.normal(0.0, 2e-10);
                fv.values[w * w + i] = ec + rng.normal(0.0, 5e-3);
            }
            data.samples.push_back(std::move(fv));
        }
    }
    return data;
}

}  // namespace

TEST_SUITE("classify") {

TEST_CASE("extract_features lays out the k window then the eps_prime window") {
    ParamMaps p;
    p.k = Map2D(5, 5);
    p.eps_prime = Map2D(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            p.k.at(x, y) = 100.0 * y + x;       // recognizable coordinates
            p.eps_prime.at(x, y) = -(100.0 * y + x);
        }

    FeatureVector fv = extract_features(p, 2, 2, 3);
    REQUIRE(fv.values.size() == 18);
    // k block, row-major over the 3x3 window centered at (2,2).
    const double expect_k[] = {101, 102, 103, 201, 202, 203, 301, 302, 303};
    for (int i = 0; i < 9; ++i) {
        CHECK(fv.values[i] == expect_k[i]);
        CHECK(fv.values[9 + i] == -expect_k[i]);
    }
    CHECK(fv.label == -1);
    CHECK_FALSE(fv.metal);

    // w = 1 degenerates to the center pixel pair.
    FeatureVector one = extract_features(p, 4, 0, 1);
    REQUIRE(one.values.size() == 2);
    CHECK(one.values[0] == 4.0);
    CHECK(one.values[1] == -4.0);
}

TEST_CASE("extract_features validates the window") {
    ParamMaps p;
    p.k = Map2D(5, 5, 1.0);
    p.eps_prime = Map2D(5, 5, 1.0);
    CHECK_THROWS_AS(extract_features(p, 2, 2, 2), std::invalid_argument);   // even
    CHECK_THROWS_AS(extract_features(p, 2, 2, -1), std::invalid_argument);  // negative
    CHECK_THROWS_AS(extract_features(p, 0, 2, 3), std::invalid_argument);   // clips left
    CHECK_THROWS_AS(extract_features(p, 2, 4, 3), std::invalid_argument);   // clips bottom
    CHECK_NOTHROW(extract_features(p, 1, 1, 3));
}

TEST_CASE("Normalizer computes population statistics and guards zero variance") {
    // Hand-checked: feature 0 over {1, 3} has mean 2, population sd 1;
    // feature 1 is constant so its sd falls back to 1.
    FeatureVector a, b;
    a.values = {1.0, 7.0};
    b.values = {3.0, 7.0};
    std::vector<const FeatureVector*> train{&a, &b};

    Normalizer nz;
    nz.fit(train);
    REQUIRE(nz.mean.size() == 2);
    CHECK(nz.mean[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(nz.stddev[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(nz.mean[1] == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(nz.stddev[1] == 1.0);

    std::vector<double> z = nz.apply({3.0, 8.0});
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(z[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("centroid model classifies separable blobs perfectly") {
    MaterialDataset data = blob_dataset(3, 5, 3, 21);
    CentroidModel model = train_centroid(data);
    REQUIRE(model.class_ids.size() == 3);
    CHECK(std::is_sorted(model.class_ids.begin(), model.class_ids.end()));

    for (const FeatureVector& fv : data.samples) {
        Prediction pred = model.predict(fv);
        CHECK(pred.label == fv.label);
        REQUIRE(pred.scores.size() == 3);
        // Scores are distances: the winning class holds the smallest one.
        const std::size_t argmin =
            std::min_element(pred.scores.begin(), pred.scores.end()) - pred.scores.begin();
        CHECK(model.class_ids[argmin] == pred.label);
    }
}

TEST_CASE("centroid prediction breaks ties toward the lower class id") {
    // Two training points symmetric about the query: both centroids end up
    // exactly equidistant from it.
    MaterialDataset data;
    data.label_names = {"a", "b"};
    FeatureVector s0, s1;
    s0.values = {0.0, 1.0};
    s0.label = 0;
    s1.values = {2.0, 1.0};
    s1.label = 1;
    data.samples = {s0, s1};

    CentroidModel model = train_centroid(data);
    FeatureVector q;
    q.values = {1.0, 1.0};
    CHECK(model.predict(q).label == 0);
}

TEST_CASE("mlp reaches perfect training accuracy on separable blobs") {
    MaterialDataset data = blob_dataset(3, 5, 1, 22);
    MlpOptions opts;
    opts.hidden = 16;
    opts.epochs = 300;
    opts.lr = 0.05;
    opts.seed = 3;
    MlpModel model = train_mlp(data, opts);
    CHECK(model.n_in == 2);
    CHECK(model.n_out == 3);

    for (const FeatureVector& fv : data.samples) {
        Prediction pred = model.predict(fv);
        CHECK(pred.label == fv.label);
        // Scores are probabilities over class_ids.
        double sum = 0.0;
        for (double s : pred.scores) {
            CHECK(s >= 0.0);
            sum += s;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("mlp training is deterministic in the seed") {
    MaterialDataset data = blob_dataset(2, 4, 1, 23);
    MlpOptions opts;
    opts.hidden = 8;
    opts.epochs = 50;
    opts.seed = 9;
    MlpModel a = train_mlp(data, opts);
    MlpModel b = train_mlp(data, opts);
    CHECK(a.w1 == b.w1);
    CHECK(a.b1 == b.b1);
    CHECK(a.w2 == b.w2);
    CHECK(a.b2 == b.b2);

    opts.seed = 10;
    MlpModel c = train_mlp(data, opts);
    CHECK(a.w1 != c.w1);  // a different seed draws different initial weights
}

TEST_CASE("mlp requires at least two trainable classes") {
    MaterialDataset data = blob_dataset(1, 4, 1, 24);
    MlpOptions opts;
    CHECK_THROWS_AS(train_mlp(data, opts), std::invalid_argument);
}

TEST_CASE("predict_routed sends metal-flagged samples to the reserved label") {
    MaterialDataset data = blob_dataset(2, 4, 1, 25);
    CentroidModel model = train_centroid(data);

    FeatureVector metal;
    metal.values = {0.0, 0.0};
    metal.metal = true;
    CHECK(predict_routed(model, metal, 7) == 7);

    metal.metal = false;
    CHECK(predict_routed(model, metal, 7) != 7);  // now the model decides
}

TEST_CASE("loo_cv is perfect on separable blobs for both classifiers") {
    MaterialDataset data = blob_dataset(3, 4, 3, 26);
    MlpOptions opts;
    opts.hidden = 16;
    opts.epochs = 300;
    opts.lr = 0.05;
    opts.seed = 5;

    ConfusionMatrix cm_c = loo_cv(data, ClassifierKind::centroid, opts);
    CHECK(cm_c.accuracy() == 1.0);
    CHECK(cm_c.total() == 12);
    REQUIRE(cm_c.labels.size() == 3);
    for (int c = 0; c < 3; ++c) CHECK(cm_c.counts[c][c] == 4);

    ConfusionMatrix cm_m = loo_cv(data, ClassifierKind::mlp, opts);
    CHECK(cm_m.accuracy() == 1.0);
}

TEST_CASE("loo_cv cannot exceed chance on twin samples with different labels") {
    // Two identical feature vectors labeled differently: each fold trains on
    // the other sample only, so the model can only predict the other label.
    MaterialDataset data;
    data.label_names = {"a", "b"};
    FeatureVector s0, s1;
    s0.values = {1.0, 2.0};
    s0.label = 0;
    s1.values = {1.0, 2.0};
    s1.label = 1;
    data.samples = {s0, s1};

    ConfusionMatrix cm = loo_cv(data, ClassifierKind::centroid);
    CHECK(cm.accuracy() == 0.0);
    CHECK(cm.counts[0][1] == 1);
    CHECK(cm.counts[1][0] == 1);
}

TEST_CASE("loo_cv routes metal samples and appends the reserved label") {
    MaterialDataset data = blob_dataset(2, 4, 1, 27);
    FeatureVector metal;
    metal.values = {0.0, 0.0};
    metal.label = 0;  // manifest said mat0, but the stack showed no heating
    metal.metal = true;
    data.samples.push_back(metal);

    ConfusionMatrix cm = loo_cv(data, ClassifierKind::centroid);
    REQUIRE(cm.labels.size() == 3);
    CHECK(cm.labels[2] == kMetalLabel);
    // The metal sample lands in row "mat0", column "metal/conductor".
    CHECK(cm.counts[0][2] == 1);
    // 8 clean samples right, 1 metal sample counted as a miss for mat0.
    CHECK(cm.total() == 9);
    CHECK(cm.accuracy() == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("loo_cv keeps an existing metal label instead of appending a twin") {
    MaterialDataset data = blob_dataset(2, 3, 1, 28);
    data.label_names.push_back(kMetalLabel);
    FeatureVector metal;
    metal.values = {0.0, 0.0};
    metal.label = 2;  // correctly labeled in the manifest
    metal.metal = true;
    data.samples.push_back(metal);

    ConfusionMatrix cm = loo_cv(data, ClassifierKind::centroid);
    REQUIRE(cm.labels.size() == 3);
    CHECK(cm.counts[2][2] == 1);  // routed metal is a correct prediction here
    CHECK(cm.accuracy() == 1.0);
}

TEST_CASE("loo_cv confusion matrices reproduce exactly for a fixed seed") {
    MaterialDataset data = blob_dataset(3, 3, 1, 29);
    MlpOptions opts;
    opts.hidden = 12;
    opts.epochs = 120;
    opts.seed = 77;
    ConfusionMatrix a = loo_cv(data, ClassifierKind::mlp, opts);
    ConfusionMatrix b = loo_cv(data, ClassifierKind::mlp, opts);
    CHECK(a.counts == b.counts);
    CHECK(a.labels == b.labels);
}

TEST_CASE("confusion matrix accuracy and total agree with hand counts") {
    ConfusionMatrix cm;
    cm.labels = {"x", "y"};
    cm.counts = {{3, 1}, {0, 2}};
    CHECK(cm.total() == 6);
    CHECK(cm.accuracy() == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
}

}  // TEST_SUITE
