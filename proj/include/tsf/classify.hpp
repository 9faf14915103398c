#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsf/domain.hpp"

namespace tsf {

/// Reserved label for samples the solver cannot characterize (no visible
/// heating); they bypass the trained models entirely.
inline constexpr const char* kMetalLabel = "metal/conductor";

/// One training/evaluation sample: a w x w window of k values followed by
/// the matching window of eps_prime values, row-major, so 2*w*w features.
struct FeatureVector {
    std::vector<double> values;
    int label = -1;      // index into MaterialDataset::label_names, -1 if unknown
    bool metal = false;  // flagged by detect_metal during extraction
};

struct MaterialDataset {
    std::vector<FeatureVector> samples;
    std::vector<std::string> label_names;
};

/// Window extraction around (center_x, center_y); w must be odd and the
/// window must fit inside the maps.
FeatureVector extract_features(const ParamMaps& params, int center_x, int center_y, int w);

/// Per-feature z-score statistics, fitted on training data only.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> stddev;  // zero-variance features fall back to 1

    void fit(const std::vector<const FeatureVector*>& train);
    std::vector<double> apply(const std::vector<double>& v) const;
};

struct Prediction {
    int label = -1;              // index into the dataset's label_names
    std::vector<double> scores;  // per model class, order = model class_ids
};

/// Nearest-centroid model in z-scored feature space. Classes are the ones
/// present in the training samples; scores are Euclidean distances.
struct CentroidModel {
    Normalizer norm;
    std::vector<int> class_ids;                 // ascending label ids
    std::vector<std::vector<double>> centroids; // one per class_id

    Prediction predict(const FeatureVector& fv) const;
};

CentroidModel train_centroid(const MaterialDataset& data);

struct MlpOptions {
    int hidden = 90;
    int epochs = 500;
    double lr = 1e-2;
    std::uint64_t seed = 1;  // always set it; identical seeds reproduce weights exactly
};

/// One-hidden-layer tanh network with softmax output, trained full-batch on
/// cross-entropy. Deterministic given the seed; scores are class
/// probabilities. Needs at least two classes in the training data.
struct MlpModel {
    Normalizer norm;
    std::vector<int> class_ids;
    int n_in = 0, n_hidden = 0, n_out = 0;
    std::vector<double> w1, b1;  // w1[n_in][n_hidden] row-major
    std::vector<double> w2, b2;  // w2[n_hidden][n_out] row-major

    Prediction predict(const FeatureVector& fv) const;
};

MlpModel train_mlp(const MaterialDataset& data, const MlpOptions& opts);

enum class ClassifierKind { centroid, mlp };

/// Routed prediction: metal-flagged samples receive metal_label_id without
/// consulting the model.
template <class Model>
int predict_routed(const Model& model, const FeatureVector& fv, int metal_label_id) {
    if (fv.metal) return metal_label_id;
    return model.predict(fv).label;
}

/// rows/cols indexed by label id; rows are true labels, cols predictions.
struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<int>> counts;

    double accuracy() const;
    int total() const;
};

/// Leave-one-out cross-validation. Metal-flagged samples never enter a
/// training fold and are always predicted as the reserved metal label
/// (appended to the label set when missing). Deterministic given opts.seed.
ConfusionMatrix loo_cv(const MaterialDataset& data, ClassifierKind kind,
                       const MlpOptions& opts = {});

}  // namespace tsf
