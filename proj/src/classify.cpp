#include "tsf/classify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tsf/errors.hpp"
#include "tsf/rng.hpp"

namespace tsf {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

// Training views: non-metal samples with a valid label.
std::vector<const FeatureVector*> trainable(const MaterialDataset& data) {
    std::vector<const FeatureVector*> out;
    for (const FeatureVector& fv : data.samples) {
        if (fv.metal) continue;
        require(fv.label >= 0 && fv.label < int(data.label_names.size()),
                "sample carries an out-of-range label id");
        out.push_back(&fv);
    }
    return out;
}

std::vector<int> present_classes(const std::vector<const FeatureVector*>& train) {
    std::vector<int> ids;
    for (const FeatureVector* fv : train) ids.push_back(fv->label);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

void check_same_width(const std::vector<const FeatureVector*>& train) {
    require(!train.empty(), "training data has no usable samples");
    const std::size_t d = train[0]->values.size();
    require(d > 0, "feature vectors are empty");
    for (const FeatureVector* fv : train)
        require(fv->values.size() == d, "feature vectors disagree in length");
}

int argbest(const std::vector<double>& scores, bool smaller_wins) {
    int best = 0;
    for (int i = 1; i < int(scores.size()); ++i) {
        const bool better = smaller_wins ? scores[i] < scores[best] : scores[i] > scores[best];
        if (better) best = i;  // strict comparison: ties keep the lower index
    }
    return best;
}

}  // namespace

FeatureVector extract_features(const ParamMaps& params, int center_x, int center_y, int w) {
    require(w >= 1 && w % 2 == 1, "window size w must be odd and >= 1");
    require(params.k.same_shape(params.eps_prime) && params.k.nx > 0,
            "param maps must be non-empty with equal shape");
    const int half = w / 2;
    require(center_x - half >= 0 && center_x + half < params.k.nx &&
                center_y - half >= 0 && center_y + half < params.k.ny,
            "feature window does not fit inside the maps");
    FeatureVector fv;
    fv.values.reserve(std::size_t(2) * w * w);
    for (int y = center_y - half; y <= center_y + half; ++y)
        for (int x = center_x - half; x <= center_x + half; ++x)
            fv.values.push_back(params.k.at(x, y));
    for (int y = center_y - half; y <= center_y + half; ++y)
        for (int x = center_x - half; x <= center_x + half; ++x)
            fv.values.push_back(params.eps_prime.at(x, y));
    return fv;
}

void Normalizer::fit(const std::vector<const FeatureVector*>& train) {
    check_same_width(train);
    const std::size_t d = train[0]->values.size();
    mean.assign(d, 0.0);
    stddev.assign(d, 0.0);
    for (const FeatureVector* fv : train)
        for (std::size_t j = 0; j < d; ++j) mean[j] += fv->values[j];
    for (std::size_t j = 0; j < d; ++j) mean[j] /= double(train.size());
    for (const FeatureVector* fv : train)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = fv->values[j] - mean[j];
            stddev[j] += c * c;
        }
    for (std::size_t j = 0; j < d; ++j) {
        stddev[j] = std::sqrt(stddev[j] / double(train.size()));
        if (stddev[j] == 0.0) stddev[j] = 1.0;
    }
}

std::vector<double> Normalizer::apply(const std::vector<double>& v) const {
    require(v.size() == mean.size(), "feature length does not match the trained normalizer");
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = (v[j] - mean[j]) / stddev[j];
    return out;
}

CentroidModel train_centroid(const MaterialDataset& data) {
    const auto train = trainable(data);
    check_same_width(train);
    CentroidModel model;
    model.norm.fit(train);
    model.class_ids = present_classes(train);
    const std::size_t d = train[0]->values.size();
    model.centroids.assign(model.class_ids.size(), std::vector<double>(d, 0.0));
    std::vector<int> counts(model.class_ids.size(), 0);
    for (const FeatureVector* fv : train) {
        const std::size_t c = std::lower_bound(model.class_ids.begin(), model.class_ids.end(),
                                               fv->label) -
                              model.class_ids.begin();
        const std::vector<double> z = model.norm.apply(fv->values);
        for (std::size_t j = 0; j < d; ++j) model.centroids[c][j] += z[j];
        ++counts[c];
    }
    for (std::size_t c = 0; c < model.centroids.size(); ++c)
        for (double& v : model.centroids[c]) v /= double(counts[c]);
    return model;
}

Prediction CentroidModel::predict(const FeatureVector& fv) const {
    const std::vector<double> z = norm.apply(fv.values);
    Prediction pred;
    pred.scores.resize(centroids.size());
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        double ssq = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double dd = z[j] - centroids[c][j];
            ssq += dd * dd;
        }
        pred.scores[c] = std::sqrt(ssq);
    }
    pred.label = class_ids[argbest(pred.scores, /*smaller_wins=*/true)];
    return pred;
}

MlpModel train_mlp(const MaterialDataset& data, const MlpOptions& opts) {
    require(opts.hidden >= 1, "hidden width must be >= 1");
    require(opts.epochs >= 1, "epochs must be >= 1");
    require(std::isfinite(opts.lr) && opts.lr > 0, "lr must be finite and > 0");
    const auto train = trainable(data);
    check_same_width(train);

    MlpModel model;
    model.class_ids = present_classes(train);
    if (model.class_ids.size() < 2)
        throw std::invalid_argument("mlp training needs at least 2 classes");
    model.norm.fit(train);

    const int n = int(train.size());
    const int d = int(train[0]->values.size());
    const int h = opts.hidden;
    const int c = int(model.class_ids.size());
    model.n_in = d;
    model.n_hidden = h;
    model.n_out = c;

    std::vector<std::vector<double>> x(n);
    std::vector<int> target(n);
    for (int i = 0; i < n; ++i) {
        x[i] = model.norm.apply(train[i]->values);
        target[i] = int(std::lower_bound(model.class_ids.begin(), model.class_ids.end(),
                                         train[i]->label) -
                        model.class_ids.begin());
    }

    Rng rng(opts.seed);
    const double a1 = 1.0 / std::sqrt(double(d));
    const double a2 = 1.0 / std::sqrt(double(h));
    model.w1.resize(std::size_t(d) * h);
    model.b1.assign(h, 0.0);
    model.w2.resize(std::size_t(h) * c);
    model.b2.assign(c, 0.0);
    for (double& w : model.w1) w = rng.uniform(-a1, a1);
    for (double& w : model.w2) w = rng.uniform(-a2, a2);

    std::vector<double> hid(std::size_t(n) * h), prob(std::size_t(n) * c);
    std::vector<double> gw1(model.w1.size()), gb1(h), gw2(model.w2.size()), gb2(c);
    std::vector<double> dhid(h);

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        std::fill(gw1.begin(), gw1.end(), 0.0);
        std::fill(gb1.begin(), gb1.end(), 0.0);
        std::fill(gw2.begin(), gw2.end(), 0.0);
        std::fill(gb2.begin(), gb2.end(), 0.0);
        double loss = 0.0;
        for (int i = 0; i < n; ++i) {
            double* hi = hid.data() + std::size_t(i) * h;
            for (int j = 0; j < h; ++j) {
                double s = model.b1[j];
                for (int q = 0; q < d; ++q) s += x[i][q] * model.w1[std::size_t(q) * h + j];
                hi[j] = std::tanh(s);
            }
            double* pi = prob.data() + std::size_t(i) * c;
            double zmax = -1e300;
            for (int j = 0; j < c; ++j) {
                double s = model.b2[j];
                for (int q = 0; q < h; ++q) s += hi[q] * model.w2[std::size_t(q) * c + j];
                pi[j] = s;
                zmax = std::max(zmax, s);
            }
            double zsum = 0.0;
            for (int j = 0; j < c; ++j) {
                pi[j] = std::exp(pi[j] - zmax);
                zsum += pi[j];
            }
            for (int j = 0; j < c; ++j) pi[j] /= zsum;
            loss -= std::log(std::max(pi[target[i]], 1e-300));

            // dL/dlogits = prob - onehot, averaged over the batch later
            for (int j = 0; j < c; ++j) {
                const double dz = pi[j] - (j == target[i] ? 1.0 : 0.0);
                gb2[j] += dz;
                for (int q = 0; q < h; ++q) gw2[std::size_t(q) * c + j] += hi[q] * dz;
            }
            for (int q = 0; q < h; ++q) {
                double s = 0.0;
                for (int j = 0; j < c; ++j)
                    s += (pi[j] - (j == target[i] ? 1.0 : 0.0)) * model.w2[std::size_t(q) * c + j];
                dhid[q] = s * (1.0 - hi[q] * hi[q]);
                gb1[q] += dhid[q];
            }
            for (int q = 0; q < d; ++q)
                for (int j = 0; j < h; ++j) gw1[std::size_t(q) * h + j] += x[i][q] * dhid[j];
        }
        loss /= double(n);
        if (!std::isfinite(loss))
            throw TrainingError("mlp loss became non-finite at epoch " + std::to_string(epoch));
        const double scale = opts.lr / double(n);
        for (std::size_t j = 0; j < model.w1.size(); ++j) model.w1[j] -= scale * gw1[j];
        for (int j = 0; j < h; ++j) model.b1[j] -= scale * gb1[j];
        for (std::size_t j = 0; j < model.w2.size(); ++j) model.w2[j] -= scale * gw2[j];
        for (int j = 0; j < c; ++j) model.b2[j] -= scale * gb2[j];
    }
    return model;
}

Prediction MlpModel::predict(const FeatureVector& fv) const {
    const std::vector<double> z = norm.apply(fv.values);
    std::vector<double> hid(n_hidden);
    for (int j = 0; j < n_hidden; ++j) {
        double s = b1[j];
        for (int q = 0; q < n_in; ++q) s += z[q] * w1[std::size_t(q) * n_hidden + j];
        hid[j] = std::tanh(s);
    }
    Prediction pred;
    pred.scores.resize(n_out);
    double zmax = -1e300;
    for (int j = 0; j < n_out; ++j) {
        double s = b2[j];
        for (int q = 0; q < n_hidden; ++q) s += hid[q] * w2[std::size_t(q) * n_out + j];
        pred.scores[j] = s;
        zmax = std::max(zmax, s);
    }
    double zsum = 0.0;
    for (double& s : pred.scores) {
        s = std::exp(s - zmax);
        zsum += s;
    }
    for (double& s : pred.scores) s /= zsum;
    pred.label = class_ids[argbest(pred.scores, /*smaller_wins=*/false)];
    return pred;
}

double ConfusionMatrix::accuracy() const {
    long long diag = 0, all = 0;
    for (std::size_t i = 0; i < counts.size(); ++i)
        for (std::size_t j = 0; j < counts[i].size(); ++j) {
            all += counts[i][j];
            if (i == j) diag += counts[i][j];
        }
    return all == 0 ? 0.0 : double(diag) / double(all);
}

int ConfusionMatrix::total() const {
    long long all = 0;
    for (const auto& row : counts)
        for (int v : row) all += v;
    return int(all);
}

ConfusionMatrix loo_cv(const MaterialDataset& data, ClassifierKind kind,
                       const MlpOptions& opts) {
    require(data.samples.size() >= 2, "leave-one-out needs at least 2 samples");

    ConfusionMatrix cm;
    cm.labels = data.label_names;
    int metal_id = -1;
    for (std::size_t i = 0; i < cm.labels.size(); ++i)
        if (cm.labels[i] == kMetalLabel) metal_id = int(i);
    const bool any_metal =
        std::any_of(data.samples.begin(), data.samples.end(),
                    [](const FeatureVector& fv) { return fv.metal; });
    if (any_metal && metal_id < 0) {
        metal_id = int(cm.labels.size());
        cm.labels.push_back(kMetalLabel);
    }
    cm.counts.assign(cm.labels.size(), std::vector<int>(cm.labels.size(), 0));

    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const FeatureVector& held = data.samples[i];
        require(held.label >= 0 && held.label < int(cm.labels.size()),
                "sample carries an out-of-range label id");
        int predicted;
        if (held.metal) {
            predicted = metal_id;
        } else {
            MaterialDataset fold;
            fold.label_names = data.label_names;
            fold.samples.reserve(data.samples.size() - 1);
            for (std::size_t j = 0; j < data.samples.size(); ++j)
                if (j != i) fold.samples.push_back(data.samples[j]);
            if (kind == ClassifierKind::centroid) {
                predicted = predict_routed(train_centroid(fold), held, metal_id);
            } else {
                MlpOptions fold_opts = opts;
                fold_opts.seed = Rng(opts.seed).split(i).next_u64();
                predicted = predict_routed(train_mlp(fold, fold_opts), held, metal_id);
            }
        }
        cm.counts[held.label][predicted] += 1;
    }
    return cm;
}

}  // namespace tsf
