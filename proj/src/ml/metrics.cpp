#include "nudgekit/ml/metrics.hpp"

#include "nudgekit/errors.hpp"
#include "nudgekit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nudgekit::ml {

double f_measure(double precision, double recall) {
    double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

EvalMetrics compute_metrics(std::span<const int> labels, std::span<const double> probs,
                            double threshold) {
    if (labels.empty() || labels.size() != probs.size()) {
        throw DataError("compute_metrics: labels and probs must be equal-length and nonempty");
    }
    std::size_t n = labels.size();
    std::size_t pos = 0;
    for (int y : labels) pos += static_cast<std::size_t>(y != 0);
    if (pos == 0 || pos == n) {
        throw DataError("compute_metrics: labels are all one class, RRSE undefined");
    }

    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
        bool pred = probs[i] > threshold; // tie predicts the negative class
        bool truth = labels[i] != 0;
        if (pred && truth) ++tp;
        else if (pred && !truth) ++fp;
        else if (!pred && !truth) ++tn;
        else ++fn;
    }

    EvalMetrics m;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(n);
    m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f_value = f_measure(m.precision, m.recall);

    double ybar = static_cast<double>(pos) / static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double y = labels[i] != 0 ? 1.0 : 0.0;
        num += (probs[i] - y) * (probs[i] - y);
        den += (ybar - y) * (ybar - y);
    }
    m.rrse_percent = 100.0 * std::sqrt(num / den);
    return m;
}

EvalMetrics cross_validate(const Dataset& ds, const ClassifierSpec& spec, int k,
                           std::uint64_t seed) {
    if (k < 2) throw ConfigError("cross_validate: k must be >= 2");
    if (ds.rows.size() < static_cast<std::size_t>(k)) {
        throw DataError("cross_validate: fewer rows than folds");
    }
    if (!ds.trainable()) throw DataError("cross_validate: both classes must be present");

    // Canonical order, then a seeded stratified shuffle: the fold assignment
    // is a function of (content, seed), not of incoming row order.
    std::vector<std::size_t> order(ds.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Row& ra = ds.rows[a];
        const Row& rb = ds.rows[b];
        if (ra.tag != rb.tag) return ra.tag < rb.tag;
        if (ra.label != rb.label) return ra.label < rb.label;
        // NaN-safe lexicographic feature compare (absents sort first)
        for (std::size_t f = 0; f < ra.features.size(); ++f) {
            double x = ra.features[f], y = rb.features[f];
            bool ax = is_absent(x), ay = is_absent(y);
            if (ax != ay) return ax;
            if (!ax && x != y) return x < y;
        }
        return false;
    });

    Rng rng = Rng(seed).substream("cv");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i : order) by_class[ds.rows[i].label != 0 ? 1 : 0].push_back(i);
    rng.shuffle(by_class[0]);
    rng.shuffle(by_class[1]);

    std::vector<int> fold_of(ds.rows.size(), 0);
    for (int c = 0; c < 2; ++c) {
        for (std::size_t j = 0; j < by_class[c].size(); ++j) {
            fold_of[by_class[c][j]] = static_cast<int>(j % static_cast<std::size_t>(k));
        }
    }

    std::vector<int> labels(ds.rows.size());
    std::vector<double> probs(ds.rows.size());
    for (int fold = 0; fold < k; ++fold) {
        Dataset train;
        train.feature_names = ds.feature_names;
        for (std::size_t i : order) {
            if (fold_of[i] != fold) train.rows.push_back(ds.rows[i]);
        }
        Model model = Model::fit(train, spec, Rng(seed).substream("fold", static_cast<std::uint64_t>(fold)).u64());
        for (std::size_t i = 0; i < ds.rows.size(); ++i) {
            if (fold_of[i] != fold) continue;
            labels[i] = ds.rows[i].label;
            probs[i] = model.predict_proba(ds.rows[i].features);
        }
    }
    return compute_metrics(labels, probs);
}

} // namespace nudgekit::ml
