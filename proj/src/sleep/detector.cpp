#include "nudgekit/sleep/detector.hpp"

#include "nudgekit/errors.hpp"
#include "nudgekit/rng.hpp"

#include <algorithm>

namespace nudgekit::sleep {

void classify_day(std::vector<SleepWindow>& windows, PlaceRegistry& registry,
                  const FallbackPolicy& policy) {
    if (!registry.has_any_model()) {
        throw DataError("no trained model in the place registry; run training first");
    }
    for (SleepWindow& w : windows) {
        LatLon loc{w.features[kLatitude], w.features[kLongitude]};
        w.place_id = registry.assign(loc);
        const ml::Model* model = registry.model_for(w.place_id);
        if (!model) model = registry.nearest_model_within(loc, policy.nearest_model_m);
        if (!model) model = registry.pooled_model();
        if (!model) throw DataError("no applicable model for place " + w.place_id);
        w.sleep_proba = model->predict_proba(w.features);
        w.label = w.sleep_proba > 0.5 ? WindowLabel::sleeping : WindowLabel::awake;
    }
}

std::vector<ml::EvalMetrics> learning_curve(std::vector<LabeledDay> corpus,
                                            const ml::ClassifierSpec& spec, std::uint64_t seed,
                                            const std::string& subject, double place_radius_m) {
    if (corpus.size() < 2) throw DataError("learning_curve needs at least 2 labeled days");
    std::sort(corpus.begin(), corpus.end(),
              [](const LabeledDay& a, const LabeledDay& b) { return a.day < b.day; });

    std::vector<std::string> names(window_feature_names().begin(), window_feature_names().end());
    std::vector<ml::EvalMetrics> out;
    PlaceRegistry registry(place_radius_m);
    for (std::size_t d = 0; d + 1 < corpus.size(); ++d) {
        // append day d to the training pool
        for (const SleepWindow& w : corpus[d].windows) {
            SleepWindow tagged = w;
            tagged.place_id = registry.assign(LatLon{w.features[kLatitude], w.features[kLongitude]});
            registry.append_training_row(tagged.place_id, window_to_row(tagged, subject));
        }
        registry.train_models(names, spec, Rng(seed).substream("curve-day", d).u64());

        std::vector<SleepWindow> eval = corpus[d + 1].windows;
        classify_day(eval, registry);

        std::vector<int> labels;
        std::vector<double> probs;
        labels.reserve(eval.size());
        probs.reserve(eval.size());
        for (std::size_t i = 0; i < eval.size(); ++i) {
            labels.push_back(corpus[d + 1].windows[i].label == WindowLabel::sleeping ? 1 : 0);
            probs.push_back(eval[i].sleep_proba);
        }
        out.push_back(ml::compute_metrics(labels, probs));
    }
    return out;
}

} // namespace nudgekit::sleep
