#pragma once

#include "nudgekit/ml/metrics.hpp"
#include "nudgekit/sleep/episode.hpp"
#include "nudgekit/sleep/places.hpp"

#include <cstdint>
#include <vector>

namespace nudgekit::sleep {

struct FallbackPolicy {
    double nearest_model_m = 1000.0; // try the nearest place's model this far out
};

// Routes every window to its place's model; places without one fall back to
// the nearest modeled place within 1 km, then to the pooled model. New
// locations register new places on the fly. Throws DataError when the
// registry has no model at all.
void classify_day(std::vector<SleepWindow>& windows, PlaceRegistry& registry,
                  const FallbackPolicy& policy = {});

struct LabeledDay {
    DayId day = 0;
    std::vector<SleepWindow> windows; // carrying ground-truth labels
};

// Prequential evaluation: for d in 1..N-1 train on days 1..d, score day d+1.
// Returns N-1 metric rows. Days are processed in chronological order.
std::vector<ml::EvalMetrics> learning_curve(std::vector<LabeledDay> corpus,
                                            const ml::ClassifierSpec& spec, std::uint64_t seed,
                                            const std::string& subject = "s",
                                            double place_radius_m = 100.0);

} // namespace nudgekit::sleep
