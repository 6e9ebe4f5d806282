#pragma once

#include "nudgekit/events.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace nudgekit {

// Population statistics over the samples of one modality in one slot.
// Absent stats mean "no samples", never "zero".
struct Stats {
    double min = 0.0;
    double avg = 0.0;
    double max = 0.0;
    double std = 0.0;
    int n = 0;
};

Stats stats_of(std::span<const double> samples);

// Combine two stats groups as if their sample sets were pooled.
Stats pool_stats(const Stats& a, const Stats& b);

struct ScreenSpell {
    TimePoint begin = 0;
    TimePoint end = 0; // exclusive
    bool on = false;
};

struct TimedMagnitude {
    double t = 0.0; // seconds, fractional allowed
    double magnitude = 0.0;
};

struct FeatureRecord {
    TimePoint slot_start = 0; // aligned to the 5-minute grid
    std::optional<Stats> movement;
    std::optional<Stats> light;
    std::optional<Stats> noise;
    double screen_on_seconds = 0.0;          // in [0, 300]
    std::vector<ScreenSpell> screen_spells;  // clipped to the slot
    int steps = 0;
    std::optional<LatLon> location;          // last fix in the slot
    std::array<double, kAppTypeCount> app_seconds{}; // indexed by AppType
};

struct StepConfig {
    double threshold = 1.5;      // peak must exceed slot mean by this much (m/s^2)
    double refractory_s = 0.25;  // minimum spacing between counted peaks
};

// Thresholded peak counting over chronological magnitude samples.
// The underlying data source only promises that steps can be inferred from
// movement; this counter is the pinned, deterministic stand-in.
int derive_steps(std::span<const TimedMagnitude> samples, const StepConfig& cfg = {});

// One FeatureRecord per 5-minute slot intersecting the log span.
// App start/stop pairs and screen on/off pairs are apportioned to slots by
// overlap; dangling opens are closed at the end of the log.
std::vector<FeatureRecord> aggregate_records(const EventLog& log, const StepConfig& step_cfg = {});

// Lossless CSV round-trip of aggregated records (screen spells packed as
// begin-end-state triples).
void write_records_csv(std::ostream& out, std::span<const FeatureRecord> records);
std::vector<FeatureRecord> read_records_csv(std::istream& in);

} // namespace nudgekit
