#pragma once

#include "nudgekit/aggregate.hpp"
#include "nudgekit/sleep/episode.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nudgekit::correlate {

using sleep::SleepEpisode;

// One day's parameter vector. Activity fields cover the waking span
// [wake(d-1), bed(d)]; pre-bed aggregates cover the closed 2 h window
// ending at bed time.
struct DailyParams {
    DayId day_id = 0;
    double daily_steps = 0.0;
    double walking_min = 0.0;
    double running_min = 0.0;
    double comm_min = 0.0;
    double video_min = 0.0;
    double music_min = 0.0;
    double reading_min = 0.0;
    double gaming_min = 0.0;
    std::optional<double> pre_bed_light; // mean lux over the 2 h before bed
    std::optional<double> pre_bed_noise; // mean dB over the 2 h before bed
    std::map<std::string, double> pre_bed_app_minutes; // per app_id
    double bed_time_min = 0.0;  // minutes since the 18:00 anchor
    double wake_time_min = 0.0;
    double sleep_duration_h = 0.0;
    double wakeup_count = 0.0;
};

struct CadenceConfig {
    double walking_steps_per_slot = 60.0;  // [walking, running) per 5-min slot
    double running_steps_per_slot = 130.0;
};

struct ExtractWarnings {
    std::vector<std::string> skipped_days; // days without surrounding episodes
};

// Needs episodes for day d-1 and d; days missing one are skipped with a
// warning. App events are the raw trace (used for per-app pre-bed minutes).
std::vector<DailyParams> extract_daily_params(std::span<const FeatureRecord> records,
                                              const EventLog& app_events,
                                              std::span<const SleepEpisode> episodes,
                                              const CadenceConfig& cfg = {},
                                              ExtractWarnings* warnings = nullptr);

struct CorrelationMatrix {
    std::vector<std::string> names;
    // r[i][j] absent when fewer than min_n complete pairs or zero variance
    std::vector<std::vector<std::optional<double>>> r;
    std::vector<std::vector<int>> n; // complete pairs per cell

    std::string to_json() const;
    void write_csv(std::ostream& out) const;
};

// Pairwise-complete Pearson correlations over the daily parameter columns
// (the fixed set above plus per-app pre-bed minutes for the top `top_apps`
// apps by total use).
CorrelationMatrix pearson_matrix(std::span<const DailyParams> rows, int min_n = 5,
                                 std::size_t top_apps = 10);

// Plain Pearson r over paired samples; nullopt when either side has zero
// variance or fewer than 2 pairs.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct BestProfile {
    double best_daily_steps = 0.0;
    double best_bed_time_min = 0.0;
    std::map<std::string, double> best_app_usage_min;

    std::string to_json() const;
};

struct BestProfileConfig {
    double quartile_fraction = 0.25;
    double bed_band_minutes = 60.0; // sliding beneficial-band width
    std::size_t top_apps = 10;
};

// Sleep score s(d) = z(duration) - z(wakeups); best values are the means
// over the top-quartile days, with bed time clamped into the beneficial
// band found by a sliding 1 h scan. Requires >= 8 days.
BestProfile best_profile(std::span<const DailyParams> rows, const BestProfileConfig& cfg = {});

// Indices of the top-quartile days by sleep score, stable under any
// affine rescaling of the score inputs.
std::vector<std::size_t> top_quartile_days(std::span<const DailyParams> rows, double fraction);

} // namespace nudgekit::correlate
