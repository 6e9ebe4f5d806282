#pragma once

#include "nudgekit/aggregate.hpp"
#include "nudgekit/ml/dataset.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nudgekit::sleep {

// Fixed 20-slot feature layout of a 10-minute window.
inline constexpr std::size_t kWindowFeatureCount = 20;

enum Feature : std::size_t {
    kMovementMin = 0, kMovementAvg, kMovementMax, kMovementStd,
    kNoiseMin, kNoiseAvg, kNoiseMax, kNoiseStd,
    kLightMin, kLightAvg, kLightMax, kLightStd,
    kScreenSpellMin, kScreenSpellAvg, kScreenSpellMax, kScreenSpellStd,
    kLatitude, kLongitude,
    kPrevBedMinutes, kPrevWakeMinutes,
};

const std::array<std::string, kWindowFeatureCount>& window_feature_names();

// Modality groups mirroring the single-feature evaluation rows
// (movement, light, screen, location, time, noise).
struct ModalityGroup {
    const char* name;
    std::vector<std::size_t> columns;
};
const std::vector<ModalityGroup>& modality_groups();

enum class WindowLabel { unlabeled, awake, sleeping };

struct SleepWindow {
    TimePoint window_start = 0;
    std::int32_t window_len_s = kWindowSeconds; // 10 min pinned; 15/20/30 supported
    DayId day = 0;
    int index_of_day = 0; // 0..143 within the 18:00-anchored day
    std::array<double, kWindowFeatureCount> features{};
    WindowLabel label = WindowLabel::unlabeled;
    double sleep_proba = 0.0; // filled by classification
    std::string place_id;     // filled once a registry assigns it

    TimePoint window_end() const { return window_start + window_len_s; }
};

// Running per-subject context used to impute absent modalities with the
// subject's time-of-day median over prior days, and to supply fallback
// previous bed/wake times.
class SubjectHistory {
public:
    std::optional<Stats> median_stats(int window_idx, int modality) const;
    std::optional<double> median_bed_minutes() const;
    std::optional<double> median_wake_minutes() const;
    std::optional<LatLon> last_location() const { return last_location_; }

    // Call after building a day: records genuinely observed stats only.
    void observe_stats(int window_idx, int modality, const Stats& s);
    void observe_episode(double bed_minutes, double wake_minutes);
    void observe_location(const LatLon& p) { last_location_ = p; }

private:
    // modality index: 0 movement, 1 noise, 2 light, 3 screen
    struct Cell {
        std::vector<double> min, avg, max, std;
    };
    std::array<std::vector<Cell>, 4> cells_; // sized lazily to 144
    std::vector<double> bed_minutes_, wake_minutes_;
    std::optional<LatLon> last_location_;
};

struct PrevSleepTimes {
    double bed_minutes = 330.0;  // 23:30, population default
    double wake_minutes = 810.0; // 07:30
};

// Tiles the analysis day [18:00 previous day, 18:00 current day) with
// non-overlapping windows; 144 per day at the pinned 10-minute size.
// Records outside the day are ignored; absent modalities are imputed from
// `history` when available, global constants otherwise (movement 0, light
// 0 lux, noise 30 dB, screen one uninterrupted full-window spell). When
// `history` is non-null the observed stats of this day are appended to it
// afterwards. window_minutes must divide the day evenly.
std::vector<SleepWindow> build_windows(DayId day, std::span<const FeatureRecord> records,
                                       const std::optional<PrevSleepTimes>& prev,
                                       SubjectHistory* history, int window_minutes = 10);

// Majority-overlap ground-truth labeling: a window is sleeping when at
// least half of it lies inside some interval.
void label_windows_from_intervals(std::vector<SleepWindow>& windows,
                                  std::span<const std::pair<TimePoint, TimePoint>> intervals);

// Dataset row for one window, tagged (subject, day, place).
ml::Row window_to_row(const SleepWindow& w, const std::string& subject);

} // namespace nudgekit::sleep
