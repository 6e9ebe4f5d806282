#include "nudgekit/sleep/window.hpp"

#include "nudgekit/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nudgekit::sleep {

const std::array<std::string, kWindowFeatureCount>& window_feature_names() {
    static const std::array<std::string, kWindowFeatureCount> names = {
        "movement_min", "movement_avg", "movement_max", "movement_std",
        "noise_min",    "noise_avg",    "noise_max",    "noise_std",
        "light_min",    "light_avg",    "light_max",    "light_std",
        "screen_min",   "screen_avg",   "screen_max",   "screen_std",
        "lat",          "lon",
        "prev_bed_min", "prev_wake_min"};
    return names;
}

const std::vector<ModalityGroup>& modality_groups() {
    static const std::vector<ModalityGroup> groups = {
        {"movement", {kMovementMin, kMovementAvg, kMovementMax, kMovementStd}},
        {"light", {kLightMin, kLightAvg, kLightMax, kLightStd}},
        {"screen", {kScreenSpellMin, kScreenSpellAvg, kScreenSpellMax, kScreenSpellStd}},
        {"location", {kLatitude, kLongitude}},
        {"time", {kPrevBedMinutes, kPrevWakeMinutes}},
        {"noise", {kNoiseMin, kNoiseAvg, kNoiseMax, kNoiseStd}},
    };
    return groups;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

// Duration-weighted combination of the per-record stats a window spans:
// every record covers the same 5 minutes, so records weigh equally.
Stats pool_equal(const std::vector<Stats>& parts) {
    Stats s;
    if (parts.empty()) return s;
    s.min = parts[0].min;
    s.max = parts[0].max;
    double mean = 0.0, m2 = 0.0;
    for (const Stats& p : parts) {
        s.min = std::min(s.min, p.min);
        s.max = std::max(s.max, p.max);
        s.n += p.n;
        mean += p.avg;
        m2 += p.std * p.std + p.avg * p.avg;
    }
    double k = static_cast<double>(parts.size());
    s.avg = mean / k;
    s.std = std::sqrt(std::max(0.0, m2 / k - s.avg * s.avg));
    return s;
}

void put_stats(SleepWindow& w, std::size_t base, const Stats& s) {
    w.features[base + 0] = s.min;
    w.features[base + 1] = s.avg;
    w.features[base + 2] = s.max;
    w.features[base + 3] = s.std;
}

constexpr std::size_t kModalityBase[4] = {kMovementMin, kNoiseMin, kLightMin, kScreenSpellMin};

} // namespace

std::optional<Stats> SubjectHistory::median_stats(int window_idx, int modality) const {
    const auto& rows = cells_[static_cast<std::size_t>(modality)];
    if (static_cast<std::size_t>(window_idx) >= rows.size()) return std::nullopt;
    const Cell& c = rows[static_cast<std::size_t>(window_idx)];
    if (c.avg.empty()) return std::nullopt;
    Stats s;
    s.min = median_of(c.min);
    s.avg = median_of(c.avg);
    s.max = median_of(c.max);
    s.std = median_of(c.std);
    s.n = 0; // imputed, no underlying samples
    return s;
}

std::optional<double> SubjectHistory::median_bed_minutes() const {
    if (bed_minutes_.empty()) return std::nullopt;
    return median_of(bed_minutes_);
}

std::optional<double> SubjectHistory::median_wake_minutes() const {
    if (wake_minutes_.empty()) return std::nullopt;
    return median_of(wake_minutes_);
}

void SubjectHistory::observe_stats(int window_idx, int modality, const Stats& s) {
    auto& rows = cells_[static_cast<std::size_t>(modality)];
    if (static_cast<std::size_t>(window_idx) >= rows.size()) {
        rows.resize(static_cast<std::size_t>(window_idx) + 1);
    }
    Cell& c = rows[static_cast<std::size_t>(window_idx)];
    c.min.push_back(s.min);
    c.avg.push_back(s.avg);
    c.max.push_back(s.max);
    c.std.push_back(s.std);
}

void SubjectHistory::observe_episode(double bed_minutes, double wake_minutes) {
    bed_minutes_.push_back(bed_minutes);
    wake_minutes_.push_back(wake_minutes);
}

std::vector<SleepWindow> build_windows(DayId day, std::span<const FeatureRecord> records,
                                       const std::optional<PrevSleepTimes>& prev,
                                       SubjectHistory* history, int window_minutes) {
    const std::int64_t window_s = static_cast<std::int64_t>(window_minutes) * 60;
    if (window_s <= 0 || kSecondsPerDay % window_s != 0 || window_s % kSlotSeconds != 0) {
        throw ConfigError("window size must divide the day in whole 5-minute slots");
    }
    const TimePoint anchor = anchor_of_day(day);
    const int n_windows = static_cast<int>(kSecondsPerDay / window_s);
    const int slots_per_window = static_cast<int>(window_s / kSlotSeconds);

    // Index this day's records by slot.
    std::vector<const FeatureRecord*> by_slot(kSecondsPerDay / kSlotSeconds, nullptr);
    for (const FeatureRecord& r : records) {
        std::int64_t off = r.slot_start - anchor;
        if (off < 0 || off >= kSecondsPerDay) continue;
        by_slot[static_cast<std::size_t>(off / kSlotSeconds)] = &r;
    }

    PrevSleepTimes prev_times;
    if (prev) {
        prev_times = *prev;
    } else if (history) {
        if (auto b = history->median_bed_minutes()) prev_times.bed_minutes = *b;
        if (auto w = history->median_wake_minutes()) prev_times.wake_minutes = *w;
    }

    // Location carry-forward; backfill the start of the day from the first
    // fix, then the subject's last known location, then (0,0).
    std::optional<LatLon> first_fix;
    for (const FeatureRecord* r : by_slot) {
        if (r && r->location) {
            first_fix = r->location;
            break;
        }
    }
    std::optional<LatLon> cursor_fix = first_fix;
    if (!cursor_fix && history) cursor_fix = history->last_location();

    struct Observed {
        int window_idx;
        int modality;
        Stats stats;
    };
    std::vector<Observed> observed;

    std::vector<SleepWindow> out;
    out.reserve(static_cast<std::size_t>(n_windows));
    for (int wi = 0; wi < n_windows; ++wi) {
        SleepWindow w;
        w.window_start = anchor + static_cast<TimePoint>(wi) * window_s;
        w.window_len_s = static_cast<std::int32_t>(window_s);
        w.day = day;
        w.index_of_day = wi;

        std::vector<const FeatureRecord*> recs;
        for (int s = 0; s < slots_per_window; ++s) {
            const FeatureRecord* r = by_slot[static_cast<std::size_t>(wi * slots_per_window + s)];
            if (r) recs.push_back(r);
        }

        // movement / noise / light
        for (int modality = 0; modality < 3; ++modality) {
            std::vector<Stats> parts;
            for (const FeatureRecord* r : recs) {
                const std::optional<Stats>* s = nullptr;
                switch (modality) {
                    case 0: s = &r->movement; break;
                    case 1: s = &r->noise; break;
                    default: s = &r->light; break;
                }
                if (*s) parts.push_back(**s);
            }
            std::optional<Stats> got;
            if (!parts.empty()) {
                got = pool_equal(parts);
                observed.push_back({wi, modality, *got});
            } else if (history) {
                got = history->median_stats(wi, modality);
            }
            if (!got) {
                // global constants: still / 30 dB ambient / dark
                Stats fallback{};
                if (modality == 1) fallback = Stats{30.0, 30.0, 30.0, 0.0, 0};
                got = fallback;
            }
            put_stats(w, kModalityBase[modality], *got);
        }

        // screen spells: merge adjacent same-state spells across slot
        // boundaries, then take stats of the merged spell lengths.
        {
            std::vector<ScreenSpell> spells;
            for (const FeatureRecord* r : recs) {
                for (const ScreenSpell& sp : r->screen_spells) spells.push_back(sp);
            }
            std::sort(spells.begin(), spells.end(),
                      [](const ScreenSpell& x, const ScreenSpell& y) { return x.begin < y.begin; });
            std::vector<double> lengths;
            for (std::size_t i = 0; i < spells.size(); ++i) {
                TimePoint b = spells[i].begin, e = spells[i].end;
                while (i + 1 < spells.size() && spells[i + 1].on == spells[i].on &&
                       spells[i + 1].begin == e) {
                    e = spells[i + 1].end;
                    ++i;
                }
                lengths.push_back(static_cast<double>(e - b));
            }
            std::optional<Stats> got;
            if (!lengths.empty()) {
                got = stats_of(lengths);
                observed.push_back({wi, 3, *got});
            } else if (history) {
                got = history->median_stats(wi, 3);
            }
            if (!got) {
                double full = static_cast<double>(window_s);
                got = Stats{full, full, full, 0.0, 0};
            }
            put_stats(w, kScreenSpellMin, *got);
        }

        // location
        for (const FeatureRecord* r : recs) {
            if (r->location) cursor_fix = r->location;
        }
        LatLon loc = cursor_fix.value_or(LatLon{0.0, 0.0});
        w.features[kLatitude] = loc.lat;
        w.features[kLongitude] = loc.lon;

        w.features[kPrevBedMinutes] = prev_times.bed_minutes;
        w.features[kPrevWakeMinutes] = prev_times.wake_minutes;
        out.push_back(std::move(w));
    }

    if (history) {
        for (const Observed& o : observed) history->observe_stats(o.window_idx, o.modality, o.stats);
        if (cursor_fix) history->observe_location(*cursor_fix);
    }
    return out;
}

void label_windows_from_intervals(std::vector<SleepWindow>& windows,
                                  std::span<const std::pair<TimePoint, TimePoint>> intervals) {
    for (SleepWindow& w : windows) {
        std::int64_t covered = 0;
        for (const auto& [b, e] : intervals) {
            TimePoint lo = std::max(w.window_start, b);
            TimePoint hi = std::min(w.window_end(), e);
            if (hi > lo) covered += hi - lo;
        }
        w.label = covered * 2 >= w.window_len_s ? WindowLabel::sleeping : WindowLabel::awake;
    }
}

ml::Row window_to_row(const SleepWindow& w, const std::string& subject) {
    ml::Row r;
    r.features.assign(w.features.begin(), w.features.end());
    r.label = w.label == WindowLabel::sleeping ? 1 : 0;
    r.tag = {subject, format_date(w.day), w.place_id};
    return r;
}

} // namespace nudgekit::sleep
