#pragma once

#include <cstdint>
#include <string>

namespace nudgekit {

// Timestamps are UTC epoch seconds. Days are counted as civil days since
// 1970-01-01. The "analysis day" D spans [D-1 18:00, D 18:00) UTC; sleep
// windows and daily parameters are anchored to that span.
using TimePoint = std::int64_t;
using DayId = std::int32_t;

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kSlotSeconds = 300;       // 5-minute aggregation grid
inline constexpr std::int64_t kWindowSeconds = 600;     // 10-minute sleep windows
inline constexpr std::int64_t kAnchorOffsetSeconds = 6 * 3600; // 18:00 = midnight - 6h

struct CivilDate {
    int year = 1970;
    int month = 1;
    int day = 1;
};

// Civil calendar <-> days-since-epoch (proleptic Gregorian).
DayId days_from_civil(const CivilDate& d);
CivilDate civil_from_days(DayId z);

// "2024-03-01T22:05:00Z". Throws DataError on malformed input.
TimePoint parse_iso8601(const std::string& s);
std::string format_iso8601(TimePoint t);

// "2024-03-01"
DayId parse_date(const std::string& s);
std::string format_date(DayId day);

// Analysis-day bookkeeping. A timestamp at 17:55 belongs to the analysis day
// of its own calendar date; 18:05 already belongs to the next one.
inline DayId analysis_day_of(TimePoint t) {
    std::int64_t shifted = t + kAnchorOffsetSeconds;
    // floor division for pre-epoch times
    std::int64_t d = shifted >= 0 ? shifted / kSecondsPerDay
                                  : (shifted - (kSecondsPerDay - 1)) / kSecondsPerDay;
    return static_cast<DayId>(d);
}

// Start of analysis day D, i.e. 18:00 on calendar day D-1.
inline TimePoint anchor_of_day(DayId day) {
    return static_cast<std::int64_t>(day) * kSecondsPerDay - kAnchorOffsetSeconds;
}

// Minutes since the 18:00 anchor, in [0, 1440).
inline double minutes_since_anchor(TimePoint t) {
    return static_cast<double>(t - anchor_of_day(analysis_day_of(t))) / 60.0;
}

// Minutes since midnight of the calendar day, in [0, 1440).
inline double minutes_of_day(TimePoint t) {
    std::int64_t s = ((t % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
    return static_cast<double>(s) / 60.0;
}

// 0 = Monday ... 6 = Sunday (1970-01-01 was a Thursday).
inline int weekday_of(DayId day) {
    return static_cast<int>(((day % 7) + 7 + 3) % 7);
}

inline bool is_weekend(DayId day) {
    int w = weekday_of(day);
    return w == 5 || w == 6;
}

inline TimePoint floor_to(TimePoint t, std::int64_t grid) {
    std::int64_t r = ((t % grid) + grid) % grid;
    return t - r;
}

} // namespace nudgekit
