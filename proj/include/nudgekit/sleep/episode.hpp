#pragma once

#include "nudgekit/sleep/window.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nudgekit::sleep {

struct SleepEpisode {
    DayId day_id = 0;
    TimePoint bed_time = 0;  // start of the first merged chunk
    TimePoint wake_time = 0; // end of the last merged chunk
    double duration_min = 0.0;
    int wakeup_count = 0; // merged chunks - 1
    std::vector<std::pair<TimePoint, TimePoint>> chunks;
    std::string place_id; // place of the majority of sleeping windows

    std::string to_json() const;
    static SleepEpisode from_json(const std::string& text);
};

struct MergeConfig {
    double gap_min = 30.0; // gaps below this merge into one chunk
    // When true, absorbed sub-gap awake time is subtracted from duration;
    // the default counts merged chunk spans, absorbed gaps included.
    bool duration_excludes_absorbed_gaps = false;
};

// Maximal runs of sleeping windows become chunks; adjacent chunks closer
// than the merge gap fuse, the gap absorbed into the chunk span. Absent
// when no window is positive.
std::optional<SleepEpisode> merge_episodes(const std::vector<SleepWindow>& windows,
                                           const MergeConfig& cfg = {});

struct Feedback {
    bool confirm = true;
    // corrected single interval, used when confirm == false
    TimePoint bed_time = 0;
    TimePoint wake_time = 0;
};

// Applies a confirmation (labels follow the detected chunks) or a correction
// (labels follow the corrected interval) to the day's windows, producing the
// fully labeled day to append to the place's training set.
// Throws DataError when a correction interval falls outside the analysis day.
std::vector<SleepWindow> incorporate_feedback(std::vector<SleepWindow> windows,
                                              const SleepEpisode& detected, const Feedback& fb);

} // namespace nudgekit::sleep
