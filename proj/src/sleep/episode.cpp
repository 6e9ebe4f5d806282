#include "nudgekit/sleep/episode.hpp"

#include "nudgekit/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>

namespace nudgekit::sleep {

using nlohmann::json;

std::string SleepEpisode::to_json() const {
    json j;
    j["day_id"] = format_date(day_id);
    j["bed_time"] = format_iso8601(bed_time);
    j["wake_time"] = format_iso8601(wake_time);
    j["duration_min"] = duration_min;
    j["wakeup_count"] = wakeup_count;
    json ch = json::array();
    for (const auto& [b, e] : chunks) ch.push_back({format_iso8601(b), format_iso8601(e)});
    j["chunks"] = std::move(ch);
    if (!place_id.empty()) j["place_id"] = place_id;
    return j.dump();
}

SleepEpisode SleepEpisode::from_json(const std::string& text) {
    json j = json::parse(text);
    SleepEpisode e;
    e.day_id = parse_date(j.at("day_id").get<std::string>());
    e.bed_time = parse_iso8601(j.at("bed_time").get<std::string>());
    e.wake_time = parse_iso8601(j.at("wake_time").get<std::string>());
    e.duration_min = j.at("duration_min").get<double>();
    e.wakeup_count = j.at("wakeup_count").get<int>();
    for (const json& c : j.at("chunks")) {
        e.chunks.push_back({parse_iso8601(c.at(0).get<std::string>()),
                            parse_iso8601(c.at(1).get<std::string>())});
    }
    e.place_id = j.value("place_id", "");
    return e;
}

std::optional<SleepEpisode> merge_episodes(const std::vector<SleepWindow>& windows,
                                           const MergeConfig& cfg) {
    // base chunks: maximal runs of positively classified windows
    std::vector<std::pair<TimePoint, TimePoint>> base;
    for (const SleepWindow& w : windows) {
        if (w.label != WindowLabel::sleeping) continue;
        if (!base.empty() && base.back().second == w.window_start) {
            base.back().second = w.window_end();
        } else {
            base.push_back({w.window_start, w.window_end()});
        }
    }
    if (base.empty()) return std::nullopt;

    const std::int64_t gap_s = static_cast<std::int64_t>(cfg.gap_min * 60.0);
    std::vector<std::pair<TimePoint, TimePoint>> merged;
    std::vector<double> absorbed; // awake seconds swallowed per merged chunk
    for (const auto& c : base) {
        if (!merged.empty() && c.first - merged.back().second < gap_s) {
            absorbed.back() += static_cast<double>(c.first - merged.back().second);
            merged.back().second = c.second;
        } else {
            merged.push_back(c);
            absorbed.push_back(0.0);
        }
    }

    SleepEpisode ep;
    ep.day_id = windows.front().day;
    ep.bed_time = merged.front().first;
    ep.wake_time = merged.back().second;
    ep.wakeup_count = static_cast<int>(merged.size()) - 1;
    ep.chunks = merged;
    double total_s = 0.0;
    for (std::size_t i = 0; i < merged.size(); ++i) {
        total_s += static_cast<double>(merged[i].second - merged[i].first);
        if (cfg.duration_excludes_absorbed_gaps) total_s -= absorbed[i];
    }
    ep.duration_min = total_s / 60.0;

    std::map<std::string, int> place_votes;
    for (const SleepWindow& w : windows) {
        if (w.label == WindowLabel::sleeping && !w.place_id.empty()) ++place_votes[w.place_id];
    }
    int best = 0;
    for (const auto& [id, n] : place_votes) {
        if (n > best) {
            best = n;
            ep.place_id = id;
        }
    }
    return ep;
}

std::vector<SleepWindow> incorporate_feedback(std::vector<SleepWindow> windows,
                                              const SleepEpisode& detected, const Feedback& fb) {
    if (fb.confirm) {
        for (SleepWindow& w : windows) {
            TimePoint mid = w.window_start + w.window_len_s / 2;
            bool inside = false;
            for (const auto& [b, e] : detected.chunks) {
                if (mid >= b && mid < e) {
                    inside = true;
                    break;
                }
            }
            w.label = inside ? WindowLabel::sleeping : WindowLabel::awake;
        }
        return windows;
    }
    const TimePoint anchor = anchor_of_day(detected.day_id);
    if (fb.bed_time < anchor || fb.wake_time > anchor + kSecondsPerDay ||
        fb.wake_time <= fb.bed_time) {
        throw DataError("correction interval outside the analysis day");
    }
    for (SleepWindow& w : windows) {
        TimePoint mid = w.window_start + w.window_len_s / 2;
        w.label = (mid >= fb.bed_time && mid < fb.wake_time) ? WindowLabel::sleeping
                                                             : WindowLabel::awake;
    }
    return windows;
}

} // namespace nudgekit::sleep
