#include "nudgekit/aggregate.hpp"

#include "nudgekit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace nudgekit {

Stats stats_of(std::span<const double> samples) {
    Stats s;
    s.n = static_cast<int>(samples.size());
    if (samples.empty()) return s;
    double lo = samples[0], hi = samples[0], sum = 0.0;
    for (double v : samples) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    s.min = lo;
    s.max = hi;
    s.avg = sum / static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : samples) ss += (v - s.avg) * (v - s.avg);
    s.std = std::sqrt(ss / static_cast<double>(s.n)); // population std; 0 for n=1
    return s;
}

Stats pool_stats(const Stats& a, const Stats& b) {
    if (a.n == 0) return b;
    if (b.n == 0) return a;
    Stats s;
    s.n = a.n + b.n;
    s.min = std::min(a.min, b.min);
    s.max = std::max(a.max, b.max);
    double wa = static_cast<double>(a.n), wb = static_cast<double>(b.n);
    s.avg = (a.avg * wa + b.avg * wb) / (wa + wb);
    // pooled second moment about the combined mean
    double m2 = wa * (a.std * a.std + a.avg * a.avg) + wb * (b.std * b.std + b.avg * b.avg);
    double var = m2 / (wa + wb) - s.avg * s.avg;
    s.std = std::sqrt(std::max(0.0, var));
    return s;
}

int derive_steps(std::span<const TimedMagnitude> samples, const StepConfig& cfg) {
    if (samples.size() < 2) return 0;
    double mean = 0.0;
    for (const auto& s : samples) mean += s.magnitude;
    mean /= static_cast<double>(samples.size());
    const double bar = mean + cfg.threshold;

    int steps = 0;
    double last_peak_t = -1e18;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double m = samples[i].magnitude;
        if (m <= bar) continue;
        bool left_ok = i == 0 || samples[i - 1].magnitude <= m;
        bool right_ok = i + 1 == samples.size() || samples[i + 1].magnitude < m;
        if (!left_ok || !right_ok) continue;
        if (samples[i].t - last_peak_t < cfg.refractory_s) continue;
        ++steps;
        last_peak_t = samples[i].t;
    }
    return steps;
}

namespace {

struct Interval {
    TimePoint begin = 0;
    TimePoint end = 0;
};

// Overlap of [b,e) with slot [s, s+300), in seconds.
std::int64_t overlap(TimePoint b, TimePoint e, TimePoint slot) {
    TimePoint lo = std::max(b, slot);
    TimePoint hi = std::min(e, slot + kSlotSeconds);
    return hi > lo ? hi - lo : 0;
}

} // namespace

std::vector<FeatureRecord> aggregate_records(const EventLog& log, const StepConfig& step_cfg) {
    std::vector<FeatureRecord> out;
    if (log.empty()) return out;

    const TimePoint first_slot = floor_to(log.span_begin(), kSlotSeconds);
    const TimePoint last_slot = floor_to(log.span_end(), kSlotSeconds);
    const std::size_t n_slots = static_cast<std::size_t>((last_slot - first_slot) / kSlotSeconds) + 1;
    out.resize(n_slots);
    for (std::size_t i = 0; i < n_slots; ++i) {
        out[i].slot_start = first_slot + static_cast<TimePoint>(i) * kSlotSeconds;
    }
    auto slot_index = [&](TimePoint t) {
        return static_cast<std::size_t>((floor_to(t, kSlotSeconds) - first_slot) / kSlotSeconds);
    };

    // Per-slot scalar samples.
    std::vector<std::vector<TimedMagnitude>> movement(n_slots);
    std::vector<std::vector<double>> light(n_slots), noise(n_slots);

    // Screen state intervals. State before the first screen event is the
    // complement of that event; a dangling final state closes at span end.
    std::vector<Interval> screen_on_intervals;
    std::vector<std::pair<Interval, bool>> screen_state_intervals; // (interval, on)
    {
        TimePoint cursor = log.span_begin();
        int state = -1; // unknown until first screen event
        for (const Event& e : log.events) {
            if (!e.is<ScreenEvent>()) continue;
            bool on = e.as<ScreenEvent>().on;
            if (state == -1) {
                if (e.t > cursor) screen_state_intervals.push_back({{cursor, e.t}, !on});
            } else if (e.t > cursor) {
                screen_state_intervals.push_back({{cursor, e.t}, state == 1});
            }
            cursor = e.t;
            state = on ? 1 : 0;
        }
        TimePoint end = log.span_end();
        if (end > cursor) {
            bool on = state == 1; // no screen events at all -> treat as off
            screen_state_intervals.push_back({{cursor, end}, on});
        }
        for (const auto& [iv, on] : screen_state_intervals) {
            if (on) screen_on_intervals.push_back(iv);
        }
    }

    // App sessions: start/stop pairs per app_id, dangling starts close at span end.
    std::vector<std::pair<Interval, AppType>> app_sessions;
    {
        std::map<std::string, std::vector<std::pair<TimePoint, AppType>>> open;
        for (const Event& e : log.events) {
            if (!e.is<AppEvent>()) continue;
            const auto& a = e.as<AppEvent>();
            if (a.start) {
                open[a.app_id].push_back({e.t, a.type});
            } else {
                auto it = open.find(a.app_id);
                if (it == open.end() || it->second.empty()) continue; // flagged at ingest
                auto [t0, type] = it->second.back();
                it->second.pop_back();
                app_sessions.push_back({{t0, e.t}, type});
            }
        }
        for (auto& [id, starts] : open) {
            for (auto& [t0, type] : starts) {
                app_sessions.push_back({{t0, log.span_end()}, type});
            }
        }
    }

    for (const Event& e : log.events) {
        std::size_t i = slot_index(e.t);
        if (e.is<MovementSample>()) {
            movement[i].push_back({static_cast<double>(e.t), e.as<MovementSample>().magnitude});
        } else if (e.is<LightSample>()) {
            light[i].push_back(e.as<LightSample>().lux);
        } else if (e.is<NoiseSample>()) {
            noise[i].push_back(e.as<NoiseSample>().level_db);
        } else if (e.is<LocationFix>()) {
            const auto& f = e.as<LocationFix>();
            out[i].location = LatLon{f.lat, f.lon};
        }
    }

    for (std::size_t i = 0; i < n_slots; ++i) {
        FeatureRecord& r = out[i];
        if (!movement[i].empty()) {
            std::vector<double> mags;
            mags.reserve(movement[i].size());
            for (const auto& m : movement[i]) mags.push_back(m.magnitude);
            r.movement = stats_of(mags);
            r.steps = derive_steps(movement[i], step_cfg);
        }
        if (!light[i].empty()) r.light = stats_of(light[i]);
        if (!noise[i].empty()) r.noise = stats_of(noise[i]);
    }

    for (const auto& iv : screen_on_intervals) {
        std::size_t lo = slot_index(std::max(iv.begin, first_slot));
        std::size_t hi = slot_index(std::min(iv.end, log.span_end()));
        for (std::size_t i = lo; i <= hi && i < n_slots; ++i) {
            out[i].screen_on_seconds +=
                static_cast<double>(overlap(iv.begin, iv.end, out[i].slot_start));
        }
    }
    for (const auto& [iv, on] : screen_state_intervals) {
        std::size_t lo = slot_index(std::max(iv.begin, first_slot));
        std::size_t hi = slot_index(std::min(iv.end, log.span_end()));
        for (std::size_t i = lo; i <= hi && i < n_slots; ++i) {
            TimePoint b = std::max(iv.begin, out[i].slot_start);
            TimePoint e = std::min(iv.end, out[i].slot_start + kSlotSeconds);
            if (e > b) out[i].screen_spells.push_back({b, e, on});
        }
    }
    for (auto& r : out) {
        std::sort(r.screen_spells.begin(), r.screen_spells.end(),
                  [](const ScreenSpell& a, const ScreenSpell& b) { return a.begin < b.begin; });
    }

    for (const auto& [iv, type] : app_sessions) {
        if (iv.end <= iv.begin) continue;
        std::size_t lo = slot_index(std::max(iv.begin, first_slot));
        std::size_t hi = slot_index(std::min(iv.end, log.span_end()));
        for (std::size_t i = lo; i <= hi && i < n_slots; ++i) {
            out[i].app_seconds[static_cast<std::size_t>(type)] +=
                static_cast<double>(overlap(iv.begin, iv.end, out[i].slot_start));
        }
    }

    return out;
}

namespace {

void put_optional_stats(std::ostream& out, const std::optional<Stats>& s) {
    if (s) {
        out << s->min << ',' << s->avg << ',' << s->max << ',' << s->std << ',' << s->n;
    } else {
        out << ",,,,";
    }
}

} // namespace

void write_records_csv(std::ostream& out, std::span<const FeatureRecord> records) {
    out << "slot_start,"
           "movement_min,movement_avg,movement_max,movement_std,movement_n,"
           "light_min,light_avg,light_max,light_std,light_n,"
           "noise_min,noise_avg,noise_max,noise_std,noise_n,"
           "screen_on_s,steps,lat,lon,"
           "app_communication_s,app_video_s,app_music_s,app_reading_s,app_game_s,app_other_s,"
           "screen_spells\n";
    out.precision(12);
    for (const FeatureRecord& r : records) {
        out << format_iso8601(r.slot_start) << ',';
        put_optional_stats(out, r.movement);
        out << ',';
        put_optional_stats(out, r.light);
        out << ',';
        put_optional_stats(out, r.noise);
        out << ',' << r.screen_on_seconds << ',' << r.steps << ',';
        if (r.location) out << r.location->lat;
        out << ',';
        if (r.location) out << r.location->lon;
        for (double s : r.app_seconds) out << ',' << s;
        out << ',';
        for (std::size_t i = 0; i < r.screen_spells.size(); ++i) {
            const ScreenSpell& sp = r.screen_spells[i];
            if (i) out << ';';
            out << (sp.begin - r.slot_start) << '-' << (sp.end - r.slot_start) << '-'
                << (sp.on ? "on" : "off");
        }
        out << '\n';
    }
}

std::vector<FeatureRecord> read_records_csv(std::istream& in) {
    std::vector<FeatureRecord> out;
    std::string line;
    if (!std::getline(in, line)) throw DataError("records csv: missing header");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cur;
        for (char c : line) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur.push_back(c);
            }
        }
        cells.push_back(cur);
        if (cells.size() != 27) {
            throw DataError("records csv: wrong cell count at line " + std::to_string(line_no));
        }
        FeatureRecord r;
        r.slot_start = parse_iso8601(cells[0]);
        auto stats_at = [&](std::size_t base) -> std::optional<Stats> {
            if (cells[base].empty()) return std::nullopt;
            Stats s;
            s.min = std::stod(cells[base]);
            s.avg = std::stod(cells[base + 1]);
            s.max = std::stod(cells[base + 2]);
            s.std = std::stod(cells[base + 3]);
            s.n = std::stoi(cells[base + 4]);
            return s;
        };
        r.movement = stats_at(1);
        r.light = stats_at(6);
        r.noise = stats_at(11);
        r.screen_on_seconds = std::stod(cells[16]);
        r.steps = std::stoi(cells[17]);
        if (!cells[18].empty() && !cells[19].empty()) {
            r.location = LatLon{std::stod(cells[18]), std::stod(cells[19])};
        }
        for (int i = 0; i < kAppTypeCount; ++i) {
            r.app_seconds[static_cast<std::size_t>(i)] =
                std::stod(cells[20 + static_cast<std::size_t>(i)]);
        }
        if (!cells[26].empty()) {
            std::istringstream spells(cells[26]);
            std::string tok;
            while (std::getline(spells, tok, ';')) {
                std::size_t d1 = tok.find('-');
                std::size_t d2 = tok.find('-', d1 + 1);
                if (d1 == std::string::npos || d2 == std::string::npos) {
                    throw DataError("records csv: bad spell token at line " +
                                    std::to_string(line_no));
                }
                ScreenSpell sp;
                sp.begin = r.slot_start + std::stoll(tok.substr(0, d1));
                sp.end = r.slot_start + std::stoll(tok.substr(d1 + 1, d2 - d1 - 1));
                sp.on = tok.substr(d2 + 1) == "on";
                r.screen_spells.push_back(sp);
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace nudgekit
