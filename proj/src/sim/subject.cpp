#include "nudgekit/sim/subject.hpp"

#include <algorithm>
#include <cmath>

namespace nudgekit::sim {

namespace {

constexpr double kGravity = 9.81;
constexpr TimePoint kLocationPeriod = 60;
constexpr TimePoint kMovementPeriod = 10; // 1 s while walking
constexpr TimePoint kAmbientPeriod = 150;
constexpr TimePoint kWeatherPeriod = 300;

struct AppChoice {
    const char* id;
    AppType type;
    double weight;
};
constexpr AppChoice kApps[] = {
    {"chat.blue", AppType::communication, 0.30},
    {"video.stream", AppType::video, 0.28},
    {"reader.page", AppType::reading, 0.18},
    {"game.blocks", AppType::game, 0.14},
    {"music.wave", AppType::music, 0.10},
};

const AppChoice& pick_app(Rng& rng) {
    double total = 0.0;
    for (const auto& a : kApps) total += a.weight;
    double x = rng.uniform() * total;
    for (const auto& a : kApps) {
        x -= a.weight;
        if (x <= 0.0) return a;
    }
    return kApps[0];
}

} // namespace

std::vector<std::pair<TimePoint, TimePoint>> DayScript::true_sleep_intervals() const {
    std::vector<std::pair<TimePoint, TimePoint>> out;
    TimePoint cursor = bed;
    for (const DisturbanceScript& d : disturbances) {
        if (d.begin > cursor) out.push_back({cursor, d.begin});
        cursor = std::max(cursor, d.end);
    }
    if (cursor < wake) out.push_back({cursor, wake});
    return out;
}

double DayScript::total_app_minutes() const {
    double total = 0.0;
    for (const auto& s : sessions) total += static_cast<double>(s.end - s.begin) / 60.0;
    return total;
}

SubjectSimulator::SubjectSimulator(const GridWorld* world, SubjectProfile profile)
    : world_(world), profile_(std::move(profile)) {
    to_work_ = world_->shortest_path(profile_.commute.home, profile_.commute.work);
    to_home_ = world_->shortest_path(profile_.commute.work, profile_.commute.home);
}

DayScript SubjectSimulator::plan_day(DayId day) const {
    Rng rng = Rng(profile_.seed).substream("plan", static_cast<std::uint64_t>(day));
    const auto& sp = profile_.sleep;
    DayScript s;
    s.day = day;
    s.anchor = anchor_of_day(day);

    auto quantize = [&](double seconds) {
        if (profile_.quantize_sleep_to_window) {
            return static_cast<TimePoint>(std::llround(seconds / kWindowSeconds)) *
                   kWindowSeconds;
        }
        return static_cast<TimePoint>(std::llround(seconds));
    };

    double bed_min = std::clamp(rng.gauss(sp.bed_mean_min, sp.bed_std_min), 240.0, 420.0);
    s.bed = s.anchor + quantize(bed_min * 60.0);
    double len_min = std::clamp(rng.gauss(sp.len_mean_min, sp.len_std_min), 330.0, 585.0);
    s.wake = std::min(s.bed + quantize(len_min * 60.0), s.anchor + 49800); // up by 07:50

    int nd = rng.poisson(sp.disturbance_rate);
    TimePoint guard = 3600; // none in the first/last sleep hour
    for (int i = 0; i < nd; ++i) {
        TimePoint span = s.wake - s.bed - 2 * guard;
        if (span <= 1800) break;
        TimePoint begin = s.bed + guard + rng.uniform_int(0, span - 1);
        TimePoint len = quantize(
            std::clamp(rng.gauss(sp.disturbance_len_min, 3.0), 6.0, 25.0) * 60.0);
        if (profile_.quantize_sleep_to_window) {
            begin = floor_to(begin, kWindowSeconds);
            if (len < kWindowSeconds) len = kWindowSeconds;
        }
        DisturbanceScript d{begin, begin + len, rng.bernoulli(0.5)};
        bool overlaps = false;
        for (const auto& other : s.disturbances) {
            if (d.begin < other.end + 600 && other.begin < d.end + 600) overlaps = true;
        }
        if (!overlaps && d.end < s.wake - guard) s.disturbances.push_back(d);
    }
    std::sort(s.disturbances.begin(), s.disturbances.end(),
              [](const DisturbanceScript& a, const DisturbanceScript& b) {
                  return a.begin < b.begin;
              });

    const TimePoint midnight = static_cast<TimePoint>(day) * kSecondsPerDay;
    TimePoint depart = 0;
    if (!is_weekend(day)) {
        const auto& cp = profile_.commute;
        depart = midnight + static_cast<TimePoint>(std::llround(
                                (cp.depart_clock_min + rng.gauss(0.0, cp.depart_jitter_min)) * 60.0));
        depart = std::max(depart, s.wake + 1800);
        CommuteScript out{depart, to_work_, cp.walk_speed_mps, true, depart + 2700};
        TimePoint ret = midnight + static_cast<TimePoint>(std::llround(
                                       (cp.return_clock_min + rng.gauss(0.0, cp.depart_jitter_min)) *
                                       60.0));
        CommuteScript back{ret, to_home_, cp.walk_speed_mps, false, ret + 2700};
        s.commutes.push_back(out);
        s.commutes.push_back(back);
        if (rng.bernoulli(profile_.stroll_probability)) {
            // lunch walk: a short out-and-back loop from the office
            TimePoint lunch = out.arrival() + 10800 + rng.uniform_int(0, 3600);
            int blocks = 1 + static_cast<int>(rng.uniform_int(0, 1));
            GridNode w = cp.work;
            std::vector<GridNode> loop{w};
            int dir = w.col >= blocks ? -1 : 1;
            for (int b = 1; b <= blocks; ++b) loop.push_back({w.col + dir * b, w.row});
            for (int b = blocks - 1; b >= 0; --b) loop.push_back({w.col + dir * b, w.row});
            GridPath loop_path;
            loop_path.nodes = loop;
            loop_path.length_m = 2.0 * blocks * world_->config().edge_m;
            loop_path.street_string = world_->row_street(w.row);
            if (lunch + static_cast<TimePoint>(loop_path.length_m / cp.walk_speed_mps) <
                back.depart - 3600) {
                s.commutes.push_back({lunch, loop_path, cp.walk_speed_mps, true, lunch + 1800});
            }
        }
    }

    // evening sessions, capped before the in-bed phone window
    const auto& ap = profile_.apps;
    const TimePoint pre_bed_len = static_cast<TimePoint>(ap.pre_bed_phone_min * 60.0);
    TimePoint cursor = s.anchor + 1800;
    int n_evening = 1 + rng.poisson(ap.evening_sessions_mean);
    for (int i = 0; i < n_evening; ++i) {
        TimePoint gap = rng.uniform_int(240, 1500);
        TimePoint len = static_cast<TimePoint>(
            std::clamp(rng.gauss(ap.session_len_mean_min, 0.4 * ap.session_len_mean_min), 4.0,
                       50.0) *
            60.0);
        TimePoint begin = cursor + gap;
        if (begin + len > s.bed - pre_bed_len - 300) break;
        const AppChoice& app = pick_app(rng);
        s.sessions.push_back({begin, begin + len, app.id, app.type});
        cursor = begin + len;
    }
    if (pre_bed_len > 0) {
        bool reading = (day % 2) == 0;
        s.sessions.push_back({s.bed - pre_bed_len, s.bed,
                              reading ? "reader.page" : "video.stream",
                              reading ? AppType::reading : AppType::video});
    }
    if (!is_weekend(day)) {
        // breakfast scroll covering most of the pre-commute advice window
        TimePoint end = depart - 240;
        TimePoint begin =
            std::max(s.wake + 600, end - static_cast<TimePoint>(ap.morning_session_min * 60.0));
        if (end > begin) {
            s.sessions.push_back({begin, end, "chat.blue", AppType::communication});
        }
        // short checks at work
        TimePoint arrival = s.commutes[0].arrival();
        TimePoint ret = s.commutes[1].depart;
        int checks = rng.poisson(ap.work_checks);
        for (int i = 0; i < checks && arrival + 3600 < ret - 3600; ++i) {
            TimePoint begin2 = arrival + 1800 + rng.uniform_int(0, ret - arrival - 5400);
            TimePoint len2 = rng.uniform_int(60, 240);
            s.sessions.push_back({begin2, begin2 + len2, "chat.blue", AppType::communication});
        }
    } else {
        // weekend afternoon use
        int extra = 1 + rng.poisson(2.0);
        for (int i = 0; i < extra; ++i) {
            TimePoint begin2 = s.wake + 3600 + rng.uniform_int(0, 6 * 3600);
            TimePoint len2 = static_cast<TimePoint>(
                std::clamp(rng.gauss(ap.session_len_mean_min, 8.0), 5.0, 45.0) * 60.0);
            const AppChoice& app = pick_app(rng);
            s.sessions.push_back({begin2, begin2 + len2, app.id, app.type});
        }
    }

    std::sort(s.sessions.begin(), s.sessions.end(),
              [](const AppSessionScript& a, const AppSessionScript& b) {
                  return a.begin < b.begin;
              });
    // drop overlaps (one foreground app at a time) and clip to the day
    std::vector<AppSessionScript> kept;
    TimePoint last_end = 0;
    for (AppSessionScript sess : s.sessions) {
        sess.end = std::min(sess.end, s.anchor + kSecondsPerDay - 60);
        if (sess.begin < last_end || sess.end <= sess.begin) continue;
        kept.push_back(sess);
        last_end = sess.end;
    }
    s.sessions = std::move(kept);
    return s;
}

double SubjectSimulator::sample_noise(const char* tag, TimePoint t, double sd) const {
    if (sd == 0.0) return 0.0;
    std::uint64_t s = profile_.seed ^ (Rng::fnv1a(tag) +
                                       0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(t + 1));
    Rng r(s);
    return r.gauss(0.0, sd);
}

SubjectSimulator::Regime SubjectSimulator::regime_at(const DayScript& script, TimePoint t) const {
    Regime r = regime_at_base(script, t);
    if (r.at_home) { // residence ambience, not the office or the street
        r.light_lux = std::max(0.0, r.light_lux + profile_.light_bias_lux);
        r.noise_db += profile_.noise_bias_db;
    }
    return r;
}

SubjectSimulator::Regime SubjectSimulator::regime_at_base(const DayScript& script,
                                                          TimePoint t) const {
    Regime r;
    r.position = world_->poi_position(profile_.commute.home);
    // asleep?
    if (t >= script.bed && t < script.wake) {
        r.light_lux = 0.0;
        r.noise_db = 30.0;
        for (const DisturbanceScript& d : script.disturbances) {
            if (t >= d.begin && t < d.end) {
                r.light_lux = d.lights_on ? 80.0 : 0.0;
                r.noise_db = 33.0;
            }
        }
        return r;
    }
    // walking?
    for (const CommuteScript& c : script.commutes) {
        TimePoint arrive = c.arrival();
        if (t >= c.depart && t < arrive) {
            r.walking = true;
            r.at_home = false;
            r.walk_origin = c.depart;
            r.light_lux = 800.0;
            r.noise_db = 62.0;
            // polyline: home/work POI approach + grid path
            double walked = static_cast<double>(t - c.depart) * c.speed_mps;
            const GridNode from = c.path.nodes.front();
            const GridNode to = c.path.nodes.back();
            LatLon start_pos = world_->poi_position(from);
            LatLon end_pos = world_->poi_position(to);
            std::vector<LatLon> line;
            line.push_back(start_pos);
            for (const GridNode& n : c.path.nodes) line.push_back(world_->node_latlon(n));
            line.push_back(end_pos);
            double remaining = walked;
            for (std::size_t i = 1; i < line.size(); ++i) {
                double seg =
                    haversine_m(line[i - 1], line[i]);
                if (seg <= 0.0) continue;
                if (remaining <= seg) {
                    double f = remaining / seg;
                    r.position = {line[i - 1].lat + (line[i].lat - line[i - 1].lat) * f,
                                  line[i - 1].lon + (line[i].lon - line[i - 1].lon) * f};
                    // nudge off exact corners, along the travel direction
                    if (f > 1e-9 && f < 1.0 - 1e-9) {
                        double to_end = (1.0 - f) * seg;
                        double from_start = f * seg;
                        double eps = 1.2 / seg;
                        if (to_end < 1.2) f = std::max(0.0, f - eps);
                        if (from_start < 1.2) f = std::min(1.0, f + eps);
                        r.position = {line[i - 1].lat + (line[i].lat - line[i - 1].lat) * f,
                                      line[i - 1].lon + (line[i].lon - line[i - 1].lon) * f};
                    }
                    return r;
                }
                remaining -= seg;
            }
            r.position = end_pos;
            return r;
        }
    }
    // at work between the commutes?
    if (script.commutes.size() >= 2) {
        TimePoint arrive = script.commutes[0].arrival();
        TimePoint ret = script.commutes[1].depart;
        if (t >= arrive && t < ret) {
            r.position = world_->poi_position(profile_.commute.work);
            r.at_home = false;
            r.light_lux = 350.0;
            r.noise_db = 55.0;
            return r;
        }
    }
    // home, awake
    const TimePoint pre_bed_len = static_cast<TimePoint>(profile_.apps.pre_bed_phone_min * 60.0);
    if (t < script.bed && t >= script.bed - pre_bed_len) {
        r.light_lux = 2.0; // phone in bed, lamp off
        r.noise_db = 31.0;
    } else if (t < script.bed) {
        r.light_lux = 165.0;
        r.noise_db = 46.0;
    } else {
        r.light_lux = 185.0;
        r.noise_db = 44.0;
    }
    return r;
}

double SubjectSimulator::movement_sample(const DayScript& script, TimePoint t) const {
    const double sd = profile_.noise.movement_sd;
    // asleep
    if (t >= script.bed && t < script.wake) {
        for (const DisturbanceScript& d : script.disturbances) {
            if (t >= d.begin && t < d.end) {
                double burst = (t % 70) == 0 ? 2.4 : 0.0;
                return kGravity + std::abs(sample_noise("mv-dist", t, 0.8)) + burst +
                       sample_noise("mv", t, sd);
            }
        }
        return kGravity + sample_noise("mv", t, 0.3 * sd);
    }
    for (const CommuteScript& c : script.commutes) {
        if (t >= c.depart && t < c.arrival()) {
            double period = 60.0 / profile_.commute.walk_cadence_per_min;
            double phase = std::fmod(static_cast<double>(t - c.depart), period);
            if (phase < 1.0) return kGravity + 3.2 + sample_noise("mv-peak", t, 0.1 * sd + 1e-12);
            return kGravity + sample_noise("mv", t, sd);
        }
    }
    // handling fidgets while an app is in the foreground
    for (const AppSessionScript& sess : script.sessions) {
        if (t >= sess.begin && t < sess.end) {
            double bump = (t % 30) == 0 ? 0.7 : 0.0;
            return kGravity + bump + std::abs(sample_noise("mv-hand", t, 2.5 * sd)) +
                   sample_noise("mv", t, sd);
        }
    }
    return kGravity + sample_noise("mv", t, sd);
}

void SubjectSimulator::emit_events(const DayScript& script, TimePoint t0, TimePoint t1,
                                   std::vector<Event>& out) const {
    t0 = std::max(t0, script.anchor);
    t1 = std::min(t1, script.anchor + kSecondsPerDay);
    if (t1 <= t0) return;
    const std::size_t first = out.size();

    auto grid_begin = [&](TimePoint period) { return ((t0 + period - 1) / period) * period; };

    // location fixes
    for (TimePoint t = grid_begin(kLocationPeriod); t < t1; t += kLocationPeriod) {
        Regime r = regime_at(script, t);
        double sd = profile_.noise.gps_sigma_m;
        LatLon p = r.position;
        if (sd > 0.0) {
            std::uint64_t s = profile_.seed ^ (Rng::fnv1a("gps") +
                                               0x9e3779b97f4a7c15ull *
                                                   static_cast<std::uint64_t>(t + 1));
            Rng jr(s);
            p.lat += jr.gauss(0.0, sd) / world_->m_per_deg_lat();
            p.lon += jr.gauss(0.0, sd) / world_->m_per_deg_lon();
        }
        out.push_back({t, LocationFix{p.lat, p.lon}});
    }

    // movement: 10 s grid outside commutes, 1 s while walking
    auto in_commute = [&](TimePoint t) {
        for (const CommuteScript& c : script.commutes) {
            if (t >= c.depart && t < c.arrival()) return true;
        }
        return false;
    };
    for (TimePoint t = grid_begin(kMovementPeriod); t < t1; t += kMovementPeriod) {
        if (in_commute(t)) continue;
        out.push_back({t, MovementSample{movement_sample(script, t)}});
    }
    for (const CommuteScript& c : script.commutes) {
        TimePoint lo = std::max(t0, c.depart);
        TimePoint hi = std::min(t1, c.arrival());
        for (TimePoint t = lo; t < hi; ++t) {
            out.push_back({t, MovementSample{movement_sample(script, t)}});
        }
    }

    // ambient light and noise
    for (TimePoint t = grid_begin(kAmbientPeriod); t < t1; t += kAmbientPeriod) {
        Regime r = regime_at(script, t);
        double lux = std::max(0.0, r.light_lux + sample_noise("light", t, profile_.noise.light_sd));
        double db = r.noise_db + sample_noise("noise", t, profile_.noise.noise_sd);
        out.push_back({t, LightSample{lux}});
        out.push_back({t, NoiseSample{db}});
    }

    // weather (collected for schema fidelity, unused downstream)
    for (TimePoint t = grid_begin(kWeatherPeriod); t < t1; t += kWeatherPeriod) {
        double clock_h = minutes_of_day(t) / 60.0;
        double temp = 11.0 + 7.0 * std::sin((clock_h - 9.0) / 24.0 * 6.283185307179586) +
                      sample_noise("wtemp", t, 0.4);
        double hum = 62.0 + sample_noise("whum", t, 2.0);
        out.push_back({t, WeatherSample{temp, hum}});
    }

    // screen + app events at session boundaries
    for (const AppSessionScript& sess : script.sessions) {
        if (sess.begin >= t0 && sess.begin < t1) {
            out.push_back({sess.begin, ScreenEvent{true}});
            out.push_back({sess.begin, AppEvent{sess.app_id, sess.type, true}});
        }
        if (sess.end >= t0 && sess.end < t1) {
            out.push_back({sess.end, AppEvent{sess.app_id, sess.type, false}});
            out.push_back({sess.end, ScreenEvent{false}});
        }
    }

    std::stable_sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
}

nudge::ContextSnapshot SubjectSimulator::context_at(const DayScript& script,
                                                    TimePoint now) const {
    nudge::ContextSnapshot ctx;
    ctx.now = now;
    Regime r = regime_at(script, now);
    ctx.ambient_light_lux = r.light_lux;
    for (const AppSessionScript& sess : script.sessions) {
        if (now >= sess.begin && now < sess.end) {
            ctx.screen_on = true;
            ctx.in_use = true;
            ctx.current_app = sess.app_id;
            break;
        }
    }
    // movement stats over +-5 min, sampled on the emission grids
    std::vector<double> samples;
    for (TimePoint t = floor_to(now - 300, kMovementPeriod); t < now + 300;
         t += kMovementPeriod) {
        if (t < script.anchor || t >= script.anchor + kSecondsPerDay) continue;
        samples.push_back(movement_sample(script, t));
    }
    ctx.movement_recent = stats_of(samples);
    return ctx;
}

double SubjectSimulator::steps_until(const DayScript& script, TimePoint now) const {
    double steps = 0.0;
    for (const CommuteScript& c : script.commutes) {
        TimePoint walked_until = std::min(now, c.arrival());
        if (walked_until > c.depart) {
            steps += static_cast<double>(walked_until - c.depart) / 60.0 *
                     profile_.commute.walk_cadence_per_min;
        }
    }
    return steps;
}

void SubjectSimulator::truncate_current_session(DayScript& script, TimePoint now,
                                                double grace_s) {
    for (AppSessionScript& sess : script.sessions) {
        if (now >= sess.begin && now < sess.end) {
            sess.end = std::min(sess.end, now + static_cast<TimePoint>(grace_s));
        }
    }
}

void SubjectSimulator::shift_bed(DayScript& script, TimePoint new_bed) {
    if (new_bed >= script.bed) return; // only earlier bed times
    TimePoint old_bed = script.bed;
    script.bed = new_bed;
    for (AppSessionScript& sess : script.sessions) {
        // the in-bed phone session moves with the bed time; later evening
        // sessions are cut short
        if (sess.end == old_bed) {
            TimePoint len = sess.end - sess.begin;
            sess.end = new_bed;
            sess.begin = new_bed - len;
        } else if (sess.end > new_bed) {
            sess.end = std::max(sess.begin, new_bed - 60);
        }
    }
    std::erase_if(script.sessions,
                  [](const AppSessionScript& s) { return s.end <= s.begin; });
    std::sort(script.sessions.begin(), script.sessions.end(),
              [](const AppSessionScript& a, const AppSessionScript& b) {
                  return a.begin < b.begin;
              });
    // keep sessions non-overlapping after the shift
    TimePoint last_end = 0;
    for (AppSessionScript& sess : script.sessions) {
        if (sess.begin < last_end) sess.begin = last_end;
        last_end = std::max(last_end, sess.end);
    }
    std::erase_if(script.sessions,
                  [](const AppSessionScript& s) { return s.end <= s.begin; });
}

EventLog synth_trace(const GridWorld& world, const SubjectProfile& profile, DayId first_day,
                     int n_days, GroundTruth* truth) {
    SubjectSimulator sim(&world, profile);
    EventLog log;
    log.subject_id = profile.subject_id;
    for (int i = 0; i < n_days; ++i) {
        DayId day = first_day + i;
        DayScript script = sim.plan_day(day);
        sim.emit_events(script, script.anchor, script.anchor + kSecondsPerDay, log.events);
        if (truth) {
            for (const auto& iv : script.true_sleep_intervals()) {
                truth->sleep_intervals.push_back(iv);
            }
            truth->scripts[day] = std::move(script);
        }
    }
    return log;
}

} // namespace nudgekit::sim
