#pragma once

#include "nudgekit/events.hpp"
#include "nudgekit/nudge/engine.hpp"
#include "nudgekit/rng.hpp"
#include "nudgekit/sim/world.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nudgekit::sim {

struct SleepParams {
    double bed_mean_min = 330.0; // minutes since the 18:00 anchor (23:30)
    double bed_std_min = 25.0;
    double len_mean_min = 450.0; // 7.5 h
    double len_std_min = 20.0;
    double disturbance_rate = 0.7;     // expected awakenings per night
    double disturbance_len_min = 14.0; // each
};

struct CommuteParams {
    GridNode home{2, 2};
    GridNode work{11, 8};
    double depart_clock_min = 495.0; // 08:15
    double depart_jitter_min = 5.0;
    double return_clock_min = 1020.0; // 17:00
    double walk_speed_mps = 1.31;
    double walk_cadence_per_min = 18.0; // ~90 derived steps per 5-min slot
};

struct AppParams {
    double evening_sessions_mean = 3.0;
    double session_len_mean_min = 22.0;
    double pre_bed_phone_min = 20.0;   // in-bed screen use right before sleep
    double morning_session_min = 16.0; // breakfast scroll before leaving
    double work_checks = 3.0;          // short communication sessions at work
};

struct NoiseParams {
    double gps_sigma_m = 4.0;
    double light_sd = 12.0;
    double noise_sd = 2.5;
    double movement_sd = 0.04;

    static NoiseParams zero() { return {0.0, 0.0, 0.0, 0.0}; }
    bool is_zero() const {
        return gps_sigma_m == 0 && light_sd == 0 && noise_sd == 0 && movement_sd == 0;
    }
};

struct ResponseParams {
    double p_in_use = 0.75;      // acceptance when seen in active use
    double p_not_in_use = 0.12;  // acceptance when noticed out of context
    double timing_decay_min = 60.0;
    double p_backlog_seen = 0.45; // chance an out-of-use delivery gets noticed
    double bedtime_compliance = 0.3;
};

struct SubjectProfile {
    std::string subject_id = "s0";
    std::uint64_t seed = 1;
    SleepParams sleep;
    CommuteParams commute;
    AppParams apps;
    NoiseParams noise;
    ResponseParams response;
    double stroll_probability = 0.35;      // chance of a lunch walk per weekday
    bool quantize_sleep_to_window = false; // align sleep bounds to the 10-min grid
    // ambient offsets of the current residence (a brighter or louder home)
    double light_bias_lux = 0.0;
    double noise_bias_db = 0.0;
};

struct AppSessionScript {
    TimePoint begin = 0;
    TimePoint end = 0;
    std::string app_id;
    AppType type = AppType::other;
};

struct CommuteScript {
    TimePoint depart = 0;
    GridPath path;
    double speed_mps = 1.31;
    bool to_work = true;
    TimePoint window_end = 0; // commute slot reserved until here

    TimePoint arrival() const {
        return depart + static_cast<TimePoint>(path.length_m / speed_mps);
    }
};

struct DisturbanceScript {
    TimePoint begin = 0;
    TimePoint end = 0;
    bool lights_on = false;
};

// Everything one analysis day will do, mutable until its events are emitted
// (accepted advices rewrite routes, session ends and bed times in place).
struct DayScript {
    DayId day = 0;
    TimePoint anchor = 0;
    TimePoint bed = 0;
    TimePoint wake = 0;
    std::vector<DisturbanceScript> disturbances;
    std::vector<AppSessionScript> sessions;
    std::vector<CommuteScript> commutes;

    std::vector<std::pair<TimePoint, TimePoint>> true_sleep_intervals() const;
    double total_app_minutes() const;
};

struct GroundTruth {
    std::map<DayId, DayScript> scripts;
    std::vector<std::pair<TimePoint, TimePoint>> sleep_intervals;
};

// Deterministic per (profile.seed, day): planning draws come from named
// substreams, so planning day D never perturbs day D+1.
class SubjectSimulator {
public:
    SubjectSimulator(const GridWorld* world, SubjectProfile profile);

    const SubjectProfile& profile() const { return profile_; }

    DayScript plan_day(DayId day) const;

    // Current route choices; accepted steps advices swap these.
    GridPath& route_to_work() { return to_work_; }
    GridPath& route_to_home() { return to_home_; }

    // Events with t in [t0, t1). Sensor noise is keyed by absolute sample
    // time, so any chunking of the same day emits identical events.
    void emit_events(const DayScript& script, TimePoint t0, TimePoint t1,
                     std::vector<Event>& out) const;

    nudge::ContextSnapshot context_at(const DayScript& script, TimePoint now) const;
    double steps_until(const DayScript& script, TimePoint now) const; // scripted steps today

    // Script rewrites driven by accepted advices.
    static void truncate_current_session(DayScript& script, TimePoint now, double grace_s = 60.0);
    static void shift_bed(DayScript& script, TimePoint new_bed);

private:
    struct Regime {
        LatLon position;
        double light_lux = 0.0;
        double noise_db = 30.0;
        bool walking = false;
        bool at_home = true;
        TimePoint walk_origin = 0; // cadence phase reference while walking
    };
    Regime regime_at(const DayScript& script, TimePoint t) const;
    Regime regime_at_base(const DayScript& script, TimePoint t) const;
    double movement_sample(const DayScript& script, TimePoint t) const;
    double sample_noise(const char* tag, TimePoint t, double sd) const;

    const GridWorld* world_;
    SubjectProfile profile_;
    GridPath to_work_, to_home_;
};

// Full-trace synthesis over consecutive analysis days starting at
// `first_day`; the stand-in for a subject's uploaded phone data.
EventLog synth_trace(const GridWorld& world, const SubjectProfile& profile, DayId first_day,
                     int n_days, GroundTruth* truth = nullptr);

} // namespace nudgekit::sim
