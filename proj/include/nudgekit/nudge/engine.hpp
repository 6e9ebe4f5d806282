#pragma once

#include "nudgekit/aggregate.hpp"
#include "nudgekit/ml/classifier.hpp"
#include "nudgekit/sleep/episode.hpp"
#include "nudgekit/traj/pattern.hpp"

#include <array>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nudgekit::nudge {

enum class AdviceKind { steps, take_break, bedtime, sleep_confirm };
enum class AdviceResponse { none, accepted, rejected };

const char* to_string(AdviceKind k);

struct Advice {
    std::string advice_id;
    AdviceKind kind = AdviceKind::steps;
    TimePoint created_at = 0;
    std::optional<TimePoint> delivered_at;
    AdviceResponse response = AdviceResponse::none;
    std::optional<TimePoint> responded_at;
    TimePoint expiry = 0;
    DayId target_day = 0; // analysis day, part of the idempotency key

    // kind-specific payloads
    std::string pattern_id;                 // steps
    std::optional<traj::RouteAdvice> route; // steps
    std::string episode_json;               // sleep_confirm: the detected episode
    std::string note;                       // break contents etc. (reserved data)

    bool delivered() const { return delivered_at.has_value(); }
    bool expired_undelivered(TimePoint now) const { return !delivered() && now >= expiry; }
    std::string to_jsonl() const;
};

struct ContextSnapshot {
    TimePoint now = 0;
    bool screen_on = false;
    Stats movement_recent;      // +-5 min around now
    double ambient_light_lux = 0.0;
    std::optional<std::string> current_app;
    bool in_use = false; // screen_on && interaction within the trailing 5 min
};

// Feature bundle for the interruptibility model: 15 numeric slots (weekday,
// app index, 4 continuous-use stats, start clock hour, 4 same-app-count
// stats, 4 movement stats).
struct InterruptFeatures {
    int weekday = 0;
    double app_index = 0.0; // stable first-seen encoding of app_id
    std::string app_id;
    Stats continuous_use_stats;
    int start_clock_hour = 0;
    Stats same_app_count_stats;
    Stats movement_stats;

    std::vector<double> to_features() const;
    static const std::vector<std::string>& feature_names();
};

struct BedtimeSession {
    std::string session_id;
    TimePoint trigger_at = 0;
    TimePoint started_at = 0;
    double volume = 1.0;
    std::vector<std::string> effects;
    std::optional<TimePoint> ended_at;
    enum class Termination { none, user, service } termination = Termination::none;
    bool active() const { return !ended_at.has_value(); }
};

// Overrides the context gate: the random-timing study arm delivers on its
// own schedule instead of waiting for the user to be on the phone.
class TimingPolicy {
public:
    virtual ~TimingPolicy() = default;
    // nullopt -> context gate applies (default arm behaviour)
    virtual std::optional<TimePoint> delivery_time(AdviceKind kind, TimePoint created_at,
                                                   TimePoint window_begin,
                                                   TimePoint window_end) = 0;
    // nullopt -> engine eligibility + interruptibility model decide
    virtual std::optional<bool> break_due(TimePoint now) = 0;
};

struct EngineConfig {
    double scan_period_min = 15.0;        // pattern scan cadence
    double advice_lead_min = 30.0;        // steps delivery window before a pattern
    double sleep_check_period_min = 30.0; // detection + confirmation cadence
    double break_min_gap_min = 30.0;      // at most one break advice per window
    double break_movement_std_min = 0.02; // handling threshold for eligibility
    double bedtime_lead_min = 60.0;
    double bedtime_volume_factor = 0.9;
    double bedtime_movement_std_max = 0.05; // theta_m
    double bedtime_light_max = 5.0;         // theta_l (lux)
    int max_consecutive_rejections = 3;
    traj::AlternativeStrategy strategy = traj::AlternativeStrategy::smallest_increase;

    double best_daily_steps = 8000.0;
    double best_bed_time_min = 330.0; // minutes since the 18:00 anchor (23:30)
};

struct TickInputs {
    double steps_so_far_today = 0.0;
    // latest classified window label, when sleep detection ran recently
    std::optional<bool> sleep_signal_positive;
};

struct TickResult {
    std::vector<std::string> delivered;  // advice ids delivered this tick
    std::vector<std::string> generated;  // advice ids created this tick
};

// Detection hook run on the half-hour cycle; returns freshly detected,
// not-yet-confirmed episodes (usually sleep::classify_day + merge_episodes
// over new records).
using SleepCheckHook = std::function<std::vector<sleep::SleepEpisode>(TimePoint now)>;

// Pure state machine over an injected clock: ticks arrive in non-decreasing
// order at 5-minute granularity, all randomness lives outside (the timing
// policy), and a replayed stream reproduces the advice log exactly.
class Engine {
public:
    Engine(EngineConfig cfg, std::vector<traj::TrajectoryPattern> patterns,
           const traj::AlternativesProvider* alternatives, const ml::Model* interrupt_model,
           SleepCheckHook sleep_check = nullptr, TimingPolicy* policy = nullptr);

    TickResult tick(const ContextSnapshot& context, const TickInputs& inputs = {});

    void record_response(const std::string& advice_id, AdviceResponse response, TimePoint clock,
                         const std::string& note = "");

    // Service-three session controls.
    const std::optional<BedtimeSession>& bedtime_session() const { return session_; }
    void stop_bedtime_session(TimePoint clock); // user stop

    const std::vector<Advice>& advice_log() const { return advices_; }
    const Advice* find_advice(const std::string& advice_id) const;
    const std::vector<traj::TrajectoryPattern>& patterns() const { return patterns_; }
    const std::vector<BedtimeSession>& finished_sessions() const { return finished_sessions_; }
    bool interrupt_fallback_mode() const { return interrupt_model_ == nullptr; }

    // Crash-consistent resume: serialized counters, markers and advice log.
    std::string state_to_json() const;
    void state_from_json(const std::string& text);

private:
    void scan_patterns(const ContextSnapshot& ctx, const TickInputs& inputs,
                       TickResult& result);
    void deliver_pending(const ContextSnapshot& ctx, TickResult& result);
    void break_step(const ContextSnapshot& ctx, TickResult& result);
    void bedtime_trigger(const ContextSnapshot& ctx, TickResult& result);
    void bedtime_step(const ContextSnapshot& ctx, const TickInputs& inputs);
    void sleep_check(const ContextSnapshot& ctx, TickResult& result);
    void track_app_session(const ContextSnapshot& ctx);
    void roll_day(DayId day);
    InterruptFeatures interrupt_features(const ContextSnapshot& ctx) const;
    Advice& new_advice(AdviceKind kind, TimePoint created_at, TimePoint expiry, DayId day);
    traj::TrajectoryPattern* find_pattern(const std::string& id);

    EngineConfig cfg_;
    std::vector<traj::TrajectoryPattern> patterns_;
    const traj::AlternativesProvider* alternatives_ = nullptr;
    const ml::Model* interrupt_model_ = nullptr;
    SleepCheckHook sleep_check_;
    TimingPolicy* policy_ = nullptr;

    std::vector<Advice> advices_;
    std::map<std::string, std::optional<TimePoint>> scheduled_; // policy-driven deliveries

    TimePoint clock_ = 0;
    bool started_ = false;
    DayId current_day_ = 0;
    std::optional<TimePoint> last_scan_;
    std::optional<TimePoint> last_sleep_check_;
    std::optional<TimePoint> last_break_advice_;

    std::set<std::pair<std::string, DayId>> steps_emitted_; // (pattern, day)
    std::set<DayId> bedtime_emitted_;
    std::set<DayId> confirmed_days_;

    // app usage bookkeeping for interrupt features (analysis-day scoped)
    std::map<std::string, double> app_index_;
    std::map<std::string, std::vector<double>> app_session_lengths_; // today
    std::map<std::string, int> app_session_counts_;                 // today
    std::optional<std::string> current_app_;
    TimePoint current_app_since_ = 0;

    std::optional<BedtimeSession> session_;
    std::vector<BedtimeSession> finished_sessions_;
    std::uint64_t next_advice_seq_ = 0;
    std::uint64_t next_session_seq_ = 0;
};

// Fits the interruptibility forest; nullopt (always-eligible fallback mode)
// below `min_rows` usable rows.
std::optional<ml::Model> train_interruptibility(
    const std::vector<std::pair<InterruptFeatures, bool>>& history, const ml::ClassifierSpec& spec,
    std::uint64_t seed, std::size_t min_rows = 50);

} // namespace nudgekit::nudge
