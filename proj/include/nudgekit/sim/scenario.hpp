#pragma once

#include "nudgekit/correlate.hpp"
#include "nudgekit/ml/metrics.hpp"
#include "nudgekit/sim/subject.hpp"
#include "nudgekit/sleep/detector.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nudgekit::sim {

enum class ArmKind { context_gated, random_timing, control };

const char* to_string(ArmKind k);
ArmKind arm_kind_from_string(const std::string& s);

struct ScenarioConfig {
    GridWorld::Config world;
    int n_subjects = 4;
    int days = 28; // first half learns, second half nudges
    DayId first_day = 19786; // 2024-03-04, a Monday
    NoiseParams noise;
    double disturbance_rate = 0.7;
    double stroll_probability = 0.35; // optional lunch walks (daily-step variance)
    bool quantize_sleep = false;
    bool compliant = false; // deterministic full-acceptance response model
    std::vector<ArmKind> arms = {ArmKind::context_gated, ArmKind::random_timing,
                                 ArmKind::control};
    ml::ClassifierSpec sleep_model = ml::ClassifierSpec::forest_default();
    nudge::EngineConfig engine;
    sleep::MergeConfig merge;
    correlate::CadenceConfig cadence;
    traj::SegmentConfig segment;
    traj::MiningConfig mining;
    bool evaluate_sleep = false; // add CV-per-modality and learning-curve blocks
};

struct Funnel {
    int generated = 0;
    int seen = 0;
    int accepted = 0;
    double acceptance_rate() const { return seen > 0 ? static_cast<double>(accepted) / seen : 0.0; }
};

struct ModalityEval {
    std::string modality; // "all", "movement", ...
    ml::EvalMetrics metrics; // averaged over subjects
};

struct ArmReport {
    ArmKind arm = ArmKind::context_gated;
    std::map<std::string, Funnel> funnel_by_kind; // steps/break/bedtime/sleep_confirm
    Funnel funnel_total;
    // weekday-scoped step metrics (routes exist on weekdays only)
    double mean_daily_steps_before = 0.0;
    double mean_daily_steps_during = 0.0;
    std::vector<double> weekday_steps_during; // per nudging weekday, subject mean
    double app_minutes_before = 0.0; // per-day mean
    double app_minutes_during = 0.0;
    double bed_variance_before = 0.0; // min^2, subject mean
    double bed_variance_after = 0.0;
    double sleep_duration_mean_before = 0.0; // hours
    double sleep_duration_mean_after = 0.0;
    int patterns_total = 0;
    std::map<std::string, std::vector<std::string>> advice_logs; // subject -> JSONL lines
};

struct ScenarioReport {
    ScenarioConfig config;
    std::uint64_t seed = 0;
    std::vector<ArmReport> arms;
    std::vector<ModalityEval> sleep_eval;            // when evaluate_sleep
    std::vector<ml::EvalMetrics> learning_curve;     // subject-mean prequential curve

    const ArmReport* arm(ArmKind k) const;
    std::string to_json() const;
    // figure-analogue tables
    void write_fig13_funnel_csv(std::ostream& out) const;
    void write_fig15_steps_csv(std::ostream& out) const;
    void write_fig16_acceptance_csv(std::ostream& out) const;
    void write_fig18_bedding_csv(std::ostream& out) const;
    void write_fig6_metrics_csv(std::ostream& out) const;
    void write_fig7_curve_csv(std::ostream& out) const;
};

// Synthetic-subject replacement for the study loop: phase 1 collects and
// learns (sleep models, patterns, best profile, interruptibility), phase 2
// runs the nudging services tick by tick with scripted agents responding.
ScenarioReport run_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

struct AgentResponse {
    bool seen = false;
    bool accepted = false;
};

// Response model: advices delivered in active use are always seen and
// accepted with p_in_use decayed by distance from the ideal moment;
// out-of-context deliveries are noticed with p_backlog and accepted with
// p_not_in_use. Expired advices are never seen.
AgentResponse agent_respond(const SubjectProfile& profile, const nudge::Advice& advice,
                            bool delivered_in_use, TimePoint ideal_time, Rng& rng);

// Deterministic per-subject profile family used by scenarios and tests.
SubjectProfile make_profile(const ScenarioConfig& cfg, int index, std::uint64_t seed);

// Labeled window corpus for one subject (ground-truth labels), the input to
// the sleep-detection evaluations.
std::vector<sleep::LabeledDay> build_sleep_corpus(const GridWorld& world,
                                                  const SubjectProfile& profile, DayId first_day,
                                                  int n_days);

} // namespace nudgekit::sim
