#include "nudgekit/sim/scenario.hpp"

#include "nudgekit/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

namespace nudgekit::sim {

using nlohmann::json;

const char* to_string(ArmKind k) {
    switch (k) {
        case ArmKind::context_gated: return "context_gated";
        case ArmKind::random_timing: return "random_timing";
        case ArmKind::control: return "control";
    }
    return "control";
}

ArmKind arm_kind_from_string(const std::string& s) {
    if (s == "context_gated") return ArmKind::context_gated;
    if (s == "random_timing") return ArmKind::random_timing;
    if (s == "control") return ArmKind::control;
    throw ConfigError("unknown arm: '" + s + "'");
}

AgentResponse agent_respond(const SubjectProfile& profile, const nudge::Advice& advice,
                            bool delivered_in_use, TimePoint ideal_time, Rng& rng) {
    AgentResponse r;
    if (!advice.delivered()) return r; // expired advices are never seen
    const ResponseParams& rp = profile.response;
    if (delivered_in_use) {
        r.seen = true;
        double decay = 1.0;
        if (rp.timing_decay_min > 0.0 && rp.timing_decay_min < 1e17) {
            double dt_min =
                std::abs(static_cast<double>(*advice.delivered_at - ideal_time)) / 60.0;
            decay = std::exp(-dt_min / rp.timing_decay_min);
        }
        r.accepted = rng.bernoulli(std::min(1.0, rp.p_in_use * decay));
        return r;
    }
    r.seen = rng.bernoulli(rp.p_backlog_seen);
    if (r.seen) r.accepted = rng.bernoulli(rp.p_not_in_use);
    return r;
}

SubjectProfile make_profile(const ScenarioConfig& cfg, int index, std::uint64_t seed) {
    SubjectProfile p;
    p.subject_id = "s" + std::to_string(index);
    p.seed = Rng(seed).substream("subject", static_cast<std::uint64_t>(index)).u64();
    Rng r = Rng(p.seed).substream("profile");
    bool irregular = index % 3 == 2; // a third of subjects sleep erratically
    p.sleep.bed_mean_min = 320.0 + static_cast<double>(r.uniform_int(0, 40));
    p.sleep.bed_std_min = irregular ? 55.0 : 16.0;
    p.sleep.len_mean_min = 430.0 + static_cast<double>(r.uniform_int(0, 40));
    p.sleep.len_std_min = irregular ? 35.0 : 15.0;
    p.sleep.disturbance_rate = cfg.disturbance_rate * (irregular ? 1.6 : 0.8);
    int w = cfg.world.width, h = cfg.world.height;
    p.commute.home = {std::min(2 + (index * 3) % 6, w - 1), std::min(2 + (index * 2) % 5, h - 1)};
    p.commute.work = {std::min(w - 9 + index % 5, w - 1), std::min(h - 12 + (index * 2) % 6, h - 1)};
    if (p.commute.work == p.commute.home) p.commute.work.col = std::max(0, p.commute.work.col - 1);
    p.commute.depart_clock_min = 480.0 + (index % 4) * 15.0;
    p.noise = cfg.noise;
    p.quantize_sleep_to_window = cfg.quantize_sleep;
    p.stroll_probability = cfg.compliant ? 0.0 : cfg.stroll_probability;
    if (cfg.compliant) {
        p.sleep.disturbance_rate = 0.0;
        p.response.p_in_use = 1.0;
        p.response.p_not_in_use = 0.0;
        p.response.timing_decay_min = 1e18; // no decay
        p.response.p_backlog_seen = 0.0;
    }
    return p;
}

std::vector<sleep::LabeledDay> build_sleep_corpus(const GridWorld& world,
                                                  const SubjectProfile& profile, DayId first_day,
                                                  int n_days) {
    SubjectSimulator sim(&world, profile);
    sleep::SubjectHistory history;
    std::optional<sleep::PrevSleepTimes> prev;
    std::vector<sleep::LabeledDay> out;
    std::vector<Event> events;
    for (int i = 0; i < n_days; ++i) {
        DayId day = first_day + i;
        DayScript script = sim.plan_day(day);
        events.clear();
        sim.emit_events(script, script.anchor, script.anchor + kSecondsPerDay, events);
        EventLog log;
        log.subject_id = profile.subject_id;
        log.events = std::move(events);
        auto records = aggregate_records(log);
        events = std::move(log.events);

        auto windows = sleep::build_windows(day, records, prev, &history);
        auto truth = script.true_sleep_intervals();
        sleep::label_windows_from_intervals(windows, truth);
        out.push_back({day, std::move(windows)});

        prev = sleep::PrevSleepTimes{minutes_since_anchor(script.bed),
                                     minutes_since_anchor(script.wake)};
        history.observe_episode(prev->bed_minutes, prev->wake_minutes);
    }
    return out;
}

namespace {

// Break advices are welcome in the evening and disruptive at work; the
// interruptibility model has to discover this boundary from the probes.
bool agent_break_accept(const SubjectProfile& profile, TimePoint when, bool in_use, Rng& rng) {
    if (!in_use) return rng.bernoulli(profile.response.p_not_in_use);
    int hour = static_cast<int>(minutes_of_day(when)) / 60;
    bool relaxed = hour >= 19 || hour < 2;
    return rng.bernoulli(relaxed ? 0.80 : 0.15);
}

class RandomTimingPolicy : public nudge::TimingPolicy {
public:
    explicit RandomTimingPolicy(Rng rng) : rng_(rng) {}

    std::optional<TimePoint> delivery_time(nudge::AdviceKind kind, TimePoint created_at,
                                           TimePoint /*window_begin*/,
                                           TimePoint window_end) override {
        if (kind != nudge::AdviceKind::steps) return std::nullopt; // others stay gated
        if (window_end <= created_at) return created_at;
        return created_at + rng_.uniform_int(0, window_end - created_at - 1);
    }

    std::optional<bool> break_due(TimePoint now) override {
        if (next_ == 0) next_ = now + draw();
        if (now >= next_) {
            next_ = now + draw();
            return true;
        }
        return false;
    }

private:
    TimePoint draw() { return rng_.uniform_int(6, 12) * 300; } // 30..60 min, 5-min grid
    Rng rng_;
    TimePoint next_ = 0;
};

struct InterruptProbe {
    std::vector<double> features;
    bool accepted = false;
};

struct Learned {
    sleep::PlaceRegistry registry{100.0};
    std::vector<traj::TrajectoryPattern> patterns;
    correlate::BestProfile best;
    std::optional<ml::Model> interrupt;
    sleep::SubjectHistory history;
    std::optional<sleep::PrevSleepTimes> prev_times;
    std::vector<double> weekday_steps; // phase 1, per weekday
    std::vector<double> app_minutes;   // phase 1, per day
    std::vector<double> bed_minutes, duration_h;
};

// Script-exact interruptibility features (the engine rebuilds the same
// bundle from its own bookkeeping at phase-2 time).
std::vector<double> probe_features(const SubjectSimulator& sim, const DayScript& script,
                                   TimePoint now, const std::map<std::string, double>& app_index) {
    nudge::InterruptFeatures f;
    f.weekday = weekday_of(static_cast<DayId>(now / kSecondsPerDay));
    const AppSessionScript* current = nullptr;
    std::vector<double> lengths;
    std::map<std::string, int> counts;
    for (const AppSessionScript& s : script.sessions) {
        if (s.begin > now) break;
        ++counts[s.app_id];
        if (now >= s.begin && now < s.end) current = &s;
    }
    if (current) {
        f.app_id = current->app_id;
        auto it = app_index.find(current->app_id);
        f.app_index = it != app_index.end() ? it->second : -1.0;
        for (const AppSessionScript& s : script.sessions) {
            if (s.app_id != current->app_id || s.begin > now) continue;
            lengths.push_back(static_cast<double>(std::min(s.end, now) - s.begin));
        }
        f.continuous_use_stats = stats_of(lengths);
        f.start_clock_hour = static_cast<int>(minutes_of_day(current->begin)) / 60;
    } else {
        f.app_index = -1.0;
    }
    std::vector<double> cvals;
    for (const auto& [id, n] : counts) cvals.push_back(n);
    if (!cvals.empty()) f.same_app_count_stats = stats_of(cvals);
    f.movement_stats = sim.context_at(script, now).movement_recent;
    return f.to_features();
}

sleep::SleepEpisode truth_episode(const DayScript& script, const sleep::MergeConfig& merge) {
    // the confirmed ground truth, merged exactly like detections are
    std::vector<sleep::SleepWindow> windows;
    const TimePoint anchor = script.anchor;
    for (int wi = 0; wi < static_cast<int>(kSecondsPerDay / kWindowSeconds); ++wi) {
        sleep::SleepWindow w;
        w.window_start = anchor + static_cast<TimePoint>(wi) * kWindowSeconds;
        w.day = script.day;
        w.index_of_day = wi;
        windows.push_back(std::move(w));
    }
    auto truth = script.true_sleep_intervals();
    sleep::label_windows_from_intervals(windows, truth);
    auto ep = sleep::merge_episodes(windows, merge);
    if (!ep) {
        sleep::SleepEpisode fallback;
        fallback.day_id = script.day;
        fallback.bed_time = script.bed;
        fallback.wake_time = script.wake;
        fallback.duration_min = static_cast<double>(script.wake - script.bed) / 60.0;
        fallback.chunks = {{script.bed, script.wake}};
        return fallback;
    }
    return *ep;
}

struct SubjectPhase1 {
    Learned learned;
    std::vector<FeatureRecord> records; // all phase-1 records
    EventLog app_events;
    std::vector<sleep::SleepEpisode> episodes;
};

SubjectPhase1 run_phase1(GridWorld& world, const ScenarioConfig& cfg,
                         const SubjectProfile& profile, std::uint64_t seed) {
    SubjectPhase1 out;
    SubjectSimulator sim(&world, profile);
    Rng probe_rng = Rng(profile.seed).substream("probe");
    Rng respond_rng = Rng(profile.seed).substream("respond-phase1");

    std::map<std::string, double> app_index;
    std::vector<InterruptProbe> probes;
    std::vector<traj::MinedRoute> mined;
    std::map<std::string, LatLon> poi_centroids;

    const int phase1_days = cfg.days / 2;
    TimePoint next_probe = 0;
    for (int i = 0; i < phase1_days; ++i) {
        DayId day = cfg.first_day + i;
        DayScript script = sim.plan_day(day);

        std::vector<Event> events;
        sim.emit_events(script, script.anchor, script.anchor + kSecondsPerDay, events);
        EventLog log;
        log.subject_id = profile.subject_id;
        log.events = std::move(events);
        auto records = aggregate_records(log);

        // windows + ground-truth labels (the user confirms every reminder)
        auto windows = sleep::build_windows(day, records, out.learned.prev_times,
                                            &out.learned.history);
        sleep::label_windows_from_intervals(windows, script.true_sleep_intervals());
        for (auto& w : windows) {
            w.place_id = out.learned.registry.assign(
                LatLon{w.features[sleep::kLatitude], w.features[sleep::kLongitude]});
            out.learned.registry.append_training_row(w.place_id,
                                                     window_to_row(w, profile.subject_id));
        }

        // walking-route mining inputs (weekdays only)
        if (!is_weekend(day)) {
            std::vector<traj::TrackPoint> fixes;
            for (const Event& e : log.events) {
                if (e.is<LocationFix>()) {
                    const auto& p = e.as<LocationFix>();
                    fixes.push_back({e.t, p.lat, p.lon});
                }
            }
            auto seg = traj::segment_routes(fixes, day, cfg.segment);
            std::string prefix = profile.subject_id + "_d" + std::to_string(day) + "_";
            for (auto& poi : seg.pois) {
                poi.poi_id = prefix + poi.poi_id;
                poi_centroids[poi.poi_id] = poi.centroid;
            }
            traj::attach_steps(seg.routes, records);
            for (auto& route : seg.routes) {
                if (!route.start_poi.empty()) route.start_poi = prefix + route.start_poi;
                if (!route.end_poi.empty()) route.end_poi = prefix + route.end_poi;
                if (route.start_poi.empty() || route.end_poi.empty()) continue;
                if (route.path_length_m() < 300.0) continue; // GPS-jitter stubs
                try {
                    std::string streets = traj::route_string(route, world);
                    mined.push_back({std::move(route), std::move(streets)});
                } catch (const DataError&) {
                    // off-map points only; skip the route
                }
            }
        }

        // interruptibility probes during active phone use
        int session_no = 0;
        for (const AppSessionScript& sess : script.sessions) {
            app_index.emplace(sess.app_id, static_cast<double>(app_index.size()));
            ++session_no;
            for (TimePoint t = floor_to(sess.begin + 299, kSlotSeconds); t < sess.end;
                 t += kSlotSeconds) {
                if (t < next_probe) continue;
                next_probe = t + probe_rng.uniform_int(3, 7) * kSlotSeconds; // 15..35 min
                InterruptProbe probe;
                probe.features = probe_features(sim, script, t, app_index);
                probe.accepted = agent_break_accept(profile, t, true, respond_rng);
                probes.push_back(std::move(probe));
            }
        }

        // daily metrics and correlate inputs
        if (!is_weekend(day)) {
            out.learned.weekday_steps.push_back(
                sim.steps_until(script, script.anchor + kSecondsPerDay));
        }
        out.learned.app_minutes.push_back(script.total_app_minutes());
        out.learned.bed_minutes.push_back(minutes_since_anchor(script.bed));
        auto ep = truth_episode(script, cfg.merge);
        out.learned.duration_h.push_back(ep.duration_min / 60.0);
        out.learned.prev_times = sleep::PrevSleepTimes{minutes_since_anchor(ep.bed_time),
                                                       minutes_since_anchor(ep.wake_time)};
        out.learned.history.observe_episode(out.learned.prev_times->bed_minutes,
                                            out.learned.prev_times->wake_minutes);
        out.episodes.push_back(std::move(ep));
        for (const auto& r : records) out.records.push_back(r);
        for (const Event& e : log.events) {
            if (e.is<AppEvent>()) out.app_events.events.push_back(e);
        }
    }

    out.learned.registry.train_models(
        std::vector<std::string>(sleep::window_feature_names().begin(),
                                 sleep::window_feature_names().end()),
        cfg.sleep_model, Rng(seed).substream("sleep-train").u64());

    out.learned.patterns = traj::mine_patterns(std::move(mined), cfg.mining);
    for (const auto& p : out.learned.patterns) {
        auto bind = [&](const std::string& id) {
            auto it = poi_centroids.find(id);
            if (it != poi_centroids.end()) world.bind_poi(id, it->second);
        };
        bind(p.start_poi);
        bind(p.end_poi);
    }

    correlate::ExtractWarnings warnings;
    auto params = correlate::extract_daily_params(out.records, out.app_events, out.episodes,
                                                  cfg.cadence, &warnings);
    if (params.size() >= 8) {
        out.learned.best = correlate::best_profile(params);
    } else {
        // thin phase 1: fall back to observed behaviour as the target
        double steps = 0.0;
        for (double s : out.learned.weekday_steps) steps += s;
        out.learned.best.best_daily_steps =
            out.learned.weekday_steps.empty()
                ? 0.0
                : steps / static_cast<double>(out.learned.weekday_steps.size());
        out.learned.best.best_bed_time_min = profile.sleep.bed_mean_min;
    }

    std::vector<std::pair<nudge::InterruptFeatures, bool>> history;
    ml::Dataset probe_ds;
    probe_ds.feature_names = nudge::InterruptFeatures::feature_names();
    for (const auto& probe : probes) {
        ml::Row r;
        r.features = probe.features;
        r.label = probe.accepted ? 1 : 0;
        probe_ds.rows.push_back(std::move(r));
    }
    if (probe_ds.rows.size() >= 50 && probe_ds.trainable()) {
        out.learned.interrupt = ml::Model::fit(probe_ds, ml::ClassifierSpec::forest_default(),
                                               Rng(seed).substream("interrupt").u64());
    }
    return out;
}

struct Phase2Metrics {
    std::vector<double> weekday_steps;
    std::vector<double> app_minutes;
    std::vector<double> bed_minutes, duration_h;
    std::map<std::string, Funnel> funnel;
    std::vector<std::string> advice_jsonl;
};

Phase2Metrics run_phase2(GridWorld& world, const ScenarioConfig& cfg,
                         const SubjectProfile& profile, SubjectPhase1& learned, ArmKind arm,
                         std::uint64_t /*seed*/) {
    Phase2Metrics metrics;
    SubjectSimulator sim(&world, profile);
    Rng respond_rng = Rng(profile.seed).substream("respond-phase2");
    Rng policy_rng = Rng(profile.seed).substream("policy");

    const int phase1_days = cfg.days / 2;
    const int phase2_days = cfg.days - phase1_days;

    std::unique_ptr<RandomTimingPolicy> policy;
    if (arm == ArmKind::random_timing) policy = std::make_unique<RandomTimingPolicy>(policy_rng);

    std::vector<sleep::SleepEpisode> pending_confirm;
    std::unique_ptr<nudge::Engine> engine;
    if (arm != ArmKind::control) {
        nudge::EngineConfig ecfg = cfg.engine;
        ecfg.best_daily_steps = learned.learned.best.best_daily_steps;
        ecfg.best_bed_time_min = learned.learned.best.best_bed_time_min;
        if (arm == ArmKind::random_timing) ecfg.advice_lead_min = 300.0; // anytime-before arm
        engine = std::make_unique<nudge::Engine>(
            ecfg, learned.learned.patterns, &world,
            learned.learned.interrupt ? &*learned.learned.interrupt : nullptr,
            [&pending_confirm](TimePoint) { return pending_confirm; }, policy.get());
    }

    std::optional<sleep::PrevSleepTimes> prev_times = learned.learned.prev_times;
    for (int i = 0; i < phase2_days; ++i) {
        DayId day = cfg.first_day + phase1_days + i;
        DayScript script = sim.plan_day(day);
        std::vector<Event> day_events;

        for (TimePoint now = script.anchor; now < script.anchor + kSecondsPerDay;
             now += kSlotSeconds) {
            sim.emit_events(script, now, now + kSlotSeconds, day_events);
            if (!engine) continue;

            nudge::ContextSnapshot ctx = sim.context_at(script, now);
            nudge::TickInputs inputs;
            inputs.steps_so_far_today = sim.steps_until(script, now);
            inputs.sleep_signal_positive = now >= script.bed + kWindowSeconds &&
                                           now < script.wake; // detector stand-in signal
            auto result = engine->tick(ctx, inputs);

            for (const std::string& id : result.delivered) {
                const nudge::Advice* a = engine->find_advice(id);
                if (!a) continue;
                AgentResponse resp;
                if (a->kind == nudge::AdviceKind::take_break) {
                    resp.seen = ctx.in_use || respond_rng.bernoulli(profile.response.p_backlog_seen);
                    if (resp.seen) {
                        resp.accepted =
                            agent_break_accept(profile, now, ctx.in_use, respond_rng);
                    }
                } else {
                    TimePoint ideal = a->kind == nudge::AdviceKind::steps
                                          ? a->expiry - static_cast<TimePoint>(
                                                            cfg.engine.advice_lead_min * 30)
                                          : now;
                    resp = agent_respond(profile, *a, ctx.in_use, ideal, respond_rng);
                }
                if (!resp.seen) continue;
                engine->record_response(id, resp.accepted ? nudge::AdviceResponse::accepted
                                                          : nudge::AdviceResponse::rejected,
                                        now, a->kind == nudge::AdviceKind::take_break && resp.accepted
                                                ? "water"
                                                : "");
                if (!resp.accepted) continue;

                // acceptance effects rewrite the rest of the script
                if (a->kind == nudge::AdviceKind::steps && a->route) {
                    const traj::TrajectoryPattern* pat = nullptr;
                    for (const auto& p : engine->patterns()) {
                        if (p.pattern_id == a->pattern_id) pat = &p;
                    }
                    if (pat) {
                        auto alt = world.find_alternative(pat->start_poi, pat->end_poi,
                                                          a->route->street_string);
                        if (alt) {
                            for (CommuteScript& c : script.commutes) {
                                if (c.depart > now && c.depart < a->expiry + 3600) {
                                    c.path = *alt;
                                    (c.to_work ? sim.route_to_work() : sim.route_to_home()) = *alt;
                                    break;
                                }
                            }
                        }
                    }
                } else if (a->kind == nudge::AdviceKind::take_break) {
                    SubjectSimulator::truncate_current_session(script, now);
                } else if (a->kind == nudge::AdviceKind::bedtime) {
                    TimePoint best_bed =
                        script.anchor +
                        static_cast<TimePoint>(
                            std::llround(learned.learned.best.best_bed_time_min * 60.0));
                    if (script.bed > best_bed && script.bed > now + 600) {
                        double shift = profile.response.bedtime_compliance *
                                       static_cast<double>(script.bed - best_bed);
                        TimePoint new_bed = std::max(
                            now + 600, script.bed - static_cast<TimePoint>(std::llround(shift)));
                        SubjectSimulator::shift_bed(script, new_bed);
                    }
                }
            }
        }

        // aggregate the day and queue its detection for tomorrow's confirms
        EventLog day_log;
        day_log.subject_id = profile.subject_id;
        day_log.events = std::move(day_events);
        auto records = aggregate_records(day_log);
        if (engine && learned.learned.registry.has_any_model()) {
            auto windows =
                sleep::build_windows(day, records, prev_times, &learned.learned.history);
            sleep::classify_day(windows, learned.learned.registry);
            if (auto ep = sleep::merge_episodes(windows, cfg.merge)) {
                pending_confirm.clear();
                pending_confirm.push_back(*ep);
                prev_times = sleep::PrevSleepTimes{minutes_since_anchor(ep->bed_time),
                                                   minutes_since_anchor(ep->wake_time)};
            }
        }

        if (!is_weekend(day)) {
            metrics.weekday_steps.push_back(
                sim.steps_until(script, script.anchor + kSecondsPerDay));
        }
        metrics.app_minutes.push_back(script.total_app_minutes());
        metrics.bed_minutes.push_back(minutes_since_anchor(script.bed));
        metrics.duration_h.push_back(truth_episode(script, cfg.merge).duration_min / 60.0);
    }

    if (engine) {
        for (const nudge::Advice& a : engine->advice_log()) {
            Funnel& f = metrics.funnel[to_string(a.kind)];
            ++f.generated;
            if (a.response != nudge::AdviceResponse::none) {
                ++f.seen;
                if (a.response == nudge::AdviceResponse::accepted) ++f.accepted;
            }
            metrics.advice_jsonl.push_back(a.to_jsonl());
        }
    }
    return metrics;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mu = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    return ss / static_cast<double>(v.size());
}

} // namespace

ScenarioReport run_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
    if (cfg.days < 20) throw ConfigError("run_scenario: need at least 20 days");
    if (cfg.n_subjects < 2) throw ConfigError("run_scenario: need at least 2 subjects per arm");
    if (cfg.arms.empty()) throw ConfigError("run_scenario: no arms configured");

    ScenarioReport report;
    report.config = cfg;
    report.seed = seed;

    std::vector<SubjectProfile> profiles;
    for (int i = 0; i < cfg.n_subjects; ++i) profiles.push_back(make_profile(cfg, i, seed));

    for (ArmKind arm : cfg.arms) {
        // a fresh world per arm keeps POI bindings and route rewrites isolated
        GridWorld world(cfg.world);
        ArmReport ar;
        ar.arm = arm;
        std::vector<double> steps_before, steps_during, app_before, app_during;
        std::vector<double> bed_var_before, bed_var_after, dur_before, dur_after;
        std::vector<std::vector<double>> per_subject_daily;

        for (const SubjectProfile& profile : profiles) {
            SubjectPhase1 phase1 = run_phase1(world, cfg, profile, seed);
            ar.patterns_total += static_cast<int>(phase1.learned.patterns.size());
            Phase2Metrics m = run_phase2(world, cfg, profile, phase1, arm, seed);

            steps_before.push_back(mean(phase1.learned.weekday_steps));
            steps_during.push_back(mean(m.weekday_steps));
            app_before.push_back(mean(phase1.learned.app_minutes));
            app_during.push_back(mean(m.app_minutes));
            bed_var_before.push_back(variance(phase1.learned.bed_minutes));
            bed_var_after.push_back(variance(m.bed_minutes));
            dur_before.push_back(mean(phase1.learned.duration_h));
            dur_after.push_back(mean(m.duration_h));
            per_subject_daily.push_back(m.weekday_steps);

            for (const auto& [kind, f] : m.funnel) {
                Funnel& dst = ar.funnel_by_kind[kind];
                dst.generated += f.generated;
                dst.seen += f.seen;
                dst.accepted += f.accepted;
                ar.funnel_total.generated += f.generated;
                ar.funnel_total.seen += f.seen;
                ar.funnel_total.accepted += f.accepted;
            }
            if (!m.advice_jsonl.empty()) ar.advice_logs[profile.subject_id] = m.advice_jsonl;
        }

        ar.mean_daily_steps_before = mean(steps_before);
        ar.mean_daily_steps_during = mean(steps_during);
        ar.app_minutes_before = mean(app_before);
        ar.app_minutes_during = mean(app_during);
        ar.bed_variance_before = mean(bed_var_before);
        ar.bed_variance_after = mean(bed_var_after);
        ar.sleep_duration_mean_before = mean(dur_before);
        ar.sleep_duration_mean_after = mean(dur_after);

        std::size_t n_days = 0;
        for (const auto& v : per_subject_daily) n_days = std::max(n_days, v.size());
        for (std::size_t d = 0; d < n_days; ++d) {
            double s = 0.0;
            int n = 0;
            for (const auto& v : per_subject_daily) {
                if (d < v.size()) {
                    s += v[d];
                    ++n;
                }
            }
            ar.weekday_steps_during.push_back(n ? s / n : 0.0);
        }
        report.arms.push_back(std::move(ar));
    }

    if (cfg.evaluate_sleep) {
        GridWorld world(cfg.world);
        std::vector<std::string> modality_names = {"all"};
        for (const auto& g : sleep::modality_groups()) modality_names.push_back(g.name);
        std::map<std::string, std::vector<ml::EvalMetrics>> per_modality;
        std::vector<std::vector<ml::EvalMetrics>> curves;
        for (const SubjectProfile& profile : profiles) {
            auto corpus = build_sleep_corpus(world, profile, cfg.first_day, cfg.days);
            ml::Dataset ds;
            ds.feature_names.assign(sleep::window_feature_names().begin(),
                                    sleep::window_feature_names().end());
            for (const auto& daywin : corpus) {
                for (const auto& w : daywin.windows) {
                    ds.rows.push_back(window_to_row(w, profile.subject_id));
                }
            }
            per_modality["all"].push_back(
                ml::cross_validate(ds, cfg.sleep_model, 10, Rng(seed).substream("cv-all").u64()));
            for (const auto& g : sleep::modality_groups()) {
                per_modality[g.name].push_back(ml::cross_validate(
                    ds.project(g.columns), cfg.sleep_model, 10,
                    Rng(seed).substream("cv", Rng::fnv1a(g.name)).u64()));
            }
            curves.push_back(sleep::learning_curve(corpus, cfg.sleep_model,
                                                   Rng(seed).substream("curve").u64(),
                                                   profile.subject_id));
        }
        for (const std::string& name : modality_names) {
            ModalityEval e;
            e.modality = name;
            const auto& list = per_modality[name];
            for (const auto& m : list) {
                e.metrics.accuracy += m.accuracy / list.size();
                e.metrics.precision += m.precision / list.size();
                e.metrics.recall += m.recall / list.size();
                e.metrics.f_value += m.f_value / list.size();
                e.metrics.rrse_percent += m.rrse_percent / list.size();
            }
            report.sleep_eval.push_back(std::move(e));
        }
        std::size_t curve_len = curves.empty() ? 0 : curves.front().size();
        for (const auto& c : curves) curve_len = std::min(curve_len, c.size());
        for (std::size_t d = 0; d < curve_len; ++d) {
            ml::EvalMetrics m;
            for (const auto& c : curves) {
                m.accuracy += c[d].accuracy / curves.size();
                m.precision += c[d].precision / curves.size();
                m.recall += c[d].recall / curves.size();
                m.f_value += c[d].f_value / curves.size();
                m.rrse_percent += c[d].rrse_percent / curves.size();
            }
            report.learning_curve.push_back(m);
        }
    }
    return report;
}

const ArmReport* ScenarioReport::arm(ArmKind k) const {
    for (const ArmReport& a : arms) {
        if (a.arm == k) return &a;
    }
    return nullptr;
}

std::string ScenarioReport::to_json() const {
    json j;
    j["seed"] = seed;
    j["days"] = config.days;
    j["n_subjects"] = config.n_subjects;
    json arms_json = json::array();
    for (const ArmReport& a : arms) {
        json ja;
        ja["arm"] = to_string(a.arm);
        json funnel = json::object();
        for (const auto& [kind, f] : a.funnel_by_kind) {
            funnel[kind] = {{"generated", f.generated},
                            {"seen", f.seen},
                            {"accepted", f.accepted},
                            {"acceptance_rate", f.acceptance_rate()}};
        }
        ja["funnel_by_kind"] = std::move(funnel);
        ja["funnel_total"] = {{"generated", a.funnel_total.generated},
                              {"seen", a.funnel_total.seen},
                              {"accepted", a.funnel_total.accepted},
                              {"acceptance_rate", a.funnel_total.acceptance_rate()}};
        ja["patterns_total"] = a.patterns_total;
        ja["mean_weekday_steps_before"] = a.mean_daily_steps_before;
        ja["mean_weekday_steps_during"] = a.mean_daily_steps_during;
        ja["weekday_steps_during"] = a.weekday_steps_during;
        ja["app_minutes_before"] = a.app_minutes_before;
        ja["app_minutes_during"] = a.app_minutes_during;
        ja["bed_variance_before_min2"] = a.bed_variance_before;
        ja["bed_variance_after_min2"] = a.bed_variance_after;
        ja["sleep_duration_mean_before_h"] = a.sleep_duration_mean_before;
        ja["sleep_duration_mean_after_h"] = a.sleep_duration_mean_after;
        arms_json.push_back(std::move(ja));
    }
    j["arms"] = std::move(arms_json);
    if (!sleep_eval.empty()) {
        json ev = json::array();
        for (const ModalityEval& e : sleep_eval) {
            ev.push_back({{"modality", e.modality},
                          {"accuracy", e.metrics.accuracy},
                          {"precision", e.metrics.precision},
                          {"recall", e.metrics.recall},
                          {"f_value", e.metrics.f_value},
                          {"rrse_percent", e.metrics.rrse_percent}});
        }
        j["sleep_eval"] = std::move(ev);
    }
    if (!learning_curve.empty()) {
        json c = json::array();
        for (const auto& m : learning_curve) c.push_back(m.accuracy);
        j["learning_curve_accuracy"] = std::move(c);
    }
    return j.dump(2);
}

void ScenarioReport::write_fig13_funnel_csv(std::ostream& out) const {
    out << "arm,kind,generated,seen,accepted,acceptance_rate\n";
    for (const ArmReport& a : arms) {
        for (const auto& [kind, f] : a.funnel_by_kind) {
            out << to_string(a.arm) << ',' << kind << ',' << f.generated << ',' << f.seen << ','
                << f.accepted << ',' << f.acceptance_rate() << '\n';
        }
    }
}

void ScenarioReport::write_fig15_steps_csv(std::ostream& out) const {
    out << "weekday_index,arm,mean_steps\n";
    for (const ArmReport& a : arms) {
        for (std::size_t d = 0; d < a.weekday_steps_during.size(); ++d) {
            out << d << ',' << to_string(a.arm) << ',' << a.weekday_steps_during[d] << '\n';
        }
    }
}

void ScenarioReport::write_fig16_acceptance_csv(std::ostream& out) const {
    out << "arm,break_generated,break_seen,break_accepted,acceptance_rate\n";
    for (const ArmReport& a : arms) {
        auto it = a.funnel_by_kind.find("break");
        Funnel f = it == a.funnel_by_kind.end() ? Funnel{} : it->second;
        out << to_string(a.arm) << ',' << f.generated << ',' << f.seen << ',' << f.accepted << ','
            << f.acceptance_rate() << '\n';
    }
}

void ScenarioReport::write_fig18_bedding_csv(std::ostream& out) const {
    out << "arm,bed_variance_before_min2,bed_variance_after_min2,duration_before_h,duration_after_h\n";
    for (const ArmReport& a : arms) {
        out << to_string(a.arm) << ',' << a.bed_variance_before << ',' << a.bed_variance_after
            << ',' << a.sleep_duration_mean_before << ',' << a.sleep_duration_mean_after << '\n';
    }
}

void ScenarioReport::write_fig6_metrics_csv(std::ostream& out) const {
    out << "modality,accuracy,precision,recall,f_value,rrse_percent\n";
    for (const ModalityEval& e : sleep_eval) {
        out << e.modality << ',' << e.metrics.accuracy << ',' << e.metrics.precision << ','
            << e.metrics.recall << ',' << e.metrics.f_value << ',' << e.metrics.rrse_percent
            << '\n';
    }
}

void ScenarioReport::write_fig7_curve_csv(std::ostream& out) const {
    out << "day,accuracy,rrse_percent\n";
    for (std::size_t d = 0; d < learning_curve.size(); ++d) {
        out << (d + 2) << ',' << learning_curve[d].accuracy << ','
            << learning_curve[d].rrse_percent << '\n';
    }
}

} // namespace nudgekit::sim
