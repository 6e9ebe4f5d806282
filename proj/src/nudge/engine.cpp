#include "nudgekit/nudge/engine.hpp"

#include "nudgekit/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace nudgekit::nudge {

using nlohmann::json;

namespace {
constexpr TimePoint kNeverExpires = std::numeric_limits<TimePoint>::max() / 2;
}

const char* to_string(AdviceKind k) {
    switch (k) {
        case AdviceKind::steps: return "steps";
        case AdviceKind::take_break: return "break";
        case AdviceKind::bedtime: return "bedtime";
        case AdviceKind::sleep_confirm: return "sleep_confirm";
    }
    return "steps";
}

std::string Advice::to_jsonl() const {
    json j;
    j["advice_id"] = advice_id;
    j["kind"] = to_string(kind);
    j["created_at"] = format_iso8601(created_at);
    if (delivered_at) j["delivered_at"] = format_iso8601(*delivered_at);
    switch (response) {
        case AdviceResponse::none: j["response"] = "none"; break;
        case AdviceResponse::accepted: j["response"] = "accepted"; break;
        case AdviceResponse::rejected: j["response"] = "rejected"; break;
    }
    json payload;
    payload["target_day"] = format_date(target_day);
    if (!pattern_id.empty()) payload["pattern_id"] = pattern_id;
    if (route) {
        payload["street_string"] = route->street_string;
        payload["alt_distance_m"] = route->alt_distance_m;
        payload["est_steps"] = route->est_steps;
    }
    if (!episode_json.empty()) payload["episode"] = json::parse(episode_json);
    if (!note.empty()) payload["note"] = note;
    j["payload"] = std::move(payload);
    return j.dump();
}

std::vector<double> InterruptFeatures::to_features() const {
    std::vector<double> f;
    f.reserve(15);
    f.push_back(weekday);
    f.push_back(app_index);
    f.push_back(continuous_use_stats.min);
    f.push_back(continuous_use_stats.avg);
    f.push_back(continuous_use_stats.max);
    f.push_back(continuous_use_stats.std);
    f.push_back(start_clock_hour);
    f.push_back(same_app_count_stats.min);
    f.push_back(same_app_count_stats.avg);
    f.push_back(same_app_count_stats.max);
    f.push_back(same_app_count_stats.std);
    f.push_back(movement_stats.min);
    f.push_back(movement_stats.avg);
    f.push_back(movement_stats.max);
    f.push_back(movement_stats.std);
    return f;
}

const std::vector<std::string>& InterruptFeatures::feature_names() {
    static const std::vector<std::string> names = {
        "weekday",        "app_index",      "cont_use_min",  "cont_use_avg", "cont_use_max",
        "cont_use_std",   "start_hour",     "same_app_min",  "same_app_avg", "same_app_max",
        "same_app_std",   "movement_min",   "movement_avg",  "movement_max", "movement_std"};
    return names;
}

Engine::Engine(EngineConfig cfg, std::vector<traj::TrajectoryPattern> patterns,
               const traj::AlternativesProvider* alternatives, const ml::Model* interrupt_model,
               SleepCheckHook sleep_check, TimingPolicy* policy)
    : cfg_(std::move(cfg)),
      patterns_(std::move(patterns)),
      alternatives_(alternatives),
      interrupt_model_(interrupt_model),
      sleep_check_(std::move(sleep_check)),
      policy_(policy) {}

traj::TrajectoryPattern* Engine::find_pattern(const std::string& id) {
    for (auto& p : patterns_) {
        if (p.pattern_id == id) return &p;
    }
    return nullptr;
}

const Advice* Engine::find_advice(const std::string& advice_id) const {
    for (const Advice& a : advices_) {
        if (a.advice_id == advice_id) return &a;
    }
    return nullptr;
}

Advice& Engine::new_advice(AdviceKind kind, TimePoint created_at, TimePoint expiry, DayId day) {
    Advice a;
    a.advice_id = "a" + std::to_string(next_advice_seq_++);
    a.kind = kind;
    a.created_at = created_at;
    a.expiry = expiry;
    a.target_day = day;
    advices_.push_back(std::move(a));
    return advices_.back();
}

void Engine::roll_day(DayId day) {
    current_day_ = day;
    app_session_lengths_.clear();
    app_session_counts_.clear();
}

void Engine::track_app_session(const ContextSnapshot& ctx) {
    if (ctx.current_app == current_app_) return;
    if (current_app_) {
        double len = static_cast<double>(ctx.now - current_app_since_);
        app_session_lengths_[*current_app_].push_back(len);
    }
    current_app_ = ctx.current_app;
    current_app_since_ = ctx.now;
    if (current_app_) {
        app_index_.emplace(*current_app_, static_cast<double>(app_index_.size()));
        ++app_session_counts_[*current_app_];
    }
}

InterruptFeatures Engine::interrupt_features(const ContextSnapshot& ctx) const {
    InterruptFeatures f;
    f.weekday = weekday_of(static_cast<DayId>(
        (ctx.now >= 0 ? ctx.now : ctx.now - (kSecondsPerDay - 1)) / kSecondsPerDay));
    f.movement_stats = ctx.movement_recent;
    if (current_app_) {
        f.app_id = *current_app_;
        auto it = app_index_.find(*current_app_);
        f.app_index = it != app_index_.end() ? it->second : -1.0;
        std::vector<double> lengths;
        auto lit = app_session_lengths_.find(*current_app_);
        if (lit != app_session_lengths_.end()) lengths = lit->second;
        lengths.push_back(static_cast<double>(ctx.now - current_app_since_));
        f.continuous_use_stats = stats_of(lengths);
        f.start_clock_hour = static_cast<int>(minutes_of_day(current_app_since_)) / 60;
    } else {
        f.app_index = -1.0;
    }
    std::vector<double> counts;
    for (const auto& [id, n] : app_session_counts_) counts.push_back(n);
    if (!counts.empty()) f.same_app_count_stats = stats_of(counts);
    return f;
}

TickResult Engine::tick(const ContextSnapshot& ctx, const TickInputs& inputs) {
    if (started_ && ctx.now < clock_) {
        throw DataError("tick clock went backwards: " + format_iso8601(ctx.now));
    }
    clock_ = ctx.now;
    started_ = true;
    DayId day = analysis_day_of(ctx.now);
    if (day != current_day_) roll_day(day);
    track_app_session(ctx);

    TickResult result;
    if (!last_scan_ || ctx.now - *last_scan_ >= static_cast<TimePoint>(cfg_.scan_period_min * 60)) {
        scan_patterns(ctx, inputs, result);
        last_scan_ = ctx.now;
    }
    if (sleep_check_ &&
        (!last_sleep_check_ ||
         ctx.now - *last_sleep_check_ >= static_cast<TimePoint>(cfg_.sleep_check_period_min * 60))) {
        sleep_check(ctx, result);
        last_sleep_check_ = ctx.now;
    }
    bedtime_trigger(ctx, result);
    deliver_pending(ctx, result);
    break_step(ctx, result);
    bedtime_step(ctx, inputs);
    return result;
}

void Engine::scan_patterns(const ContextSnapshot& ctx, const TickInputs& inputs,
                           TickResult& result) {
    if (!alternatives_) return;
    const DayId calendar_day = static_cast<DayId>(
        (ctx.now >= 0 ? ctx.now : ctx.now - (kSecondsPerDay - 1)) / kSecondsPerDay);
    const TimePoint midnight = static_cast<TimePoint>(calendar_day) * kSecondsPerDay;
    const TimePoint lead = static_cast<TimePoint>(cfg_.advice_lead_min * 60);

    // the next pattern starting within the lead window, earliest first
    const traj::TrajectoryPattern* next = nullptr;
    TimePoint next_start = 0;
    for (const auto& p : patterns_) {
        if (p.consecutive_rejections > cfg_.max_consecutive_rejections) continue;
        if (!p.weekdays.empty() && !p.weekdays.count(weekday_of(calendar_day))) continue;
        TimePoint start = midnight + static_cast<TimePoint>(std::llround(p.start_clock_min * 60));
        if (start <= ctx.now || start - ctx.now > lead) continue;
        if (steps_emitted_.count({p.pattern_id, current_day_})) continue;
        if (!next || start < next_start) {
            next = &p;
            next_start = start;
        }
    }
    if (!next) return;

    traj::ProposalConfig pc;
    pc.strategy = cfg_.strategy;
    pc.max_consecutive_rejections = cfg_.max_consecutive_rejections;
    auto proposal = traj::propose_alternative(*next, *alternatives_, cfg_.best_daily_steps,
                                              inputs.steps_so_far_today, pc);
    if (!proposal) return;

    Advice& a = new_advice(AdviceKind::steps, ctx.now, next_start, current_day_);
    a.pattern_id = next->pattern_id;
    a.route = proposal;
    steps_emitted_.insert({next->pattern_id, current_day_});
    result.generated.push_back(a.advice_id);
    if (policy_) {
        scheduled_[a.advice_id] =
            policy_->delivery_time(AdviceKind::steps, ctx.now, next_start - lead, next_start);
    }
}

void Engine::deliver_pending(const ContextSnapshot& ctx, TickResult& result) {
    const TimePoint lead = static_cast<TimePoint>(cfg_.advice_lead_min * 60);
    for (Advice& a : advices_) {
        if (a.delivered() || a.response != AdviceResponse::none) continue;
        if (ctx.now >= a.expiry) continue; // expired undelivered
        bool deliver = false;
        auto sched = scheduled_.find(a.advice_id);
        if (sched != scheduled_.end() && sched->second) {
            deliver = ctx.now >= *sched->second;
        } else {
            switch (a.kind) {
                case AdviceKind::steps:
                    deliver = ctx.in_use && ctx.now >= a.expiry - lead;
                    break;
                case AdviceKind::bedtime:
                case AdviceKind::sleep_confirm:
                    deliver = ctx.in_use;
                    break;
                case AdviceKind::take_break:
                    deliver = false; // break advices deliver at creation
                    break;
            }
        }
        if (deliver) {
            a.delivered_at = ctx.now;
            result.delivered.push_back(a.advice_id);
        }
    }
}

void Engine::break_step(const ContextSnapshot& ctx, TickResult& result) {
    std::optional<bool> policy_call = policy_ ? policy_->break_due(ctx.now) : std::nullopt;
    bool fire = false;
    if (policy_call) {
        fire = *policy_call; // the random-timing arm fires on its own schedule
    } else {
        bool gap_ok = !last_break_advice_ ||
                      ctx.now - *last_break_advice_ >=
                          static_cast<TimePoint>(cfg_.break_min_gap_min * 60);
        bool eligible = ctx.screen_on &&
                        ctx.movement_recent.std >= cfg_.break_movement_std_min && gap_ok &&
                        ctx.in_use;
        if (eligible) {
            if (interrupt_model_) {
                std::vector<double> f = interrupt_features(ctx).to_features();
                fire = interrupt_model_->predict_proba(f) >= 0.5;
            } else {
                fire = true; // always-eligible fallback mode
            }
        }
    }
    if (!fire) return;
    Advice& a = new_advice(AdviceKind::take_break, ctx.now, ctx.now + kSlotSeconds, current_day_);
    a.note = current_app_ ? *current_app_ : "";
    a.delivered_at = ctx.now;
    last_break_advice_ = ctx.now;
    result.generated.push_back(a.advice_id);
    result.delivered.push_back(a.advice_id);
}

void Engine::bedtime_trigger(const ContextSnapshot& ctx, TickResult& result) {
    if (bedtime_emitted_.count(current_day_)) return;
    const TimePoint best_bed =
        anchor_of_day(current_day_) + static_cast<TimePoint>(std::llround(cfg_.best_bed_time_min * 60));
    const TimePoint window_begin =
        best_bed - static_cast<TimePoint>(cfg_.bedtime_lead_min * 60);
    if (ctx.now < window_begin || ctx.now > best_bed) return;
    Advice& a = new_advice(AdviceKind::bedtime, ctx.now, best_bed + 1, current_day_);
    bedtime_emitted_.insert(current_day_);
    result.generated.push_back(a.advice_id);
}

void Engine::bedtime_step(const ContextSnapshot& ctx, const TickInputs& inputs) {
    if (!session_ || !session_->active()) return;
    if (inputs.sleep_signal_positive.value_or(false)) {
        session_->ended_at = ctx.now;
        session_->termination = BedtimeSession::Termination::service;
        finished_sessions_.push_back(*session_);
        session_.reset();
        return;
    }
    if (ctx.movement_recent.std < cfg_.bedtime_movement_std_max &&
        ctx.ambient_light_lux < cfg_.bedtime_light_max) {
        session_->volume *= cfg_.bedtime_volume_factor;
    }
}

void Engine::stop_bedtime_session(TimePoint clock) {
    if (!session_ || !session_->active()) return;
    session_->ended_at = clock;
    session_->termination = BedtimeSession::Termination::user;
    finished_sessions_.push_back(*session_);
    session_.reset();
}

void Engine::sleep_check(const ContextSnapshot& ctx, TickResult& result) {
    auto episodes = sleep_check_(ctx.now);
    for (const auto& ep : episodes) {
        if (confirmed_days_.count(ep.day_id)) continue;
        bool pending_undelivered = false;
        for (const Advice& a : advices_) {
            if (a.kind == AdviceKind::sleep_confirm && a.target_day == ep.day_id &&
                !a.delivered() && a.response == AdviceResponse::none) {
                pending_undelivered = true;
                break;
            }
        }
        if (pending_undelivered) continue;
        // a fresh reminder each half-hour round until the user confirms
        Advice& a = new_advice(AdviceKind::sleep_confirm, ctx.now, kNeverExpires, ep.day_id);
        a.episode_json = ep.to_json();
        result.generated.push_back(a.advice_id);
    }
}

void Engine::record_response(const std::string& advice_id, AdviceResponse response,
                             TimePoint clock, const std::string& note) {
    if (response == AdviceResponse::none) throw DataError("response must be accepted|rejected");
    Advice* advice = nullptr;
    for (Advice& a : advices_) {
        if (a.advice_id == advice_id) {
            advice = &a;
            break;
        }
    }
    if (!advice) throw DataError("unknown advice_id: " + advice_id);
    if (!advice->delivered()) throw DataError("response to undelivered advice: " + advice_id);
    if (advice->response != AdviceResponse::none) {
        throw DataError("advice already answered: " + advice_id);
    }
    advice->response = response;
    advice->responded_at = clock;
    if (!note.empty()) advice->note = note;

    if (advice->kind == AdviceKind::steps) {
        if (auto* p = find_pattern(advice->pattern_id)) {
            p->consecutive_rejections =
                response == AdviceResponse::rejected ? p->consecutive_rejections + 1 : 0;
        }
    } else if (advice->kind == AdviceKind::sleep_confirm) {
        confirmed_days_.insert(advice->target_day);
    } else if (advice->kind == AdviceKind::bedtime && response == AdviceResponse::accepted) {
        BedtimeSession s;
        s.session_id = "bs" + std::to_string(next_session_seq_++);
        s.trigger_at = advice->expiry - 1 - static_cast<TimePoint>(cfg_.bedtime_lead_min * 60);
        s.started_at = clock;
        s.volume = 1.0;
        s.effects = {"soft_piano", "rain"};
        session_ = std::move(s);
    }
}

std::string Engine::state_to_json() const {
    json j;
    j["format_version"] = 1;
    j["clock"] = clock_;
    j["started"] = started_;
    j["current_day"] = current_day_;
    if (last_scan_) j["last_scan"] = *last_scan_;
    if (last_sleep_check_) j["last_sleep_check"] = *last_sleep_check_;
    if (last_break_advice_) j["last_break_advice"] = *last_break_advice_;
    j["next_advice_seq"] = next_advice_seq_;
    j["next_session_seq"] = next_session_seq_;

    json advices = json::array();
    for (const Advice& a : advices_) {
        json ja;
        ja["id"] = a.advice_id;
        ja["kind"] = static_cast<int>(a.kind);
        ja["created_at"] = a.created_at;
        if (a.delivered_at) ja["delivered_at"] = *a.delivered_at;
        ja["response"] = static_cast<int>(a.response);
        if (a.responded_at) ja["responded_at"] = *a.responded_at;
        ja["expiry"] = a.expiry;
        ja["target_day"] = a.target_day;
        ja["pattern_id"] = a.pattern_id;
        if (a.route) {
            ja["route"] = {{"pattern_id", a.route->pattern_id},
                           {"street_string", a.route->street_string},
                           {"alt_distance_m", a.route->alt_distance_m},
                           {"est_steps", a.route->est_steps}};
        }
        ja["episode_json"] = a.episode_json;
        ja["note"] = a.note;
        advices.push_back(std::move(ja));
    }
    j["advices"] = std::move(advices);

    json sched = json::object();
    for (const auto& [id, t] : scheduled_) sched[id] = t ? json(*t) : json(nullptr);
    j["scheduled"] = std::move(sched);

    json emitted = json::array();
    for (const auto& [pid, day] : steps_emitted_) emitted.push_back({pid, day});
    j["steps_emitted"] = std::move(emitted);
    j["bedtime_emitted"] = std::vector<DayId>(bedtime_emitted_.begin(), bedtime_emitted_.end());
    j["confirmed_days"] = std::vector<DayId>(confirmed_days_.begin(), confirmed_days_.end());

    j["app_index"] = app_index_;
    j["app_session_lengths"] = app_session_lengths_;
    j["app_session_counts"] = app_session_counts_;
    if (current_app_) j["current_app"] = *current_app_;
    j["current_app_since"] = current_app_since_;

    auto session_json = [](const BedtimeSession& s) {
        json js;
        js["id"] = s.session_id;
        js["trigger_at"] = s.trigger_at;
        js["started_at"] = s.started_at;
        js["volume"] = s.volume;
        js["effects"] = s.effects;
        if (s.ended_at) js["ended_at"] = *s.ended_at;
        js["termination"] = static_cast<int>(s.termination);
        return js;
    };
    if (session_) j["session"] = session_json(*session_);
    json finished = json::array();
    for (const auto& s : finished_sessions_) finished.push_back(session_json(s));
    j["finished_sessions"] = std::move(finished);

    json rejections = json::object();
    for (const auto& p : patterns_) rejections[p.pattern_id] = p.consecutive_rejections;
    j["pattern_rejections"] = std::move(rejections);
    return j.dump();
}

void Engine::state_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.value("format_version", 0) != 1) throw DataError("unsupported engine state version");
    clock_ = j.at("clock").get<TimePoint>();
    started_ = j.at("started").get<bool>();
    current_day_ = j.at("current_day").get<DayId>();
    last_scan_.reset();
    last_sleep_check_.reset();
    last_break_advice_.reset();
    if (j.contains("last_scan")) last_scan_ = j["last_scan"].get<TimePoint>();
    if (j.contains("last_sleep_check")) last_sleep_check_ = j["last_sleep_check"].get<TimePoint>();
    if (j.contains("last_break_advice")) {
        last_break_advice_ = j["last_break_advice"].get<TimePoint>();
    }
    next_advice_seq_ = j.at("next_advice_seq").get<std::uint64_t>();
    next_session_seq_ = j.at("next_session_seq").get<std::uint64_t>();

    advices_.clear();
    for (const json& ja : j.at("advices")) {
        Advice a;
        a.advice_id = ja.at("id").get<std::string>();
        a.kind = static_cast<AdviceKind>(ja.at("kind").get<int>());
        a.created_at = ja.at("created_at").get<TimePoint>();
        if (ja.contains("delivered_at")) a.delivered_at = ja["delivered_at"].get<TimePoint>();
        a.response = static_cast<AdviceResponse>(ja.at("response").get<int>());
        if (ja.contains("responded_at")) a.responded_at = ja["responded_at"].get<TimePoint>();
        a.expiry = ja.at("expiry").get<TimePoint>();
        a.target_day = ja.at("target_day").get<DayId>();
        a.pattern_id = ja.at("pattern_id").get<std::string>();
        if (ja.contains("route")) {
            traj::RouteAdvice r;
            r.pattern_id = ja["route"].at("pattern_id").get<std::string>();
            r.street_string = ja["route"].at("street_string").get<std::string>();
            r.alt_distance_m = ja["route"].at("alt_distance_m").get<double>();
            r.est_steps = ja["route"].at("est_steps").get<double>();
            a.route = std::move(r);
        }
        a.episode_json = ja.at("episode_json").get<std::string>();
        a.note = ja.at("note").get<std::string>();
        advices_.push_back(std::move(a));
    }

    scheduled_.clear();
    for (auto it = j.at("scheduled").begin(); it != j.at("scheduled").end(); ++it) {
        scheduled_[it.key()] =
            it.value().is_null() ? std::nullopt : std::optional<TimePoint>(it.value().get<TimePoint>());
    }

    steps_emitted_.clear();
    for (const json& e : j.at("steps_emitted")) {
        steps_emitted_.insert({e.at(0).get<std::string>(), e.at(1).get<DayId>()});
    }
    bedtime_emitted_.clear();
    for (DayId d : j.at("bedtime_emitted").get<std::vector<DayId>>()) bedtime_emitted_.insert(d);
    confirmed_days_.clear();
    for (DayId d : j.at("confirmed_days").get<std::vector<DayId>>()) confirmed_days_.insert(d);

    app_index_ = j.at("app_index").get<std::map<std::string, double>>();
    app_session_lengths_ =
        j.at("app_session_lengths").get<std::map<std::string, std::vector<double>>>();
    app_session_counts_ = j.at("app_session_counts").get<std::map<std::string, int>>();
    current_app_.reset();
    if (j.contains("current_app")) current_app_ = j["current_app"].get<std::string>();
    current_app_since_ = j.at("current_app_since").get<TimePoint>();

    auto session_from = [](const json& js) {
        BedtimeSession s;
        s.session_id = js.at("id").get<std::string>();
        s.trigger_at = js.at("trigger_at").get<TimePoint>();
        s.started_at = js.at("started_at").get<TimePoint>();
        s.volume = js.at("volume").get<double>();
        s.effects = js.at("effects").get<std::vector<std::string>>();
        if (js.contains("ended_at")) s.ended_at = js["ended_at"].get<TimePoint>();
        s.termination = static_cast<BedtimeSession::Termination>(js.at("termination").get<int>());
        return s;
    };
    session_.reset();
    if (j.contains("session")) session_ = session_from(j["session"]);
    finished_sessions_.clear();
    for (const json& js : j.at("finished_sessions")) finished_sessions_.push_back(session_from(js));

    const json& rejections = j.at("pattern_rejections");
    for (auto& p : patterns_) {
        if (rejections.contains(p.pattern_id)) {
            p.consecutive_rejections = rejections[p.pattern_id].get<int>();
        }
    }
}

std::optional<ml::Model> train_interruptibility(
    const std::vector<std::pair<InterruptFeatures, bool>>& history, const ml::ClassifierSpec& spec,
    std::uint64_t seed, std::size_t min_rows) {
    ml::Dataset ds;
    ds.feature_names = InterruptFeatures::feature_names();
    for (const auto& [f, accepted] : history) {
        ml::Row r;
        r.features = f.to_features();
        r.label = accepted ? 1 : 0;
        ds.rows.push_back(std::move(r));
    }
    if (ds.rows.size() < min_rows || !ds.trainable()) return std::nullopt;
    return ml::Model::fit(ds, spec, seed);
}

} // namespace nudgekit::nudge
