#include "nudgekit/errors.hpp"
#include "nudgekit/ml/metrics.hpp"
#include "nudgekit/nudge/engine.hpp"
#include "nudgekit/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace nudgekit;
using namespace nudgekit::nudge;

namespace {

constexpr DayId kDay = 19786; // 2024-03-04, a Monday
const TimePoint kAnchor = anchor_of_day(kDay);
const TimePoint kMidnight = static_cast<TimePoint>(kDay) * kSecondsPerDay;

class OneAlternative : public traj::AlternativesProvider {
public:
    std::vector<traj::RouteAlternative> alternatives(const std::string&,
                                                     const std::string&) const override {
        return {{"Avenue 2|Street 12|Avenue 8", 1100.0}};
    }
};

traj::TrajectoryPattern commute_pattern(double start_clock_min = 510.0 /* 08:30 */) {
    traj::TrajectoryPattern p;
    p.pattern_id = "pat0";
    p.start_poi = "home";
    p.end_poi = "work";
    p.weekdays = {0, 1, 2, 3, 4};
    p.start_clock_min = start_clock_min;
    p.end_clock_min = start_clock_min + 15;
    p.avg_steps = 1250;
    p.avg_speed_mps = 1.3;
    p.map_distance_m = 1000;
    p.street_string = "Avenue 2|Street 11|Avenue 8";
    p.occurrences = 10;
    return p;
}

ContextSnapshot ctx_at(TimePoint now, bool in_use) {
    ContextSnapshot c;
    c.now = now;
    c.screen_on = in_use;
    c.in_use = in_use;
    c.movement_recent = Stats{9.8, 9.81, 9.85, in_use ? 0.05 : 0.001, 60};
    c.ambient_light_lux = 120.0;
    if (in_use) c.current_app = "chat.blue";
    return c;
}

EngineConfig quiet_config() {
    EngineConfig cfg;
    cfg.best_daily_steps = 1e9;     // no daily cap in these tests
    cfg.best_bed_time_min = -1e9;   // bedtime trigger disabled unless a test enables it
    cfg.break_movement_std_min = 1e9; // break nudger off; it has its own tests
    return cfg;
}

EngineConfig breaks_config() {
    EngineConfig cfg;
    cfg.best_daily_steps = 1e9;
    cfg.best_bed_time_min = -1e9;
    return cfg;
}

} // namespace

TEST_CASE("a cached steps advice is delivered inside the pre-pattern window when in use") {
    OneAlternative provider;
    Engine engine(quiet_config(), {commute_pattern()}, &provider, nullptr);
    // 08:00 scan caches the advice for the 08:30 pattern
    auto r0 = engine.tick(ctx_at(kMidnight + 8 * 3600, false));
    CHECK(r0.generated.size() == 1);
    CHECK(r0.delivered.empty());
    // 08:05, user on the phone -> delivered
    auto r1 = engine.tick(ctx_at(kMidnight + 8 * 3600 + 300, true));
    REQUIRE(r1.delivered.size() == 1);
    const Advice* a = engine.find_advice(r1.delivered[0]);
    REQUIRE(a != nullptr);
    CHECK(a->kind == AdviceKind::steps);
    CHECK(a->route.has_value());
    CHECK(a->route->est_steps == doctest::Approx(1375.0));
}

TEST_CASE("an advice never delivered before the pattern start expires") {
    OneAlternative provider;
    Engine engine(quiet_config(), {commute_pattern()}, &provider, nullptr);
    for (TimePoint t = kMidnight + 8 * 3600; t <= kMidnight + 8 * 3600 + 1500; t += 300) {
        auto r = engine.tick(ctx_at(t, false));
        CHECK(r.delivered.empty());
    }
    // 08:31, back on the phone: too late
    auto late = engine.tick(ctx_at(kMidnight + 8 * 3600 + 1860, true));
    CHECK(late.delivered.empty());
    REQUIRE(engine.advice_log().size() == 1);
    CHECK(engine.advice_log()[0].expired_undelivered(kMidnight + 8 * 3600 + 1860));
}

TEST_CASE("at most one steps advice per pattern per day") {
    OneAlternative provider;
    Engine engine(quiet_config(), {commute_pattern()}, &provider, nullptr);
    int generated = 0;
    for (TimePoint t = kMidnight + 7 * 3600; t < kMidnight + 9 * 3600; t += 300) {
        generated += static_cast<int>(engine.tick(ctx_at(t, false)).generated.size());
    }
    CHECK(generated == 1);
}

TEST_CASE("sleep confirmations queue until in use and re-emit every half hour until confirmed") {
    sleep::SleepEpisode ep;
    ep.day_id = kDay;
    ep.bed_time = kAnchor + 330 * 60;
    ep.wake_time = kAnchor + 810 * 60;
    ep.duration_min = 480;
    ep.chunks = {{ep.bed_time, ep.wake_time}};
    auto hook = [&](TimePoint) { return std::vector<sleep::SleepEpisode>{ep}; };

    OneAlternative provider;
    Engine engine(quiet_config(), {}, &provider, nullptr, hook);

    // 09:00: detected, user not on the phone -> queued, not delivered
    auto r0 = engine.tick(ctx_at(kMidnight + 9 * 3600, false));
    CHECK(r0.generated.size() == 1);
    CHECK(r0.delivered.empty());
    // 09:05 in use -> the queued confirmation is delivered
    auto r1 = engine.tick(ctx_at(kMidnight + 9 * 3600 + 300, true));
    REQUIRE(r1.delivered.size() == 1);
    // no response: the next half-hour round emits a fresh reminder
    auto r2 = engine.tick(ctx_at(kMidnight + 9 * 3600 + 1800, true));
    CHECK(r2.generated.size() == 1);
    CHECK(r2.delivered.size() == 1);
    // confirm stops the loop
    engine.record_response(r2.delivered[0], AdviceResponse::accepted,
                           kMidnight + 9 * 3600 + 1860);
    auto r3 = engine.tick(ctx_at(kMidnight + 9 * 3600 + 3600, true));
    CHECK(r3.generated.empty());
}

TEST_CASE("four consecutive rejections permanently suppress a pattern") {
    OneAlternative provider;
    Engine engine(quiet_config(), {commute_pattern()}, &provider, nullptr);
    int responded = 0;
    for (int day = 0; day < 6; ++day) {
        TimePoint midnight = kMidnight + static_cast<TimePoint>(day) * kSecondsPerDay;
        if (is_weekend(kDay + day)) continue;
        for (TimePoint t = midnight + 8 * 3600; t < midnight + 9 * 3600; t += 300) {
            auto r = engine.tick(ctx_at(t, true));
            for (const auto& id : r.delivered) {
                engine.record_response(id, AdviceResponse::rejected, t);
                ++responded;
            }
        }
    }
    CHECK(responded == 4); // the 5th weekday emits nothing
    CHECK(engine.patterns()[0].consecutive_rejections == 4);
}

TEST_CASE("acceptance resets the rejection counter") {
    OneAlternative provider;
    Engine engine(quiet_config(), {commute_pattern()}, &provider, nullptr);
    int seen = 0;
    for (int day = 0; day < 5 && seen < 3; ++day) {
        TimePoint midnight = kMidnight + static_cast<TimePoint>(day) * kSecondsPerDay;
        if (is_weekend(kDay + day)) continue;
        for (TimePoint t = midnight + 8 * 3600; t < midnight + 9 * 3600; t += 300) {
            auto r = engine.tick(ctx_at(t, true));
            for (const auto& id : r.delivered) {
                ++seen;
                engine.record_response(
                    id, seen < 3 ? AdviceResponse::rejected : AdviceResponse::accepted, t);
            }
        }
    }
    CHECK(engine.patterns()[0].consecutive_rejections == 0);
}

TEST_CASE("responses validate advice id, delivery and single terminal response") {
    OneAlternative provider;
    Engine engine(quiet_config(), {commute_pattern()}, &provider, nullptr);
    engine.tick(ctx_at(kMidnight + 8 * 3600, false)); // cached, undelivered
    REQUIRE(engine.advice_log().size() == 1);
    std::string id = engine.advice_log()[0].advice_id;
    CHECK_THROWS_AS(engine.record_response("nope", AdviceResponse::accepted, kMidnight),
                    DataError);
    CHECK_THROWS_AS(engine.record_response(id, AdviceResponse::accepted, kMidnight), DataError);
    auto r = engine.tick(ctx_at(kMidnight + 8 * 3600 + 300, true));
    REQUIRE(r.delivered.size() == 1);
    engine.record_response(id, AdviceResponse::rejected, kMidnight + 8 * 3600 + 300);
    CHECK_THROWS_AS(engine.record_response(id, AdviceResponse::accepted, kMidnight + 8 * 3600 + 600),
                    DataError);
}

TEST_CASE("out-of-order tick clocks are rejected") {
    OneAlternative provider;
    Engine engine(quiet_config(), {}, &provider, nullptr);
    engine.tick(ctx_at(kMidnight + 3600, false));
    CHECK_THROWS_AS(engine.tick(ctx_at(kMidnight + 3300, false)), DataError);
}

TEST_CASE("break advice needs screen, movement, the 30-minute gap and the model's consent") {
    Engine engine(breaks_config(), {}, nullptr, nullptr); // no model: always-eligible fallback
    CHECK(engine.interrupt_fallback_mode());
    int breaks = 0;
    for (TimePoint t = kMidnight + 10 * 3600; t < kMidnight + 12 * 3600; t += 300) {
        auto r = engine.tick(ctx_at(t, true));
        for (const auto& id : r.delivered) {
            const Advice* a = engine.find_advice(id);
            if (a->kind == AdviceKind::take_break) ++breaks;
        }
    }
    CHECK(breaks == 4); // one per 30-minute window over 2 h
}

TEST_CASE("no break advice while the screen is off or the phone is still") {
    Engine engine(breaks_config(), {}, nullptr, nullptr);
    for (TimePoint t = kMidnight + 10 * 3600; t < kMidnight + 12 * 3600; t += 300) {
        ContextSnapshot c = ctx_at(t, false);
        auto r = engine.tick(c);
        CHECK(r.delivered.empty());
    }
    // screen on but motionless (phone on the desk)
    for (TimePoint t = kMidnight + 12 * 3600; t < kMidnight + 13 * 3600; t += 300) {
        ContextSnapshot c = ctx_at(t, true);
        c.movement_recent.std = 0.0;
        c.in_use = true;
        auto r = engine.tick(c);
        CHECK(r.delivered.empty());
    }
}

TEST_CASE("train_interruptibility learns an hour-separable acceptance rule") {
    std::vector<std::pair<InterruptFeatures, bool>> history;
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        InterruptFeatures f;
        f.weekday = static_cast<int>(rng.uniform_int(0, 6));
        f.app_index = static_cast<double>(rng.uniform_int(0, 4));
        f.start_clock_hour = static_cast<int>(rng.uniform_int(8, 23));
        f.continuous_use_stats = Stats{60, 300, 900, 120, 4};
        f.same_app_count_stats = Stats{1, 2, 4, 1, 4};
        f.movement_stats = Stats{9.8, 9.81, 9.9, rng.uniform(0.01, 0.2), 60};
        history.push_back({f, f.start_clock_hour >= 20});
    }
    auto model = train_interruptibility(history, ml::ClassifierSpec::forest_default(), 3);
    REQUIRE(model.has_value());
    ml::Dataset ds;
    ds.feature_names = InterruptFeatures::feature_names();
    for (const auto& [f, accepted] : history) {
        ml::Row r;
        r.features = f.to_features();
        r.label = accepted ? 1 : 0;
        ds.rows.push_back(std::move(r));
    }
    auto metrics = ml::cross_validate(ds, ml::ClassifierSpec::forest_default(), 10, 3);
    CHECK(metrics.accuracy >= 0.9);
}

TEST_CASE("train_interruptibility falls back below 50 rows") {
    std::vector<std::pair<InterruptFeatures, bool>> history;
    for (int i = 0; i < 10; ++i) {
        InterruptFeatures f;
        f.start_clock_hour = i;
        history.push_back({f, i % 2 == 0});
    }
    CHECK_FALSE(train_interruptibility(history, ml::ClassifierSpec::forest_default(), 1)
                    .has_value());
}

namespace {

Engine bedtime_engine(const traj::AlternativesProvider* provider) {
    EngineConfig cfg;
    cfg.best_daily_steps = 1e9;
    cfg.best_bed_time_min = 330.0;    // 23:30
    cfg.break_movement_std_min = 1e9; // service three in isolation
    return Engine(cfg, {}, provider, nullptr);
}

std::string start_bedtime_session(Engine& engine) {
    // 22:35 inside the [22:30, 23:30] window, in use
    TimePoint t = kAnchor + 330 * 60 - 3300;
    auto r = engine.tick(ctx_at(t, true));
    REQUIRE(r.delivered.size() == 1);
    engine.record_response(r.delivered[0], AdviceResponse::accepted, t);
    return r.delivered[0];
}

} // namespace

TEST_CASE("ten quiet dark steps decay the bedtime volume to 0.9^10") {
    OneAlternative provider;
    Engine engine = bedtime_engine(&provider);
    start_bedtime_session(engine);
    TimePoint t = kAnchor + 330 * 60 - 3000;
    for (int i = 0; i < 10; ++i) {
        ContextSnapshot c = ctx_at(t, false);
        c.movement_recent.std = 0.001;
        c.ambient_light_lux = 0.5;
        engine.tick(c);
        t += 300;
    }
    REQUIRE(engine.bedtime_session().has_value());
    CHECK(engine.bedtime_session()->volume == doctest::Approx(std::pow(0.9, 10)));
}

TEST_CASE("a positive sleep signal ends the session with service termination") {
    OneAlternative provider;
    Engine engine = bedtime_engine(&provider);
    start_bedtime_session(engine);
    TimePoint t = kAnchor + 330 * 60 - 3000;
    for (int i = 0; i < 3; ++i) {
        ContextSnapshot c = ctx_at(t, false);
        c.movement_recent.std = 0.001;
        c.ambient_light_lux = 0.5;
        TickInputs inputs;
        inputs.sleep_signal_positive = i == 2;
        engine.tick(c, inputs);
        t += 300;
    }
    CHECK_FALSE(engine.bedtime_session().has_value());
    REQUIRE(engine.finished_sessions().size() == 1);
    CHECK(engine.finished_sessions()[0].termination == BedtimeSession::Termination::service);
}

TEST_CASE("a user stop terminates the session and leaves the volume untouched") {
    OneAlternative provider;
    Engine engine = bedtime_engine(&provider);
    start_bedtime_session(engine);
    engine.stop_bedtime_session(kAnchor + 330 * 60 - 3000);
    REQUIRE(engine.finished_sessions().size() == 1);
    CHECK(engine.finished_sessions()[0].termination == BedtimeSession::Termination::user);
    CHECK(engine.finished_sessions()[0].volume == doctest::Approx(1.0));
}

TEST_CASE("at most one bedtime advice per analysis day and volume never increases") {
    OneAlternative provider;
    Engine engine = bedtime_engine(&provider);
    int bedtime_advices = 0;
    double last_volume = 1.0;
    for (TimePoint t = kAnchor + 320 * 60; t <= kAnchor + 360 * 60; t += 300) {
        ContextSnapshot c = ctx_at(t, true);
        c.ambient_light_lux = 0.2;
        c.movement_recent.std = 0.0;
        auto r = engine.tick(c);
        for (const auto& id : r.generated) {
            if (engine.find_advice(id)->kind == AdviceKind::bedtime) {
                ++bedtime_advices;
                engine.record_response(id, AdviceResponse::accepted, t);
            }
        }
        if (engine.bedtime_session().has_value()) {
            CHECK(engine.bedtime_session()->volume <= last_volume + 1e-12);
            last_volume = engine.bedtime_session()->volume;
        }
    }
    CHECK(bedtime_advices == 1);
}

namespace {

struct ScriptedStream {
    std::vector<ContextSnapshot> ticks;
    // responses keyed by (tick index): respond to everything delivered there
    std::vector<AdviceResponse> response_for_tick;
};

ScriptedStream random_stream(std::uint64_t seed, int n_ticks) {
    ScriptedStream s;
    Rng rng(seed);
    TimePoint t = kMidnight + 6 * 3600;
    for (int i = 0; i < n_ticks; ++i) {
        bool in_use = rng.bernoulli(0.35);
        ContextSnapshot c = ctx_at(t, in_use);
        c.movement_recent.std = rng.uniform(0.0, 0.2);
        c.ambient_light_lux = rng.uniform(0.0, 300.0);
        s.ticks.push_back(c);
        s.response_for_tick.push_back(rng.bernoulli(0.5) ? AdviceResponse::accepted
                                                         : AdviceResponse::rejected);
        t += 300;
    }
    return s;
}

std::string run_stream(const ScriptedStream& s) {
    OneAlternative provider;
    EngineConfig cfg;
    cfg.best_daily_steps = 1e9;
    cfg.best_bed_time_min = 330.0;
    Engine engine(cfg, {commute_pattern()}, &provider, nullptr);
    for (std::size_t i = 0; i < s.ticks.size(); ++i) {
        auto r = engine.tick(s.ticks[i]);
        for (const auto& id : r.delivered) {
            // delivery only while in use
            CHECK(s.ticks[i].in_use);
            engine.record_response(id, s.response_for_tick[i], s.ticks[i].now);
        }
    }
    std::string log;
    for (const Advice& a : engine.advice_log()) log += a.to_jsonl() + "\n";
    return log;
}

} // namespace

TEST_CASE("replaying an identical tick stream reproduces the advice log exactly") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        ScriptedStream s = random_stream(seed, 400);
        CHECK(run_stream(s) == run_stream(s));
    }
}

TEST_CASE("state snapshot and restore resume mid-stream without divergence") {
    ScriptedStream s = random_stream(9, 300);
    OneAlternative provider;
    EngineConfig cfg;
    cfg.best_daily_steps = 1e9;
    cfg.best_bed_time_min = 330.0;

    Engine full(cfg, {commute_pattern()}, &provider, nullptr);
    Engine first_half(cfg, {commute_pattern()}, &provider, nullptr);
    auto drive = [&](Engine& e, std::size_t from, std::size_t to) {
        for (std::size_t i = from; i < to; ++i) {
            auto r = e.tick(s.ticks[i]);
            for (const auto& id : r.delivered) {
                e.record_response(id, s.response_for_tick[i], s.ticks[i].now);
            }
        }
    };
    drive(full, 0, s.ticks.size());
    drive(first_half, 0, 150);
    std::string snapshot = first_half.state_to_json();

    Engine resumed(cfg, {commute_pattern()}, &provider, nullptr);
    resumed.state_from_json(snapshot);
    drive(resumed, 150, s.ticks.size());

    CHECK(resumed.state_to_json() == full.state_to_json());
}
