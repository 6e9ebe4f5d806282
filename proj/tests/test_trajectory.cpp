#include "nudgekit/errors.hpp"
#include "nudgekit/rng.hpp"
#include "nudgekit/traj/pattern.hpp"

#include <doctest.h>

#include <cmath>

using namespace nudgekit;
using namespace nudgekit::traj;

namespace {

constexpr DayId kMonday = 19786; // 2024-03-04
constexpr double kMPerDegLat = 111320.0;

TrackPoint pt(TimePoint t, double north_m, double east_m) {
    constexpr double lat0 = 51.45, lon0 = -2.60;
    double m_per_deg_lon = kMPerDegLat * std::cos(lat0 * 0.017453292519943295);
    return {t, lat0 + north_m / kMPerDegLat, lon0 + east_m / m_per_deg_lon};
}

// streets named by 200 m east-west bands
class BandProvider : public StreetNameProvider {
public:
    std::optional<std::string> street_name(double /*lat*/, double lon) const override {
        double east_m = (lon + 2.60) * kMPerDegLat * std::cos(51.45 * 0.017453292519943295);
        int band = static_cast<int>(std::floor(east_m / 200.0));
        return std::string(1, static_cast<char>('A' + ((band % 26) + 26) % 26));
    }
};

class FailingProvider : public StreetNameProvider {
public:
    std::optional<std::string> street_name(double, double) const override { return std::nullopt; }
};

} // namespace

TEST_CASE("segmentation finds home and work POIs and the walk between them") {
    std::vector<TrackPoint> fixes;
    TimePoint t = anchor_of_day(kMonday) + 14 * 3600;
    Rng rng(3);
    // 30 fixes jittering within 8 m at home, one per minute
    for (int i = 0; i < 30; ++i) {
        fixes.push_back(pt(t, rng.uniform(-4, 4), rng.uniform(-4, 4)));
        t += 60;
    }
    // a 1 km walk east with 5 m spaced fixes
    for (int i = 0; i < 200; ++i) {
        fixes.push_back(pt(t, 0.0, 5.0 * (i + 1)));
        t += 4;
    }
    // 30 fixes at work
    for (int i = 0; i < 30; ++i) {
        fixes.push_back(pt(t, rng.uniform(-4, 4), 1000.0 + rng.uniform(-4, 4)));
        t += 60;
    }
    auto seg = segment_routes(fixes, kMonday);
    REQUIRE(seg.pois.size() == 2);
    REQUIRE(seg.routes.size() == 1);
    CHECK(seg.routes[0].start_poi == seg.pois[0].poi_id);
    CHECK(seg.routes[0].end_poi == seg.pois[1].poi_id);
    CHECK(seg.routes[0].path_length_m() > 900.0);
    // no consecutive pair beyond the jump filter
    for (std::size_t i = 1; i < seg.routes[0].points.size(); ++i) {
        const auto& a = seg.routes[0].points[i - 1];
        const auto& b = seg.routes[0].points[i];
        CHECK(haversine_m({a.lat, a.lon}, {b.lat, b.lon}) <= 150.0);
    }
}

TEST_CASE("a 500 m GPS glitch splits the walk at the jump") {
    std::vector<TrackPoint> fixes;
    TimePoint t = anchor_of_day(kMonday) + 14 * 3600;
    for (int i = 0; i < 10; ++i) {
        fixes.push_back(pt(t, 0.0, 0.0));
        t += 60;
    }
    for (int i = 0; i < 10; ++i) {
        fixes.push_back(pt(t, 0.0, 80.0 * (i + 1)));
        t += 60;
    }
    // glitch: jump 500 m north, then continue the walk
    for (int i = 0; i < 10; ++i) {
        fixes.push_back(pt(t, 500.0, 800.0 + 80.0 * (i + 1)));
        t += 60;
    }
    for (int i = 0; i < 10; ++i) {
        fixes.push_back(pt(t, 500.0 + (i % 3), 1600.0 + (i % 2)));
        t += 60;
    }
    auto seg = segment_routes(fixes, kMonday);
    REQUIRE(seg.pois.size() == 2);
    REQUIRE(seg.routes.size() == 2);
    CHECK(seg.routes[0].end_poi.empty());   // severed at the glitch
    CHECK(seg.routes[1].start_poi.empty());
}

TEST_CASE("all fixes within 10 m form one POI and no routes") {
    std::vector<TrackPoint> fixes;
    TimePoint t = anchor_of_day(kMonday) + 10 * 3600;
    Rng rng(5);
    for (int i = 0; i < 30; ++i) {
        fixes.push_back(pt(t, rng.uniform(-3, 3), rng.uniform(-3, 3)));
        t += 60;
    }
    auto seg = segment_routes(fixes, kMonday);
    CHECK(seg.pois.size() == 1);
    CHECK(seg.routes.empty());
}

TEST_CASE("POI centroids equal the arithmetic mean of member points") {
    std::vector<TrackPoint> fixes;
    TimePoint t = anchor_of_day(kMonday) + 10 * 3600;
    double offsets[] = {-3.0, -1.0, 1.0, 3.0};
    double lat_sum = 0, lon_sum = 0;
    for (int i = 0; i < 8; ++i) {
        TrackPoint p = pt(t, offsets[i % 4], offsets[(i + 1) % 4]);
        lat_sum += p.lat;
        lon_sum += p.lon;
        fixes.push_back(p);
        t += 120;
    }
    auto seg = segment_routes(fixes, kMonday);
    REQUIRE(seg.pois.size() == 1);
    CHECK(seg.pois[0].centroid.lat == doctest::Approx(lat_sum / 8).epsilon(1e-12));
    CHECK(seg.pois[0].centroid.lon == doctest::Approx(lon_sum / 8).epsilon(1e-12));
    CHECK(seg.pois[0].member_count == 8);
}

TEST_CASE("route_string dedupes consecutive street names only") {
    BandProvider bands;
    Route route;
    route.day_id = kMonday;
    TimePoint t = anchor_of_day(kMonday);
    // bands: A = [0,200), B = [200,400), C = [400,600)
    for (double east : {10.0, 60.0, 110.0, 210.0, 260.0, 410.0}) {
        route.points.push_back(pt(t, 0.0, east));
        t += 60;
    }
    CHECK(route_string(route, bands) == "A|B|C");

    Route re;
    re.day_id = kMonday;
    for (double east : {10.0, 210.0, 10.0}) {
        re.points.push_back(pt(t, 0.0, east));
        t += 60;
    }
    CHECK(route_string(re, bands) == "A|B|A");

    Route single;
    single.day_id = kMonday;
    single.points = {pt(t, 0.0, 10.0), pt(t + 60, 0.0, 20.0)};
    CHECK(route_string(single, bands) == "A");
}

TEST_CASE("route_string fails only when every point fails to resolve") {
    FailingProvider none;
    Route route;
    route.points = {pt(0, 0, 0), pt(60, 0, 5)};
    CHECK_THROWS_AS(route_string(route, none), DataError);
}

TEST_CASE("token edit distance: identity, insertions and the kitten sanity fixture") {
    CHECK(edit_distance_tokens("A|B|C", "A|B|C") == 0);
    CHECK(edit_distance_tokens("", "A|B|C") == 3);
    CHECK(edit_distance_chars("kitten", "sitting") == 3);
}

namespace {

// plain full-matrix DP oracle over tokens
int levenshtein_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<int>> d(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            int sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
        }
    }
    return d[a.size()][b.size()];
}

std::string random_streets(Rng& rng, int max_len) {
    static const char* names[] = {"Alder", "Birch", "Cedar", "Dogwood", "Elm", "Fir"};
    int n = static_cast<int>(rng.uniform_int(0, max_len));
    std::string s;
    for (int i = 0; i < n; ++i) {
        if (!s.empty()) s.push_back('|');
        s += names[rng.uniform_int(0, 5)];
    }
    return s;
}

} // namespace

TEST_CASE("edit distance is a metric over 500 random token-string triples") {
    Rng rng(71);
    for (int trial = 0; trial < 500; ++trial) {
        std::string a = random_streets(rng, 8);
        std::string b = random_streets(rng, 8);
        std::string c = random_streets(rng, 8);
        int ab = edit_distance_tokens(a, b);
        int ba = edit_distance_tokens(b, a);
        int ac = edit_distance_tokens(a, c);
        int cb = edit_distance_tokens(c, b);
        CHECK(ab == ba);                                             // symmetry
        CHECK((ab == 0) == (split_street_string(a) == split_street_string(b)));
        CHECK(ab <= ac + cb);                                        // triangle
        CHECK(ab == levenshtein_oracle(split_street_string(a), split_street_string(b)));
    }
}

namespace {

MinedRoute mined(DayId day, TimePoint start, const std::string& streets, double steps,
                 double length_m, const std::string& from = "home", const std::string& to = "work") {
    MinedRoute m;
    m.route.day_id = day;
    m.route.start_poi = from;
    m.route.end_poi = to;
    m.route.steps = steps;
    // two points spanning the right duration/length
    m.route.points.push_back({start, 51.45, -2.60});
    m.route.points.push_back(
        {start + static_cast<TimePoint>(length_m / 1.3), 51.45 + length_m / 111320.0, -2.60});
    m.street_string = streets;
    return m;
}

} // namespace

TEST_CASE("ten identical weekday commutes mine one pattern with occurrence 10") {
    std::vector<MinedRoute> routes;
    int added = 0;
    for (DayId d = kMonday; added < 10; ++d) {
        if (is_weekend(d)) continue;
        TimePoint start = static_cast<TimePoint>(d) * kSecondsPerDay + 8 * 3600;
        routes.push_back(mined(d, start, "Avenue 2|Street 11|Avenue 8", 1250, 1000));
        ++added;
    }
    auto patterns = mine_patterns(routes);
    REQUIRE(patterns.size() == 1);
    CHECK(patterns[0].occurrences == 10);
    CHECK(patterns[0].street_string == "Avenue 2|Street 11|Avenue 8");
    CHECK(patterns[0].avg_steps == doctest::Approx(1250));
    CHECK(patterns[0].start_clock_min == doctest::Approx(480.0).epsilon(0.01));
    CHECK(patterns[0].weekdays.count(5) == 0);
    CHECK(patterns[0].weekdays.count(6) == 0);
    CHECK(patterns[0].avg_speed_mps > 0.0);
}

TEST_CASE("a one-street detour of six streets still groups under the default threshold") {
    std::vector<MinedRoute> routes;
    TimePoint start = static_cast<TimePoint>(kMonday) * kSecondsPerDay + 8 * 3600;
    routes.push_back(mined(kMonday, start, "A|B|C|D|E|F", 1200, 1000));
    routes.push_back(
        mined(kMonday + 1, start + kSecondsPerDay, "A|B|X|D|E|F", 1210, 1010));
    auto patterns = mine_patterns(routes);
    REQUIRE(patterns.size() == 1); // distance 1 <= ceil(0.2*6) = 2
    CHECK(patterns[0].occurrences == 2);
}

TEST_CASE("two disjoint routes make two singleton groups and no pattern") {
    std::vector<MinedRoute> routes;
    TimePoint start = static_cast<TimePoint>(kMonday) * kSecondsPerDay + 8 * 3600;
    routes.push_back(mined(kMonday, start, "A|B|C", 1200, 1000));
    routes.push_back(mined(kMonday + 1, start + kSecondsPerDay, "X|Y|Z", 900, 800));
    CHECK(mine_patterns(routes).empty());
}

TEST_CASE("mining is invariant to route input order") {
    std::vector<MinedRoute> routes;
    Rng rng(9);
    int added = 0;
    for (DayId d = kMonday; added < 8; ++d) {
        if (is_weekend(d)) continue;
        TimePoint start = static_cast<TimePoint>(d) * kSecondsPerDay + 8 * 3600 +
                          rng.uniform_int(-600, 600);
        routes.push_back(mined(d, start, added % 2 ? "A|B|C" : "P|Q|R|S", 1000 + added, 900));
        ++added;
    }
    auto a = mine_patterns(routes);
    std::vector<MinedRoute> reversed(routes.rbegin(), routes.rend());
    auto b = mine_patterns(reversed);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].street_string == b[i].street_string);
        CHECK(a[i].occurrences == b[i].occurrences);
        CHECK(a[i].avg_steps == doctest::Approx(b[i].avg_steps));
    }
}

namespace {

class FixedAlternatives : public AlternativesProvider {
public:
    std::vector<RouteAlternative> alts;
    std::vector<RouteAlternative> alternatives(const std::string&,
                                               const std::string&) const override {
        return alts;
    }
};

class ThrowingAlternatives : public AlternativesProvider {
public:
    std::vector<RouteAlternative> alternatives(const std::string&,
                                               const std::string&) const override {
        throw DataError("provider down");
    }
};

TrajectoryPattern pattern_1000m_1250steps() {
    TrajectoryPattern p;
    p.pattern_id = "pat0";
    p.start_poi = "home";
    p.end_poi = "work";
    p.avg_steps = 1250;
    p.map_distance_m = 1000;
    p.avg_speed_mps = 1.3;
    p.occurrences = 10;
    return p;
}

} // namespace

TEST_CASE("the gentlest qualifying alternative is proposed: 1100 m -> 1375 steps") {
    auto p = pattern_1000m_1250steps();
    FixedAlternatives provider;
    provider.alts = {{"A|B", 1100.0}, {"A|C", 1400.0}};
    auto advice = propose_alternative(p, provider, 1e9, 0.0);
    REQUIRE(advice.has_value());
    CHECK(advice->alt_distance_m == doctest::Approx(1100.0));
    CHECK(advice->est_steps == doctest::Approx(1375.0));
}

TEST_CASE("the closest-to-gap strategy picks the largest qualifying estimate") {
    auto p = pattern_1000m_1250steps();
    FixedAlternatives provider;
    provider.alts = {{"A|B", 1100.0}, {"A|C", 1400.0}};
    ProposalConfig cfg;
    cfg.strategy = AlternativeStrategy::closest_to_gap;
    auto advice = propose_alternative(p, provider, 1e9, 0.0, cfg);
    REQUIRE(advice.has_value());
    CHECK(advice->alt_distance_m == doctest::Approx(1400.0));
}

TEST_CASE("four consecutive rejections suppress proposals for good") {
    auto p = pattern_1000m_1250steps();
    p.consecutive_rejections = 4;
    FixedAlternatives provider;
    provider.alts = {{"A|B", 1100.0}};
    CHECK_FALSE(propose_alternative(p, provider, 1e9, 0.0).has_value());
}

TEST_CASE("alternatives shorter than the pattern are never advised") {
    auto p = pattern_1000m_1250steps();
    FixedAlternatives provider;
    provider.alts = {{"A|B", 900.0}, {"A|C", 1000.0}};
    CHECK_FALSE(propose_alternative(p, provider, 1e9, 0.0).has_value());
}

TEST_CASE("the remaining daily-step gap caps the proposal") {
    auto p = pattern_1000m_1250steps();
    FixedAlternatives provider;
    provider.alts = {{"A|B", 1100.0}}; // est 1375, 125 over the pattern
    // best 3000, 1700 already walked: gap = 3000-1700-1250 = 50 < 125
    CHECK_FALSE(propose_alternative(p, provider, 3000.0, 1700.0).has_value());
    // a looser day allows it
    CHECK(propose_alternative(p, provider, 3000.0, 1500.0).has_value());
}

TEST_CASE("provider failure yields no advice and a warning") {
    auto p = pattern_1000m_1250steps();
    ThrowingAlternatives provider;
    std::vector<std::string> warnings;
    CHECK_FALSE(propose_alternative(p, provider, 1e9, 0.0, {}, &warnings).has_value());
    CHECK(warnings.size() == 1);
}

TEST_CASE("proposals never return estimates at or below the pattern and respect suppression") {
    Rng rng(83);
    for (int trial = 0; trial < 200; ++trial) {
        auto p = pattern_1000m_1250steps();
        p.consecutive_rejections = static_cast<int>(rng.uniform_int(0, 6));
        FixedAlternatives provider;
        int n = static_cast<int>(rng.uniform_int(0, 4));
        for (int i = 0; i < n; ++i) {
            provider.alts.push_back({"S" + std::to_string(i), rng.uniform(500, 2500)});
        }
        auto advice = propose_alternative(p, provider, rng.uniform(1000, 4000),
                                          rng.uniform(0, 2000));
        if (p.consecutive_rejections > 3) {
            CHECK_FALSE(advice.has_value());
        } else if (advice) {
            CHECK(advice->est_steps > p.avg_steps);
        }
    }
}

TEST_CASE("pattern json round-trips") {
    auto p = pattern_1000m_1250steps();
    p.weekdays = {0, 1, 4};
    p.street_string = "A|B|C";
    p.consecutive_rejections = 2;
    auto back = TrajectoryPattern::from_json(p.to_json());
    CHECK(back.pattern_id == p.pattern_id);
    CHECK(back.weekdays == p.weekdays);
    CHECK(back.avg_steps == doctest::Approx(p.avg_steps));
    CHECK(back.consecutive_rejections == 2);
    CHECK(back.street_string == "A|B|C");
}
