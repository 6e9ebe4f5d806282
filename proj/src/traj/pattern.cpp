#include "nudgekit/traj/pattern.hpp"

#include "nudgekit/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nudgekit::traj {

using nlohmann::json;

std::string TrajectoryPattern::to_json() const {
    json j;
    j["pattern_id"] = pattern_id;
    j["start_poi"] = start_poi;
    j["end_poi"] = end_poi;
    j["weekdays"] = std::vector<int>(weekdays.begin(), weekdays.end());
    j["start_clock_min"] = start_clock_min;
    j["end_clock_min"] = end_clock_min;
    j["avg_steps"] = avg_steps;
    j["avg_speed_mps"] = avg_speed_mps;
    j["map_distance_m"] = map_distance_m;
    j["street_string"] = street_string;
    j["occurrences"] = occurrences;
    j["consecutive_rejections"] = consecutive_rejections;
    return j.dump();
}

TrajectoryPattern TrajectoryPattern::from_json(const std::string& text) {
    json j = json::parse(text);
    TrajectoryPattern p;
    p.pattern_id = j.at("pattern_id").get<std::string>();
    p.start_poi = j.at("start_poi").get<std::string>();
    p.end_poi = j.at("end_poi").get<std::string>();
    for (int w : j.at("weekdays")) p.weekdays.insert(w);
    p.start_clock_min = j.at("start_clock_min").get<double>();
    p.end_clock_min = j.at("end_clock_min").get<double>();
    p.avg_steps = j.at("avg_steps").get<double>();
    p.avg_speed_mps = j.at("avg_speed_mps").get<double>();
    p.map_distance_m = j.at("map_distance_m").get<double>();
    p.street_string = j.at("street_string").get<std::string>();
    p.occurrences = j.at("occurrences").get<int>();
    p.consecutive_rejections = j.at("consecutive_rejections").get<int>();
    return p;
}

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

double circular_mean_minutes(const std::vector<double>& minutes) {
    constexpr double kTau = 6.283185307179586;
    double s = 0.0, c = 0.0;
    for (double m : minutes) {
        double a = m / 1440.0 * kTau;
        s += std::sin(a);
        c += std::cos(a);
    }
    double a = std::atan2(s, c);
    double m = a / kTau * 1440.0;
    if (m < 0) m += 1440.0;
    return m;
}

} // namespace

std::vector<TrajectoryPattern> mine_patterns(std::vector<MinedRoute> routes,
                                             const MiningConfig& cfg) {
    // canonical order: input order must never matter
    std::sort(routes.begin(), routes.end(), [](const MinedRoute& a, const MinedRoute& b) {
        if (a.route.day_id != b.route.day_id) return a.route.day_id < b.route.day_id;
        if (a.route.points.front().t != b.route.points.front().t) {
            return a.route.points.front().t < b.route.points.front().t;
        }
        return a.street_string < b.street_string;
    });

    const std::size_t n = routes.size();
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (same_trajectory(routes[i].street_string, routes[j].street_string,
                                cfg.similarity)) {
                uf.unite(i, j);
            }
        }
    }

    std::vector<std::vector<std::size_t>> groups(n);
    for (std::size_t i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);

    std::vector<TrajectoryPattern> out;
    for (std::size_t g = 0; g < n; ++g) {
        const auto& members = groups[g];
        if (static_cast<int>(members.size()) < cfg.min_occurrence) continue;

        // medoid: member with the smallest total token distance to the rest
        std::size_t medoid = members[0];
        long best_total = -1;
        for (std::size_t i : members) {
            long total = 0;
            for (std::size_t j : members) {
                if (i != j) {
                    total += edit_distance_tokens(routes[i].street_string,
                                                  routes[j].street_string);
                }
            }
            if (best_total < 0 || total < best_total) {
                best_total = total;
                medoid = i;
            }
        }

        TrajectoryPattern p;
        p.pattern_id = "pat" + std::to_string(out.size());
        p.street_string = routes[medoid].street_string;
        p.start_poi = routes[medoid].route.start_poi;
        p.end_poi = routes[medoid].route.end_poi;
        p.occurrences = static_cast<int>(members.size());

        std::vector<double> starts, ends;
        double steps = 0.0, speed = 0.0, dist = 0.0;
        for (std::size_t i : members) {
            const Route& r = routes[i].route;
            p.weekdays.insert(weekday_of(r.day_id));
            starts.push_back(minutes_of_day(r.begin()));
            ends.push_back(minutes_of_day(r.end()));
            steps += r.steps;
            double len = r.path_length_m();
            dist += len;
            double dur = static_cast<double>(r.end() - r.begin());
            if (dur > 0) speed += len / dur;
        }
        double m = static_cast<double>(members.size());
        p.start_clock_min = circular_mean_minutes(starts);
        p.end_clock_min = circular_mean_minutes(ends);
        p.avg_steps = steps / m;
        p.avg_speed_mps = speed / m;
        p.map_distance_m = dist / m;
        out.push_back(std::move(p));
    }
    return out;
}

std::optional<RouteAdvice> propose_alternative(const TrajectoryPattern& pattern,
                                               const AlternativesProvider& provider,
                                               double best_daily_steps,
                                               double steps_so_far_today,
                                               const ProposalConfig& cfg,
                                               std::vector<std::string>* warnings) {
    if (pattern.consecutive_rejections > cfg.max_consecutive_rejections) return std::nullopt;
    double density = pattern.steps_per_meter();
    if (density <= 0.0) return std::nullopt;

    std::vector<RouteAlternative> alts;
    try {
        alts = provider.alternatives(pattern.start_poi, pattern.end_poi);
    } catch (const std::exception& e) {
        if (warnings) {
            warnings->push_back("alternatives provider failed for " + pattern.pattern_id + ": " +
                                e.what());
        }
        return std::nullopt;
    }

    const double gap = std::max(0.0, best_daily_steps - steps_so_far_today - pattern.avg_steps);
    const double cap = pattern.avg_steps + gap;

    std::optional<RouteAdvice> best;
    for (const RouteAlternative& alt : alts) {
        double est = alt.distance_m * density;
        if (est <= pattern.avg_steps || est > cap) continue;
        bool better = false;
        if (!best) {
            better = true;
        } else if (cfg.strategy == AlternativeStrategy::smallest_increase) {
            better = est < best->est_steps ||
                     (est == best->est_steps && alt.street_string < best->street_string);
        } else { // closest_to_gap: largest qualifying estimate
            better = est > best->est_steps ||
                     (est == best->est_steps && alt.street_string < best->street_string);
        }
        if (better) {
            best = RouteAdvice{pattern.pattern_id, alt.street_string, alt.distance_m, est};
        }
    }
    return best;
}

} // namespace nudgekit::traj
