#pragma once

#include "nudgekit/traj/similarity.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace nudgekit::traj {

struct TrajectoryPattern {
    std::string pattern_id;
    std::string start_poi;
    std::string end_poi;
    std::set<int> weekdays;     // 0=Mon .. 4=Fri; weekends never enter mining
    double start_clock_min = 0; // circular mean, minutes of day
    double end_clock_min = 0;
    double avg_steps = 0.0;
    double avg_speed_mps = 0.0;
    double map_distance_m = 0.0;
    std::string street_string; // medoid member's string
    int occurrences = 0;
    int consecutive_rejections = 0;

    std::string to_json() const;
    static TrajectoryPattern from_json(const std::string& text);
    double steps_per_meter() const { return map_distance_m > 0 ? avg_steps / map_distance_m : 0; }
};

// Single-linkage grouping of routes under the same-trajectory predicate;
// groups with at least `min_occurrence` members become patterns. Routes are
// canonically sorted first, so input order never matters.
struct MiningConfig {
    SimilarityConfig similarity;
    int min_occurrence = 2;
};

struct MinedRoute {
    Route route;
    std::string street_string;
};

std::vector<TrajectoryPattern> mine_patterns(std::vector<MinedRoute> routes,
                                             const MiningConfig& cfg = {});

struct RouteAlternative {
    std::string street_string;
    double distance_m = 0.0;
};

class AlternativesProvider {
public:
    virtual ~AlternativesProvider() = default;
    virtual std::vector<RouteAlternative> alternatives(const std::string& start_poi,
                                                       const std::string& end_poi) const = 0;
};

enum class AlternativeStrategy { smallest_increase, closest_to_gap };

struct RouteAdvice {
    std::string pattern_id;
    std::string street_string;
    double alt_distance_m = 0.0;
    double est_steps = 0.0;
};

struct ProposalConfig {
    AlternativeStrategy strategy = AlternativeStrategy::smallest_increase;
    int max_consecutive_rejections = 3; // a 4th rejection suppresses for good
};

// Estimates steps for each alternative from the pattern's steps-per-metre
// density, keeps those costing more steps than the pattern but still within
// the remaining daily-step gap, and picks per strategy. Absent when the
// pattern is suppressed or no candidate qualifies.
std::optional<RouteAdvice> propose_alternative(const TrajectoryPattern& pattern,
                                               const AlternativesProvider& provider,
                                               double best_daily_steps,
                                               double steps_so_far_today,
                                               const ProposalConfig& cfg = {},
                                               std::vector<std::string>* warnings = nullptr);

} // namespace nudgekit::traj
