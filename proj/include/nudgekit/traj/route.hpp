#pragma once

#include "nudgekit/aggregate.hpp"
#include "nudgekit/geo.hpp"
#include "nudgekit/time.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nudgekit::traj {

struct TrackPoint {
    TimePoint t = 0;
    double lat = 0.0;
    double lon = 0.0;
};

struct PoiCluster {
    std::string poi_id;
    LatLon centroid; // arithmetic mean of member points
    int member_count = 0;
};

struct Route {
    std::vector<TrackPoint> points; // chronological, >= 2
    DayId day_id = 0;
    std::string start_poi; // empty when severed (e.g. at a GPS glitch)
    std::string end_poi;
    double steps = 0.0; // attached from feature records afterwards

    TimePoint begin() const { return points.front().t; }
    TimePoint end() const { return points.back().t; }
    double path_length_m() const;
};

struct SegmentConfig {
    double cluster_radius_m = 10.0;  // sequential points joining a POI cluster
    double jump_filter_m = 150.0;    // consecutive gap that severs a segment
    double min_dwell_s = 300.0;      // cluster dwell needed to qualify as a POI
};

struct SegmentResult {
    std::vector<Route> routes;
    std::vector<PoiCluster> pois;
};

// Sequential clustering into POIs, segments between consecutive POIs, and a
// 150 m jump filter inside each segment. Weekend fixes are the caller's
// concern; this operates on one (weekday) day of fixes.
SegmentResult segment_routes(std::span<const TrackPoint> fixes, DayId day,
                             const SegmentConfig& cfg = {});

// Sum of per-slot steps over the route timespan, partial slots weighted by
// overlap.
void attach_steps(std::vector<Route>& routes, std::span<const FeatureRecord> records);

} // namespace nudgekit::traj
