#include "nudgekit/traj/route.hpp"

#include <algorithm>
#include <cmath>

namespace nudgekit::traj {

double Route::path_length_m() const {
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        total += haversine_m({points[i - 1].lat, points[i - 1].lon},
                             {points[i].lat, points[i].lon});
    }
    return total;
}

namespace {

struct RunningCluster {
    double lat_sum = 0.0, lon_sum = 0.0;
    std::size_t first = 0, last = 0; // index range into fixes, inclusive
    int n = 0;

    LatLon centroid() const { return {lat_sum / n, lon_sum / n}; }

    void add(const TrackPoint& p, std::size_t i) {
        lat_sum += p.lat;
        lon_sum += p.lon;
        if (n == 0) first = i;
        last = i;
        ++n;
    }
};

} // namespace

SegmentResult segment_routes(std::span<const TrackPoint> fixes, DayId day,
                             const SegmentConfig& cfg) {
    SegmentResult out;
    if (fixes.size() < 2) return out;

    // Sequential clusters: a fix joins while it stays within the cluster
    // radius of the running centroid. Clusters dwelling long enough become
    // POIs; the rest dissolve back into the path.
    struct PoiSpan {
        std::size_t first, last;
        LatLon centroid;
        std::string id;
    };
    std::vector<PoiSpan> poi_spans;

    RunningCluster cur;
    cur.add(fixes[0], 0);
    auto flush = [&](const RunningCluster& c) {
        double dwell = static_cast<double>(fixes[c.last].t - fixes[c.first].t);
        if (c.n >= 2 && dwell >= cfg.min_dwell_s) {
            PoiSpan span{c.first, c.last, c.centroid(), ""};
            span.id = "poi" + std::to_string(out.pois.size());
            out.pois.push_back({span.id, span.centroid, c.n});
            poi_spans.push_back(std::move(span));
        }
    };
    for (std::size_t i = 1; i < fixes.size(); ++i) {
        LatLon p{fixes[i].lat, fixes[i].lon};
        if (haversine_m(cur.centroid(), p) <= cfg.cluster_radius_m) {
            cur.add(fixes[i], i);
        } else {
            flush(cur);
            cur = RunningCluster{};
            cur.add(fixes[i], i);
        }
    }
    flush(cur);

    // Segments between consecutive POIs: from the last point of one cluster
    // to the first point of the next.
    auto emit_segment = [&](std::size_t from, std::size_t to, const std::string& start_poi,
                            const std::string& end_poi) {
        if (to <= from) return;
        // split at jumps over the filter threshold
        std::size_t seg_start = from;
        std::string seg_start_poi = start_poi;
        for (std::size_t i = from + 1; i <= to; ++i) {
            double d = haversine_m({fixes[i - 1].lat, fixes[i - 1].lon},
                                   {fixes[i].lat, fixes[i].lon});
            bool last = i == to;
            if (d > cfg.jump_filter_m) {
                if (i - 1 > seg_start) {
                    Route r;
                    r.day_id = day;
                    r.start_poi = seg_start_poi;
                    for (std::size_t k = seg_start; k <= i - 1; ++k) r.points.push_back(fixes[k]);
                    out.routes.push_back(std::move(r));
                }
                seg_start = i;
                seg_start_poi.clear(); // severed: no POI on this side
            }
            if (last && i > seg_start) {
                Route r;
                r.day_id = day;
                r.start_poi = seg_start_poi;
                r.end_poi = end_poi;
                for (std::size_t k = seg_start; k <= i; ++k) r.points.push_back(fixes[k]);
                out.routes.push_back(std::move(r));
            }
        }
    };

    if (poi_spans.empty()) return out; // nothing to break the day into
    for (std::size_t s = 0; s + 1 < poi_spans.size(); ++s) {
        emit_segment(poi_spans[s].last, poi_spans[s + 1].first, poi_spans[s].id,
                     poi_spans[s + 1].id);
    }
    return out;
}

void attach_steps(std::vector<Route>& routes, std::span<const FeatureRecord> records) {
    for (Route& r : routes) {
        double total = 0.0;
        for (const FeatureRecord& rec : records) {
            TimePoint lo = std::max(rec.slot_start, r.begin());
            TimePoint hi = std::min(rec.slot_start + kSlotSeconds, r.end());
            if (hi > lo) {
                total += rec.steps * static_cast<double>(hi - lo) /
                         static_cast<double>(kSlotSeconds);
            }
        }
        r.steps = total;
    }
}

} // namespace nudgekit::traj
