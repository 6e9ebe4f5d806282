#pragma once

#include "nudgekit/geo.hpp"
#include "nudgekit/traj/pattern.hpp"
#include "nudgekit/traj/similarity.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nudgekit::sim {

struct GridNode {
    int col = 0;
    int row = 0;
    auto operator<=>(const GridNode&) const = default;
};

struct GridPath {
    std::vector<GridNode> nodes;
    double length_m = 0.0;      // exact grid length (edges * edge_m)
    std::string street_string;  // consecutively deduplicated street names
};

// Manhattan street network with 100 m edges. Horizontal streets are
// "Avenue <row>", vertical ones "Street <col>". Doubles as the offline
// street-name and alternative-route provider: shortest paths go
// horizontal-first, and the k alternatives overshoot the target column by
// 1..k blocks (adding 2..2k edges).
class GridWorld : public traj::StreetNameProvider, public traj::AlternativesProvider {
public:
    struct Config {
        int width = 20;
        int height = 20;
        double edge_m = 100.0;
        double base_lat = 51.45;
        double base_lon = -2.60;
        int k_alternatives = 3;
        double poi_offset_m = 20.0; // POI anchors sit this far along a row edge
    };

    GridWorld();
    explicit GridWorld(const Config& cfg);

    const Config& config() const { return cfg_; }

    LatLon node_latlon(const GridNode& n) const;
    // POI anchor position: the node corner nudged along its row so that
    // stationary fixes resolve to an unambiguous street.
    LatLon poi_position(const GridNode& n) const;
    GridNode nearest_node(const LatLon& p) const;

    std::string row_street(int row) const { return "Avenue " + std::to_string(row); }
    std::string col_street(int col) const { return "Street " + std::to_string(col); }

    // traj::StreetNameProvider
    std::optional<std::string> street_name(double lat, double lon) const override;

    GridPath shortest_path(const GridNode& from, const GridNode& to) const;
    std::vector<GridPath> alternative_paths(const GridNode& from, const GridNode& to) const;

    // traj::AlternativesProvider; POI ids must be bound to nodes first.
    std::vector<traj::RouteAlternative> alternatives(const std::string& start_poi,
                                                     const std::string& end_poi) const override;
    void bind_poi(const std::string& poi_id, const GridNode& node);
    void bind_poi(const std::string& poi_id, const LatLon& near);
    std::optional<GridNode> poi_node(const std::string& poi_id) const;

    // Resolve a previously returned alternative back to its node path.
    std::optional<GridPath> find_alternative(const std::string& start_poi,
                                             const std::string& end_poi,
                                             const std::string& street_string) const;

    // metres per degree at the grid origin
    double m_per_deg_lat() const { return 111320.0; }
    double m_per_deg_lon() const;

private:
    GridPath path_from_nodes(std::vector<GridNode> nodes) const;
    Config cfg_;
    std::map<std::string, GridNode> poi_nodes_;
};

} // namespace nudgekit::sim
