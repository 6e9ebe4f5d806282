#include "nudgekit/sim/world.hpp"

#include "nudgekit/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nudgekit::sim {

GridWorld::GridWorld() : GridWorld(Config{}) {}

GridWorld::GridWorld(const Config& cfg) : cfg_(cfg) {
    if (cfg_.width < 2 || cfg_.height < 2) throw ConfigError("grid must be at least 2x2");
}

double GridWorld::m_per_deg_lon() const {
    return 111320.0 * std::cos(cfg_.base_lat * 0.017453292519943295);
}

LatLon GridWorld::node_latlon(const GridNode& n) const {
    return {cfg_.base_lat + n.row * cfg_.edge_m / m_per_deg_lat(),
            cfg_.base_lon + n.col * cfg_.edge_m / m_per_deg_lon()};
}

LatLon GridWorld::poi_position(const GridNode& n) const {
    LatLon p = node_latlon(n);
    double off = cfg_.poi_offset_m;
    if (n.col + 1 >= cfg_.width) off = -off; // stay inside the grid
    p.lon += off / m_per_deg_lon();
    return p;
}

GridNode GridWorld::nearest_node(const LatLon& p) const {
    double x = (p.lon - cfg_.base_lon) * m_per_deg_lon() / cfg_.edge_m;
    double y = (p.lat - cfg_.base_lat) * m_per_deg_lat() / cfg_.edge_m;
    GridNode n{static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
    n.col = std::clamp(n.col, 0, cfg_.width - 1);
    n.row = std::clamp(n.row, 0, cfg_.height - 1);
    return n;
}

std::optional<std::string> GridWorld::street_name(double lat, double lon) const {
    double x = (lon - cfg_.base_lon) * m_per_deg_lon() / cfg_.edge_m;
    double y = (lat - cfg_.base_lat) * m_per_deg_lat() / cfg_.edge_m;
    if (x < -0.5 || x > cfg_.width - 0.5 || y < -0.5 || y > cfg_.height - 0.5) {
        return std::nullopt; // off the map
    }
    int col = std::clamp(static_cast<int>(std::lround(x)), 0, cfg_.width - 1);
    int row = std::clamp(static_cast<int>(std::lround(y)), 0, cfg_.height - 1);
    double d_row_line = std::abs(y - row) * cfg_.edge_m;
    double d_col_line = std::abs(x - col) * cfg_.edge_m;
    return d_row_line <= d_col_line ? row_street(row) : col_street(col);
}

GridPath GridWorld::path_from_nodes(std::vector<GridNode> nodes) const {
    GridPath p;
    p.length_m = 0.0;
    std::string last;
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        const GridNode& a = nodes[i - 1];
        const GridNode& b = nodes[i];
        p.length_m += (std::abs(b.col - a.col) + std::abs(b.row - a.row)) * cfg_.edge_m;
        std::string street = a.row == b.row ? row_street(a.row) : col_street(a.col);
        if (street != last) {
            if (!p.street_string.empty()) p.street_string.push_back(traj::kStreetSeparator);
            p.street_string += street;
            last = street;
        }
    }
    p.nodes = std::move(nodes);
    return p;
}

GridPath GridWorld::shortest_path(const GridNode& from, const GridNode& to) const {
    // horizontal-first L: every intermediate node included
    std::vector<GridNode> nodes;
    nodes.push_back(from);
    int step = to.col > from.col ? 1 : -1;
    for (int c = from.col; c != to.col; c += step) nodes.push_back({c + step, from.row});
    step = to.row > from.row ? 1 : -1;
    for (int r = from.row; r != to.row; r += step) nodes.push_back({to.col, r + step});
    return path_from_nodes(std::move(nodes));
}

std::vector<GridPath> GridWorld::alternative_paths(const GridNode& from,
                                                   const GridNode& to) const {
    std::vector<GridPath> out;
    if (from == to) return out;
    for (int k = 1; k <= cfg_.k_alternatives; ++k) {
        // overshoot the target column by k blocks, then come back along the
        // destination row: adds exactly 2k edges
        int over = to.col + (to.col >= from.col ? k : -k);
        if (over < 0 || over >= cfg_.width) {
            over = to.col - (to.col >= from.col ? k : -k); // bounce off the border
            if (over < 0 || over >= cfg_.width) continue;
        }
        std::vector<GridNode> nodes;
        nodes.push_back(from);
        int step = over > from.col ? 1 : -1;
        for (int c = from.col; c != over; c += step) nodes.push_back({c + step, from.row});
        step = to.row > from.row ? 1 : (to.row < from.row ? -1 : 0);
        if (step != 0) {
            for (int r = from.row; r != to.row; r += step) nodes.push_back({over, r + step});
        }
        step = to.col > over ? 1 : -1;
        for (int c = over; c != to.col; c += step) nodes.push_back({c + step, to.row});
        out.push_back(path_from_nodes(std::move(nodes)));
    }
    return out;
}

void GridWorld::bind_poi(const std::string& poi_id, const GridNode& node) {
    poi_nodes_[poi_id] = node;
}

void GridWorld::bind_poi(const std::string& poi_id, const LatLon& near) {
    poi_nodes_[poi_id] = nearest_node(near);
}

std::optional<GridNode> GridWorld::poi_node(const std::string& poi_id) const {
    auto it = poi_nodes_.find(poi_id);
    if (it == poi_nodes_.end()) return std::nullopt;
    return it->second;
}

std::vector<traj::RouteAlternative> GridWorld::alternatives(const std::string& start_poi,
                                                            const std::string& end_poi) const {
    auto a = poi_node(start_poi);
    auto b = poi_node(end_poi);
    if (!a || !b) throw DataError("unbound poi: " + (a ? end_poi : start_poi));
    std::vector<traj::RouteAlternative> out;
    for (const GridPath& p : alternative_paths(*a, *b)) {
        out.push_back({p.street_string, p.length_m});
    }
    return out;
}

std::optional<GridPath> GridWorld::find_alternative(const std::string& start_poi,
                                                    const std::string& end_poi,
                                                    const std::string& street_string) const {
    auto a = poi_node(start_poi);
    auto b = poi_node(end_poi);
    if (!a || !b) return std::nullopt;
    for (GridPath& p : alternative_paths(*a, *b)) {
        if (p.street_string == street_string) return std::move(p);
    }
    return std::nullopt;
}

} // namespace nudgekit::sim
