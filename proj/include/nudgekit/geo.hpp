#pragma once

#include <cmath>

namespace nudgekit {

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;
};

// Great-circle distance in metres (haversine, spherical earth).
inline double haversine_m(const LatLon& a, const LatLon& b) {
    constexpr double kEarthRadiusM = 6371000.0;
    constexpr double kDegToRad = 0.017453292519943295;
    double lat1 = a.lat * kDegToRad;
    double lat2 = b.lat * kDegToRad;
    double dlat = (b.lat - a.lat) * kDegToRad;
    double dlon = (b.lon - a.lon) * kDegToRad;
    double s1 = std::sin(dlat / 2.0);
    double s2 = std::sin(dlon / 2.0);
    double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    if (h > 1.0) h = 1.0;
    return 2.0 * kEarthRadiusM * std::asin(std::sqrt(h));
}

} // namespace nudgekit
