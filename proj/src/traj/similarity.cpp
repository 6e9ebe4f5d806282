#include "nudgekit/traj/similarity.hpp"

#include "nudgekit/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nudgekit::traj {

std::string route_string(const Route& route, const StreetNameProvider& lookup) {
    std::string out;
    std::string last;
    bool any = false;
    for (const TrackPoint& p : route.points) {
        auto name = lookup.street_name(p.lat, p.lon);
        if (!name) continue;
        any = true;
        if (*name == last) continue; // only consecutive duplicates collapse
        if (!out.empty()) out.push_back(kStreetSeparator);
        out += *name;
        last = *name;
    }
    if (!any) throw DataError("street-name lookup failed for every point of the route");
    return out;
}

std::vector<std::string> split_street_string(const std::string& s) {
    std::vector<std::string> tokens;
    if (s.empty()) return tokens;
    std::size_t start = 0;
    while (true) {
        std::size_t sep = s.find(kStreetSeparator, start);
        if (sep == std::string::npos) {
            tokens.push_back(s.substr(start));
            break;
        }
        tokens.push_back(s.substr(start, sep - start));
        start = sep + 1;
    }
    return tokens;
}

namespace {

template <typename Seq>
int levenshtein(const Seq& a, const Seq& b) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0) return static_cast<int>(m);
    if (m == 0) return static_cast<int>(n);
    std::vector<int> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

} // namespace

int edit_distance_tokens(const std::string& a, const std::string& b) {
    return levenshtein(split_street_string(a), split_street_string(b));
}

int edit_distance_chars(const std::string& a, const std::string& b) {
    return levenshtein(a, b);
}

int similarity_threshold(const std::string& a, const std::string& b,
                         const SimilarityConfig& cfg) {
    std::size_t la, lb;
    if (cfg.character_level) {
        la = a.size();
        lb = b.size();
    } else {
        la = split_street_string(a).size();
        lb = split_street_string(b).size();
    }
    return static_cast<int>(
        std::ceil(cfg.tau_fraction * static_cast<double>(std::max(la, lb))));
}

bool same_trajectory(const std::string& a, const std::string& b, const SimilarityConfig& cfg) {
    int d = cfg.character_level ? edit_distance_chars(a, b) : edit_distance_tokens(a, b);
    return d <= similarity_threshold(a, b, cfg);
}

} // namespace nudgekit::traj
