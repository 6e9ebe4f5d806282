#pragma once

#include "nudgekit/traj/route.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nudgekit::traj {

// Resolves a coordinate to a street name (house numbers and postcodes are
// already stripped by contract). Returns nullopt when nothing resolves.
class StreetNameProvider {
public:
    virtual ~StreetNameProvider() = default;
    virtual std::optional<std::string> street_name(double lat, double lon) const = 0;
};

inline constexpr char kStreetSeparator = '|';

// Ordered, consecutively-deduplicated street names joined with '|'.
// Points the provider cannot resolve are skipped; throws DataError when
// every point fails.
std::string route_string(const Route& route, const StreetNameProvider& lookup);

std::vector<std::string> split_street_string(const std::string& s);

// Unit-cost Levenshtein distance over street-name tokens.
int edit_distance_tokens(const std::string& a, const std::string& b);

// Character-level variant (config-selectable fidelity mode).
int edit_distance_chars(const std::string& a, const std::string& b);

struct SimilarityConfig {
    double tau_fraction = 0.2; // tau = ceil(fraction * max token count)
    bool character_level = false;
};

int similarity_threshold(const std::string& a, const std::string& b,
                         const SimilarityConfig& cfg = {});

// Distance <= tau means "same trajectory".
bool same_trajectory(const std::string& a, const std::string& b,
                     const SimilarityConfig& cfg = {});

} // namespace nudgekit::traj
