#pragma once

#include "nudgekit/geo.hpp"
#include "nudgekit/ml/classifier.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nudgekit::sleep {

struct Place {
    std::string place_id;
    LatLon centroid;
    int observations = 0;
};

// Locations within `radius_m` of an existing centroid are the same place;
// anything farther away registers a new one. Centroids are frozen at first
// observation, which keeps any two of them more than `radius_m` apart.
class PlaceRegistry {
public:
    explicit PlaceRegistry(double radius_m = 100.0) : radius_m_(radius_m) {}

    // Nearest-first matching; registers when nothing is within radius.
    const std::string& assign(const LatLon& p);

    const Place* find(const std::string& place_id) const;
    const std::vector<Place>& places() const { return places_; }
    double radius_m() const { return radius_m_; }

    void append_training_row(const std::string& place_id, ml::Row row);
    std::size_t training_rows(const std::string& place_id) const;

    // Fits one model per place with trainable data plus a pooled model over
    // everything. Previously fitted models are replaced.
    void train_models(const std::vector<std::string>& feature_names,
                      const ml::ClassifierSpec& spec, std::uint64_t seed);

    const ml::Model* model_for(const std::string& place_id) const;
    const ml::Model* pooled_model() const { return pooled_ ? &*pooled_ : nullptr; }
    // Model of the nearest place that has one, within max_m.
    const ml::Model* nearest_model_within(const LatLon& p, double max_m) const;
    bool has_any_model() const;

    // Places + fitted models (training rows are not persisted).
    std::string to_json() const;
    static PlaceRegistry from_json(const std::string& text);

private:
    double radius_m_;
    std::vector<Place> places_;
    std::map<std::string, std::vector<ml::Row>> rows_;
    std::map<std::string, ml::Model> models_;
    std::optional<ml::Model> pooled_;
};

} // namespace nudgekit::sleep
