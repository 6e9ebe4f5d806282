#include "nudgekit/sleep/places.hpp"

#include "nudgekit/errors.hpp"
#include "nudgekit/rng.hpp"

#include <json.hpp>

#include <limits>

namespace nudgekit::sleep {

const std::string& PlaceRegistry::assign(const LatLon& p) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < places_.size(); ++i) {
        double d = haversine_m(places_[i].centroid, p);
        if (d < best) {
            best = d;
            best_i = i;
        }
    }
    if (best <= radius_m_) {
        ++places_[best_i].observations;
        return places_[best_i].place_id;
    }
    Place np;
    np.place_id = "p" + std::to_string(places_.size());
    np.centroid = p;
    np.observations = 1;
    places_.push_back(std::move(np));
    return places_.back().place_id;
}

const Place* PlaceRegistry::find(const std::string& place_id) const {
    for (const Place& p : places_) {
        if (p.place_id == place_id) return &p;
    }
    return nullptr;
}

void PlaceRegistry::append_training_row(const std::string& place_id, ml::Row row) {
    rows_[place_id].push_back(std::move(row));
}

std::size_t PlaceRegistry::training_rows(const std::string& place_id) const {
    auto it = rows_.find(place_id);
    return it == rows_.end() ? 0 : it->second.size();
}

void PlaceRegistry::train_models(const std::vector<std::string>& feature_names,
                                 const ml::ClassifierSpec& spec, std::uint64_t seed) {
    models_.clear();
    pooled_.reset();
    Rng root(seed);
    ml::Dataset pooled;
    pooled.feature_names = feature_names;
    std::size_t place_index = 0;
    for (const Place& p : places_) {
        auto it = rows_.find(p.place_id);
        ++place_index;
        if (it == rows_.end()) continue;
        for (const ml::Row& r : it->second) pooled.rows.push_back(r);
        ml::Dataset ds;
        ds.feature_names = feature_names;
        ds.rows = it->second;
        if (!ds.trainable()) continue; // single-class places fall back to pooled
        models_.emplace(p.place_id,
                        ml::Model::fit(ds, spec, root.substream("place", place_index).u64()));
    }
    if (pooled.trainable()) {
        pooled_ = ml::Model::fit(pooled, spec, root.substream("pooled").u64());
    }
}

const ml::Model* PlaceRegistry::model_for(const std::string& place_id) const {
    auto it = models_.find(place_id);
    return it == models_.end() ? nullptr : &it->second;
}

const ml::Model* PlaceRegistry::nearest_model_within(const LatLon& p, double max_m) const {
    const ml::Model* best_model = nullptr;
    double best = max_m;
    for (const Place& place : places_) {
        auto it = models_.find(place.place_id);
        if (it == models_.end()) continue;
        double d = haversine_m(place.centroid, p);
        if (d <= best) {
            best = d;
            best_model = &it->second;
        }
    }
    return best_model;
}

bool PlaceRegistry::has_any_model() const { return !models_.empty() || pooled_.has_value(); }

std::string PlaceRegistry::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["radius_m"] = radius_m_;
    nlohmann::json places = nlohmann::json::array();
    for (const Place& p : places_) {
        places.push_back({{"place_id", p.place_id},
                          {"lat", p.centroid.lat},
                          {"lon", p.centroid.lon},
                          {"observations", p.observations}});
    }
    j["places"] = std::move(places);
    nlohmann::json models = nlohmann::json::object();
    for (const auto& [id, m] : models_) models[id] = nlohmann::json::parse(m.to_json());
    j["models"] = std::move(models);
    if (pooled_) j["pooled"] = nlohmann::json::parse(pooled_->to_json());
    return j.dump();
}

PlaceRegistry PlaceRegistry::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format_version", 0) != 1) throw DataError("unsupported registry version");
    PlaceRegistry reg(j.at("radius_m").get<double>());
    for (const auto& p : j.at("places")) {
        Place place;
        place.place_id = p.at("place_id").get<std::string>();
        place.centroid = {p.at("lat").get<double>(), p.at("lon").get<double>()};
        place.observations = p.at("observations").get<int>();
        reg.places_.push_back(std::move(place));
    }
    for (auto it = j.at("models").begin(); it != j.at("models").end(); ++it) {
        reg.models_.emplace(it.key(), ml::Model::from_json(it.value().dump()));
    }
    if (j.contains("pooled")) reg.pooled_ = ml::Model::from_json(j["pooled"].dump());
    return reg;
}

} // namespace nudgekit::sleep
