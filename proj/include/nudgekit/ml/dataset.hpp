#pragma once

#include <cmath>
#include <iosfwd>
#include <string>
#include <vector>

namespace nudgekit::ml {

// Absent feature entries are NaN.
inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

inline bool is_absent(double v) { return std::isnan(v); }

struct Provenance {
    std::string subject;
    std::string day;
    std::string place;
    auto operator<=>(const Provenance&) const = default;
};

struct Row {
    std::vector<double> features;
    int label = 0; // binary: 1 = positive class
    Provenance tag;
};

struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<Row> rows;

    std::size_t n_features() const { return feature_names.size(); }
    std::size_t size() const { return rows.size(); }

    // Both labels present and >= 2 rows; required before training.
    bool trainable() const;

    // Restrict to a subset of feature columns (by index), e.g. one modality.
    Dataset project(const std::vector<std::size_t>& columns) const;
};

// CSV with a header row: feature columns..., label, subject, day, place.
// Empty cells round-trip as absent values.
void write_dataset_csv(std::ostream& out, const Dataset& ds);
Dataset read_dataset_csv(std::istream& in);

} // namespace nudgekit::ml
