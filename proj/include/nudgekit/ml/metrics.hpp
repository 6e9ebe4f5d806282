#pragma once

#include "nudgekit/ml/classifier.hpp"

#include <cstdint>
#include <span>

namespace nudgekit::ml {

struct EvalMetrics {
    double accuracy = 0.0;
    double precision = 0.0;    // positive class
    double recall = 0.0;
    double f_value = 0.0;      // 2PR/(P+R), 0 when P+R == 0
    double rrse_percent = 0.0; // 100 * sqrt(sum (p-y)^2 / sum (ybar-y)^2)
};

double f_measure(double precision, double recall);

// Thresholded at p > threshold (a tie predicts the negative class).
// Throws DataError when labels are all one class: RRSE is undefined there.
EvalMetrics compute_metrics(std::span<const int> labels, std::span<const double> probs,
                            double threshold = 0.5);

// Stratified seeded k-fold cross-validation; all held-out predictions are
// pooled and scored once. Rows are canonically sorted by provenance tag
// first, so row order never changes the result for a fixed seed.
EvalMetrics cross_validate(const Dataset& ds, const ClassifierSpec& spec, int k,
                           std::uint64_t seed);

} // namespace nudgekit::ml
