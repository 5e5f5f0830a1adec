#pragma once

#include <span>
#include <vector>

namespace repdyn {

// Both statistics read every input as the shortest decimal that round-trips
// to it (the value a report prints) and evaluate in 50-digit decimal
// arithmetic before a single rounding to double. A series such as
// [0.2, 0.3, 0.2, 0.3] therefore has differences of exactly +-0.1.

/// Population standard deviation (divides by n). Requires n >= 1.
double population_std(std::span<const double> values);

/// Population standard deviation of consecutive differences. Requires n >= 3.
/// Used for both imbalance-series smoothness and probe-trajectory roughness.
double consecutive_difference_std(std::span<const double> series);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);

}  // namespace repdyn
