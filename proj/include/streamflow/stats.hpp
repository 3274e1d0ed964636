#pragma once

#include <span>

namespace streamflow::numerics {

/// Least-squares slope of y against its index 0, 1, 2, ...
double linear_slope(std::span<const double> y);
double median(std::span<const double> values);
/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace streamflow::numerics
