#pragma once

#include <span>
#include <vector>

namespace blockcons::stats {

double mean(std::span<const double> v);
/// Linear interpolation between order statistics (the usual "type 7").
double quantile(std::span<const double> v, double q);
double median(std::span<const double> v);
double iqr(std::span<const double> v);

/// Ranks starting at 1; ties get their average rank.
std::vector<double> ranks(std::span<const double> v);
double pearson(std::span<const double> x, std::span<const double> y);
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace blockcons::stats
