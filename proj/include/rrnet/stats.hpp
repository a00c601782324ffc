#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace rrnet {

/// Linear-interpolation quantile (type 7) of an unsorted sample; NaNs are dropped.
/// Returns NaN for an empty sample.
double quantile(std::span<const double> values, double q);
double median(std::span<const double> values);
double mean(std::span<const double> values);

struct Quantiles {
  double min = 0.0;
  double p01 = 0.0;
  double p50 = 0.0;
  double p99 = 0.0;
  double max = 0.0;
};

Quantiles summarize(std::span<const double> values);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares y = slope * x + intercept. Absent with fewer than two
/// distinct x values.
std::optional<LineFit> fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace rrnet
