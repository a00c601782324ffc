#include "rrnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rrnet {

namespace {

std::vector<double> sorted_finite(std::span<const double> values) {
  std::vector<double> v;
  v.reserve(values.size());
  for (double x : values) {
    if (!std::isnan(x)) v.push_back(x);
  }
  std::sort(v.begin(), v.end());
  return v;
}

double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

double quantile(std::span<const double> values, double q) {
  return quantile_sorted(sorted_finite(values), q);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

double mean(std::span<const double> values) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : values) {
    if (std::isnan(x)) continue;
    s += x;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(n);
}

Quantiles summarize(std::span<const double> values) {
  const auto v = sorted_finite(values);
  return {quantile_sorted(v, 0.0), quantile_sorted(v, 0.01), quantile_sorted(v, 0.5),
          quantile_sorted(v, 0.99), quantile_sorted(v, 1.0)};
}

std::optional<LineFit> fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  const double slope = sxy / sxx;
  return LineFit{slope, my - slope * mx};
}

}  // namespace rrnet
