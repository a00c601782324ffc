#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rrnet/linalg.hpp"

namespace rrnet {

/// One-layer update of the normalized expected inner product of two inputs at
/// angle theta under a random ReLU layer: sin(theta)/pi + (1 - theta/pi) cos(theta).
/// Throws DomainError outside [0, pi].
double kernel_map(double theta);

struct KernelEstimate {
  double estimate = 0.0;
  /// Standard error of `estimate` (same scale as the estimate).
  double std_error = 0.0;
  /// Monte Carlo mean of relu(g.x) relu(g.y) and its standard error.
  double numerator = 0.0;
  double numerator_std_error = 0.0;
};

/// Monte Carlo estimate of the normalized expectation with x = (1, 0),
/// y = (cos theta, sin theta), g ~ N(0, I_2). The denominator uses the exact
/// second moments |x|^2 / 2 = |y|^2 / 2 = 1/2.
KernelEstimate kernel_mc_estimate(double theta, std::size_t n_draws, RngStream& rng);

struct KernelStep {
  double theta = 0.0;
  double rho = 0.0;
};

struct KernelTrace {
  double theta_0 = 0.0;
  /// steps[t - 1] holds (theta_t, rho_t) for t = 1..steps.
  std::vector<KernelStep> steps;
};

/// rho_{t+1} = kernel_map(theta_t), theta_{t+1} = arccos(clamp(rho_{t+1}, -1, 1)).
KernelTrace kernel_iterate(double theta_0, std::size_t steps);

struct SinCosGap {
  double min_margin = 0.0;
  double argmin = 0.0;
};

/// sin x - x cos x - (1 - cos x)^(3/2) / 15.
double sin_cos_margin(double x);

/// Minimum of sin_cos_margin over n_grid equally spaced points of [0, pi],
/// both endpoints included.
SinCosGap sin_cos_gap(std::size_t n_grid);

struct CollapseOptions {
  /// Use y = x for every pair (test hook).
  bool identical_pairs = false;
};

/// Per-layer measurements of a deep DepthCollapse network on input pairs.
/// Layer-indexed tables are [layer - 1][pair].
struct CollapseReport {
  std::size_t d = 0;
  std::size_t width = 0;
  std::size_t depth = 0;
  std::size_t n_pairs = 0;
  std::uint64_t seed = 0;

  std::vector<double> theta_0;                  // initial angle per pair
  std::vector<std::vector<double>> cosine;      // cos(f_i(x), f_i(y))
  std::vector<std::vector<double>> kernel;      // kernel_iterate(theta_0) rho_i
  std::vector<std::vector<double>> norm;        // |f_i(x)| (inputs have unit norm)
  /// |f_i(x)| / |f_{i-1}(x)| * sqrt(d_{i-1} / d_i); expectation ~1 at every layer.
  std::vector<std::vector<double>> gain;
  /// |r_i.f_i(x) - r_i.f_i(y)| / (|r_i.f_i(x)| + 1e-12) with a fresh N(0, 2/k)
  /// readout r_i, i.e. the output of the depth-i prefix network. At i == depth
  /// r_i is the network's own output layer.
  std::vector<std::vector<double>> constancy;
  /// |f(x)| < 1e-6 at the final output, per pair.
  std::vector<bool> small_output;

  std::vector<double> mean_abs_deviation;  // mean over pairs of |cosine - kernel|
  std::vector<double> median_gain;
  std::vector<double> median_norm;
  std::vector<double> median_constancy;

  /// Mean of mean_abs_deviation over layers 1..layers.
  double tracking_error(std::size_t layers) const;
};

/// Builds a DepthCollapse network with `depth` hidden layers of `width` units
/// (entries N(0, 2 / fan_in)) and pushes `n_pairs` pairs (x, y), uniform on the
/// unit sphere of R^d, through it.
///
/// Weights are generated one layer at a time from RngStream(derive_seed(seed, W), i)
/// and discarded after use, so memory stays at one layer.
CollapseReport collapse_simulate(std::size_t d, std::size_t width, std::size_t depth,
                                 std::size_t n_pairs, std::uint64_t master_seed,
                                 const CollapseOptions& options = {});

}  // namespace rrnet
