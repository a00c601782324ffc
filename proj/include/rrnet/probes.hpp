#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rrnet/network.hpp"
#include "rrnet/stats.hpp"

namespace rrnet {

/// Tabular output of a Monte Carlo probe.
///
/// `rows` holds one measurement row per trial, layer or sample (whichever the
/// probe iterates over), aligned with `columns`. `bounds` holds the reference
/// values the measurements are compared against and `statistics` the derived
/// summary numbers. Probabilistic bounds are never hard failures; they feed
/// `violation_frequency`.
struct ProbeReport {
  std::string name;
  std::map<std::string, double> parameters;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> bounds;
  std::map<std::string, double> statistics;
  double violation_frequency = 0.0;

  std::vector<double> column(const std::string& name) const;
  Quantiles summary(const std::string& column_name) const;
};

/// |f(x)| and |grad f(x)| over `trials` independent Standard networks at the fixed
/// input x = (1, ..., 1), so |x| = sqrt(d). Checks |grad f| >= 2^-(ell+1) and
/// |f| <= c 2^ell sqrt(ln 1/delta); `c` is a calibration parameter.
/// Network k is drawn from RngStream(master_seed, k).
ProbeReport probe_value_gradient(const Architecture& arch, std::size_t trials, double delta,
                                 std::uint64_t master_seed, double c = 8.0,
                                 std::size_t workers = 1);

/// Per layer: |f_i(x)| against sqrt(d_i) / 2^i, and the largest distances
/// |f~_i(x) - f~_i(y)| and |f_i(x) - f_i(y)| over y uniform in B(x, radius),
/// divided by radius (left undivided when radius == 0).
ProbeReport probe_scale_preservation(const Network& net, const Vector& x, double radius,
                                     std::size_t n_samples, RngStream& rng);

/// Per layer i in [1, ell]: number of rows j of W_{i+1} with
/// |<(W_{i+1})_j, f_i(x)>| >= alpha |f_i(x)| / sqrt(d_i), against
/// (1 - 2 sqrt(2/pi) alpha) d_{i+1}. The scalar readout (i == ell) is reported
/// but not counted in violation_frequency, since a single row cannot
/// concentrate. Requires 0 <= alpha < sqrt(pi/8).
ProbeReport probe_activation_margin(const Network& net, const Vector& x, double alpha);

/// Per sampled y in B(x, radius): |grad f(x) - grad f(y)|, the norms of the
/// per-layer terms of the exact decomposition, and the mask flip counts.
/// violation_frequency counts samples breaking sum_j |Delta_j| >= |grad diff|.
ProbeReport probe_gradient_smoothness(const Network& net, const Vector& x, double radius,
                                      std::size_t n_samples, RngStream& rng);

/// Spectral norms of the masked products prod_{k=i_j}^{i_{j+1}+1} D_k(y) W_k
/// between consecutive bottleneck layers, against (C ell ln d_max)^((i_j - i_{j+1})/2).
/// Requires at least two bottlenecks.
ProbeReport probe_segment_spectral(const Network& net, const Vector& x, double radius,
                                   std::size_t n_samples, RngStream& rng, double C = 8.0);

/// Spectral norm of prod_{k=upper}^{lower+1} D_k W_k using the given masks
/// (masks[k-1] is D_k).
double masked_segment_norm(const Network& net, const std::vector<Mask>& masks, std::size_t upper,
                           std::size_t lower, double tol = 1e-10, std::size_t max_iters = 100000);

struct SignFlipResult {
  double empirical = 0.0;
  /// Binomial standard error sqrt(p (1 - p) / n) at the exact probability.
  double std_error = 0.0;
  /// 3 r / R sqrt(ln(R / r)); absent unless 0 < r <= R (0 when r == 0).
  std::optional<double> bound;
  /// arccos(<x,y> / (|x| |y|)) / pi.
  double oracle = 0.0;
  double r = 0.0;
  double R = 0.0;
  std::size_t n_draws = 0;
};

/// Fraction of w ~ N(0, I) with sign(w.x) != sign(w.y).
SignFlipResult probe_sign_flip(const Vector& x, const Vector& y, std::size_t n_draws,
                               RngStream& rng);

struct DistEquivResult {
  double ks_statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::vector<double> sample_data_masks;
  std::vector<double> sample_random_masks;
};

/// Two-sample KS test between |grad f(x)| over independent Standard networks and
/// |W~_{ell+1} D_ell W~_ell ... D_1 W~_1| over independent weights with
/// Bernoulli(mask_prob) diagonal masks. Level 0.01.
DistEquivResult probe_dist_equiv(const Architecture& arch, const Vector& x, std::size_t trials,
                                 std::uint64_t master_seed, double mask_prob = 0.5,
                                 std::size_t workers = 1);

struct GaussianSpectralResult {
  std::size_t violations = 0;
  double bound = 0.0;
  std::vector<double> norms;
  /// Mean of |A| / (sqrt(m) + sqrt(n)).
  double mean_edge_ratio = 0.0;
};

/// Counts m x n standard Gaussian matrices with |A| > 3 (sqrt m + sqrt n + sqrt(ln 1/delta)).
GaussianSpectralResult probe_gaussian_spectral(std::size_t m, std::size_t n, double delta,
                                               std::size_t samples, std::uint64_t master_seed,
                                               std::size_t workers = 1);

}  // namespace rrnet
