#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "rrnet/errors.hpp"

namespace rrnet {

/// Dense row-major real matrix. Weight matrices W_i are stored as d_i x d_{i-1}.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// splitmix64 finalizer; used to derive keys and child seeds.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Combine a parent seed with a tag into a new 64-bit seed.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept;

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/**
 * Counter-based random stream.
 *
 * The key is a mix of the master seed; the upper 64 bits of the Philox
 * counter hold the stream id and the lower 64 bits count blocks. Two streams
 * with the same master seed and different ids therefore walk disjoint
 * counter ranges of the same bijection.
 *
 * A stream is single-owner. Satisfies UniformRandomBitGenerator.
 */
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal (Box-Muller; the second variate of each pair is cached).
  double normal() noexcept;
  bool bernoulli(double p) noexcept;

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  /// Number of 64-bit words drawn so far.
  std::uint64_t position() const noexcept { return position_; }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::array<std::uint32_t, 2> key_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;  // 64-bit words left in buffer_
  std::uint64_t position_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// rows x cols matrix of iid N(0, std^2) entries, filled in row-major order.
Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double std, RngStream& rng);

/// Vector of iid N(0, 1) entries.
Vector gaussian_vector(std::size_t dim, RngStream& rng);

/// Uniform point on the sphere of the given radius in R^dim.
Vector uniform_sphere(std::size_t dim, double radius, RngStream& rng);

/// Uniform point in the closed ball B(center, radius).
Vector uniform_ball(const Vector& center, double radius, RngStream& rng);

struct PowerIterationOptions {
  double tol = 1e-10;
  std::size_t max_iters = 10000;
};

/// Linear map given by its action and the action of its transpose.
struct LinearOperator {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::function<Vector(const Vector&)> apply;            // R^cols -> R^rows
  std::function<Vector(const Vector&)> apply_transpose;  // R^rows -> R^cols
};

/// Largest singular value by power iteration on M^T M.
///
/// Starts from e_1 plus a fixed small perturbation and stops once the Rayleigh
/// quotient changes by less than `tol` (relative) between sweeps. Throws
/// NonConverged when `max_iters` sweeps are not enough.
double spectral_norm(const Matrix& m, double tol = 1e-10, std::size_t max_iters = 10000);
double spectral_norm(const LinearOperator& op, double tol = 1e-10, std::size_t max_iters = 10000);

/// Two-sample Kolmogorov-Smirnov statistic sup_t |F_a(t) - F_b(t)|.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic two-sample critical value c(alpha) * sqrt((n_a + n_b) / (n_a n_b))
/// with c(alpha) = sqrt(-ln(alpha / 2) / 2).
double ks_critical_value(double alpha, std::size_t n_a, std::size_t n_b);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace rrnet
