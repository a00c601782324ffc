#include "rrnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rrnet {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

}  // namespace

std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept {
  return mix64(mix64(parent) ^ (tag * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL));
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kPhiloxM0, ctr[0], lo0, hi0);
    mulhilo(kPhiloxM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id) noexcept
    : master_seed_(master_seed), stream_id_(stream_id) {
  const std::uint64_t k = mix64(master_seed);
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

RngStream::result_type RngStream::operator()() noexcept {
  if (buffered_ == 0) {
    buffer_ = philox4x32({static_cast<std::uint32_t>(block_),
                          static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(stream_id_),
                          static_cast<std::uint32_t>(stream_id_ >> 32)},
                         key_);
    ++block_;
    buffered_ = 2;
  }
  const int i = 2 - buffered_;
  --buffered_;
  ++position_;
  return static_cast<std::uint64_t>(buffer_[2 * i]) |
         (static_cast<std::uint64_t>(buffer_[2 * i + 1]) << 32);
}

double RngStream::uniform() noexcept {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RngStream::normal() noexcept {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(phi);
  has_cached_normal_ = true;
  return r * std::cos(phi);
}

bool RngStream::bernoulli(double p) noexcept { return uniform() < p; }

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double std, RngStream& rng) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  double* data = m.data();
  const std::size_t n = rows * cols;
  for (std::size_t i = 0; i < n; ++i) data[i] = std * rng.normal();
  return m;
}

Vector gaussian_vector(std::size_t dim, RngStream& rng) {
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return v;
}

Vector uniform_sphere(std::size_t dim, double radius, RngStream& rng) {
  Vector v = gaussian_vector(dim, rng);
  double norm = v.norm();
  while (norm == 0.0) {
    v = gaussian_vector(dim, rng);
    norm = v.norm();
  }
  return v * (radius / norm);
}

Vector uniform_ball(const Vector& center, double radius, RngStream& rng) {
  const auto dim = static_cast<std::size_t>(center.size());
  const Vector u = uniform_sphere(dim, 1.0, rng);
  const double s = rng.uniform();
  return center + radius * std::pow(s, 1.0 / static_cast<double>(dim)) * u;
}

double spectral_norm(const LinearOperator& op, double tol, std::size_t max_iters) {
  if (op.rows == 0 || op.cols == 0) throw DomainError("spectral_norm: empty operator");
  if (!(tol > 0.0)) throw DomainError("spectral_norm: tol must be positive");

  const auto n = static_cast<Eigen::Index>(op.cols);
  Vector v(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    // Fixed deterministic perturbation so no singular vector is orthogonal to the start.
    v[k] = 1e-3 * (1.0 + static_cast<double>((k * 7919) % 97) / 97.0);
  }
  v[0] += 1.0;
  v.normalize();

  double previous = -1.0;
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    const Vector w = op.apply(v);
    const double rayleigh = w.squaredNorm();  // v^T M^T M v with |v| = 1
    if (rayleigh == 0.0) {
      // v lies in the null space; with the perturbed start that means M == 0
      // on the Krylov space, which for our inputs is only the zero matrix.
      return 0.0;
    }
    if (previous >= 0.0 && std::abs(rayleigh - previous) < tol * rayleigh) {
      return std::sqrt(rayleigh);
    }
    previous = rayleigh;
    Vector u = op.apply_transpose(w);
    const double un = u.norm();
    if (un == 0.0) return 0.0;
    v = u / un;
  }
  throw NonConverged("spectral_norm: no convergence after " + std::to_string(max_iters) +
                     " sweeps");
}

double spectral_norm(const Matrix& m, double tol, std::size_t max_iters) {
  LinearOperator op{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
                    [&m](const Vector& x) -> Vector { return m * x; },
                    [&m](const Vector& y) -> Vector { return m.transpose() * y; }};
  return spectral_norm(op, tol, max_iters);
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double stat = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double t = std::min(sa[i], sb[j]);
    // Step past every copy of t in both samples before comparing the CDFs.
    while (i < sa.size() && sa[i] == t) ++i;
    while (j < sb.size() && sb[j] == t) ++j;
    stat = std::max(stat, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  // Once one sample is exhausted its CDF is 1; the other only climbs towards 1.
  if (i < sa.size()) stat = std::max(stat, 1.0 - static_cast<double>(i) / na);
  if (j < sb.size()) stat = std::max(stat, 1.0 - static_cast<double>(j) / nb);
  return stat;
}

double ks_critical_value(double alpha, std::size_t n_a, std::size_t n_b) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("ks_critical_value: alpha not in (0,1)");
  const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
  const double na = static_cast<double>(n_a);
  const double nb = static_cast<double>(n_b);
  return c * std::sqrt((na + nb) / (na * nb));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace rrnet
