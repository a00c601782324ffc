#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rrnet/linalg.hpp"

namespace rrnet {

/// Input dimension plus hidden widths; the output width is always 1.
/// `hidden_widths` may be empty, which gives the linear map x -> W_1 x.
struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_widths;

  /// Number of hidden layers (ell).
  std::size_t depth() const noexcept { return hidden_widths.size(); }
  /// d_i for i in [0, ell + 1]; d_0 is the input dimension, d_{ell+1} == 1.
  std::size_t width(std::size_t i) const;
  /// min / max over {d_0, ..., d_ell}.
  std::size_t min_width() const;
  std::size_t max_width() const;

  /// Throws DomainError unless every width is at least 1.
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class InitMode : std::uint8_t {
  Standard = 0,       // entries ~ N(0, 1 / fan_in)
  DepthCollapse = 1,  // entries ~ N(0, 2 / fan_in)
};

/// What the mask bit of an exactly-zero preactivation becomes.
enum class TiePolicy : std::uint8_t {
  RandomizedTies = 0,  // Bernoulli(1/2)
  TiesToOne = 1,
  TiesToZero = 2,
};

/// Standard deviation of the entries of a layer with the given fan-in.
double init_std(InitMode mode, std::size_t fan_in);

class Network {
 public:
  /// Draws W_1, ..., W_{ell+1} in order from `rng`.
  static Network sample(const Architecture& arch, InitMode mode, RngStream& rng,
                        TiePolicy ties = TiePolicy::RandomizedTies);

  /// Wraps explicit weights without sampling. Used by hand-built oracles.
  /// Throws DomainError when the shapes do not chain or the last layer has more
  /// than one row.
  static Network from_weights(std::vector<Matrix> weights, InitMode mode = InitMode::Standard,
                              TiePolicy ties = TiePolicy::RandomizedTies,
                              std::uint64_t seed = 0);

  const Architecture& arch() const noexcept { return arch_; }
  InitMode mode() const noexcept { return mode_; }
  TiePolicy tie_policy() const noexcept { return ties_; }
  /// Master seed of the stream the weights were drawn from (0 for hand-built nets).
  std::uint64_t seed() const noexcept { return seed_; }

  std::size_t depth() const noexcept { return arch_.depth(); }
  /// All weights, W_1 first.
  const std::vector<Matrix>& weights() const noexcept { return weights_; }
  /// W_i for i in [1, ell + 1].
  const Matrix& layer(std::size_t i) const { return weights_.at(i - 1); }

  friend bool operator==(const Network& a, const Network& b);

 private:
  Network(Architecture arch, InitMode mode, TiePolicy ties, std::uint64_t seed,
          std::vector<Matrix> weights);

  Architecture arch_;
  InitMode mode_ = InitMode::Standard;
  TiePolicy ties_ = TiePolicy::RandomizedTies;
  std::uint64_t seed_ = 0;
  std::vector<Matrix> weights_;
};

using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>;

/// Everything computed on the way through the network for one input.
/// Index k of `pre`, `masks` and `post` holds layer k + 1.
struct ForwardTrace {
  Vector input;
  std::vector<Vector> pre;   // f~_i(x) = W_i f_{i-1}(x)
  std::vector<Mask> masks;   // D_i
  std::vector<Vector> post;  // f_i(x) = D_i f~_i(x)
  double output = 0.0;

  /// f_i(x) with f_0(x) = x.
  const Vector& image(std::size_t i) const { return i == 0 ? input : post.at(i - 1); }
};

ForwardTrace forward(const Network& net, const Vector& x, TiePolicy policy, RngStream& rng);

/// Uses the network's own tie policy and a stream derived from its seed.
ForwardTrace forward(const Network& net, const Vector& x);

/// f(x) alone. The output does not depend on the tie policy.
double evaluate(const Network& net, const Vector& x);

/// Row vector W_{ell+1} D_ell W_ell ... D_1 W_1 (returned as a column vector of
/// dimension d), built by backward vector-matrix products with the trace's masks.
Vector gradient(const Network& net, const ForwardTrace& trace);

struct GradDecomposition {
  std::vector<Vector> terms;  // Delta_1 .. Delta_ell
  Vector grad_x;
  Vector grad_y;

  Vector sum() const;
};

/// Splits grad f(x) - grad f(y) into one term per layer, each isolating the
/// mask change at that layer:
///   Delta_j = W_{ell+1} (prod_{i=ell}^{j+1} D_i(x) W_i) (D_j(x) - D_j(y)) W_j
///             (prod_{i=j-1}^{1} D_i(y) W_i).
GradDecomposition grad_difference_decomposition(const Network& net, const ForwardTrace& trace_x,
                                                const ForwardTrace& trace_y);

/// Recursive bottleneck layers i_1 > ... > i_m = 0, where i_1 is the narrowest
/// layer among 0..ell and each next index is the narrowest strictly below the
/// previous one. Ties go to the smallest index.
struct BottleneckDecomposition {
  std::vector<std::size_t> indices;
  std::vector<std::size_t> widths;

  std::size_t size() const noexcept { return indices.size(); }
};

BottleneckDecomposition bottleneck_decomposition(const Architecture& arch);

/// sqrt(d_min) / (ell * ln d_max)^(80 ell). Throws DomainError when
/// ell * ln d_max < 1.
double paper_radius(const Architecture& arch);
double paper_radius(double d_min, double d_max, std::size_t ell);

/// Binary network file, little-endian:
///   "RRNN" | u32 version (1) | u8 mode | u8 tie policy | u32 ell |
///   u32 d_0 .. d_{ell+1} | f64 W_1 .. W_{ell+1} row-major | u64 master seed
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

inline constexpr std::uint32_t kNetworkFileVersion = 1;

}  // namespace rrnet
