#include "rrnet/collapse.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rrnet/stats.hpp"

namespace rrnet {

namespace {

constexpr std::uint64_t kWeightTag = 0x57;   // 'W'
constexpr std::uint64_t kReadoutTag = 0x52;  // 'R'
constexpr std::uint64_t kPairTag = 0x50;     // 'P'

double safe_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace

double kernel_map(double theta) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi)) {
    throw DomainError("kernel_map: theta must lie in [0, pi], got " + std::to_string(theta));
  }
  return std::sin(theta) / std::numbers::pi + (1.0 - theta / std::numbers::pi) * std::cos(theta);
}

KernelEstimate kernel_mc_estimate(double theta, std::size_t n_draws, RngStream& rng) {
  if (n_draws < 2) throw DomainError("kernel_mc_estimate: needs at least 2 draws");
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  // Welford accumulation of relu(g.x) relu(g.y).
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < n_draws; ++k) {
    const double g1 = rng.normal();
    const double g2 = rng.normal();
    const double v = std::max(g1, 0.0) * std::max(c * g1 + s * g2, 0.0);
    const double delta = v - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (v - mean);
  }
  const double n = static_cast<double>(n_draws);
  const double se = std::sqrt(m2 / (n - 1.0) / n);
  constexpr double kNormalizer = 0.5;  // sqrt(E relu(g.x)^2 * E relu(g.y)^2) for unit x, y
  return {mean / kNormalizer, se / kNormalizer, mean, se};
}

KernelTrace kernel_iterate(double theta_0, std::size_t steps) {
  if (steps == 0) throw DomainError("kernel_iterate: steps must be positive");
  KernelTrace trace;
  trace.theta_0 = theta_0;
  trace.steps.reserve(steps);
  double theta = theta_0;
  for (std::size_t t = 0; t < steps; ++t) {
    const double rho = kernel_map(theta);
    theta = std::acos(std::clamp(rho, -1.0, 1.0));
    trace.steps.push_back({theta, rho});
  }
  return trace;
}

double sin_cos_margin(double x) {
  return std::sin(x) - x * std::cos(x) - std::pow(1.0 - std::cos(x), 1.5) / 15.0;
}

SinCosGap sin_cos_gap(std::size_t n_grid) {
  if (n_grid < 2) throw DomainError("sin_cos_gap: grid needs at least 2 points");
  SinCosGap out{sin_cos_margin(0.0), 0.0};
  for (std::size_t k = 1; k < n_grid; ++k) {
    const double x = std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_grid - 1);
    const double m = sin_cos_margin(x);
    if (m < out.min_margin) out = {m, x};
  }
  return out;
}

double CollapseReport::tracking_error(std::size_t layers) const {
  layers = std::min(layers, mean_abs_deviation.size());
  if (layers == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < layers; ++i) s += mean_abs_deviation[i];
  return s / static_cast<double>(layers);
}

CollapseReport collapse_simulate(std::size_t d, std::size_t width, std::size_t depth,
                                 std::size_t n_pairs, std::uint64_t master_seed,
                                 const CollapseOptions& options) {
  if (d < 2) throw DomainError("collapse_simulate: d must be at least 2");
  if (width < 8) throw DomainError("collapse_simulate: width must be at least 8");
  if (depth < 1) throw DomainError("collapse_simulate: depth must be at least 1");
  if (n_pairs < 2) throw DomainError("collapse_simulate: needs at least 2 pairs");

  CollapseReport rep;
  rep.d = d;
  rep.width = width;
  rep.depth = depth;
  rep.n_pairs = n_pairs;
  rep.seed = master_seed;

  // Column 2p is x_p, column 2p + 1 is y_p.
  Eigen::MatrixXd h(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(2 * n_pairs));
  for (std::size_t p = 0; p < n_pairs; ++p) {
    RngStream rng(derive_seed(master_seed, kPairTag), p);
    const Vector x = uniform_sphere(d, 1.0, rng);
    const Vector y = options.identical_pairs ? x : uniform_sphere(d, 1.0, rng);
    h.col(static_cast<Eigen::Index>(2 * p)) = x;
    h.col(static_cast<Eigen::Index>(2 * p + 1)) = y;
    rep.theta_0.push_back(std::acos(std::clamp(x.dot(y), -1.0, 1.0)));
  }

  std::vector<KernelTrace> tracks;
  tracks.reserve(n_pairs);
  for (double t0 : rep.theta_0) tracks.push_back(kernel_iterate(t0, depth));

  const std::uint64_t weight_seed = derive_seed(master_seed, kWeightTag);
  const std::uint64_t readout_seed = derive_seed(master_seed, kReadoutTag);
  const double readout_std = std::sqrt(2.0 / static_cast<double>(width));
  std::vector<double> prev_norm(n_pairs, 1.0);
  std::size_t fan_in = d;

  auto allocate = [&](std::vector<std::vector<double>>& table) {
    table.assign(depth, std::vector<double>(n_pairs, 0.0));
  };
  allocate(rep.cosine);
  allocate(rep.kernel);
  allocate(rep.norm);
  allocate(rep.gain);
  allocate(rep.constancy);
  rep.small_output.assign(n_pairs, false);

  for (std::size_t i = 1; i <= depth; ++i) {
    RngStream rng(weight_seed, i);
    const Matrix w = gaussian_matrix(width, fan_in, std::sqrt(2.0 / static_cast<double>(fan_in)), rng);
    h = (w * h).cwiseMax(0.0);

    // Readout of the depth-i prefix; at the last layer this is W_{depth+1}.
    RngStream readout_rng = i == depth ? RngStream(weight_seed, depth + 1) : RngStream(readout_seed, i);
    const Matrix readout = gaussian_matrix(1, width, readout_std, readout_rng);
    const Eigen::RowVectorXd outputs = readout.row(0) * h;

    const double width_scale =
        std::sqrt(static_cast<double>(fan_in) / static_cast<double>(width));
    for (std::size_t p = 0; p < n_pairs; ++p) {
      const auto cx = h.col(static_cast<Eigen::Index>(2 * p));
      const auto cy = h.col(static_cast<Eigen::Index>(2 * p + 1));
      const double nx = cx.norm();
      rep.cosine[i - 1][p] = safe_cosine(cx, cy);
      rep.kernel[i - 1][p] = tracks[p].steps[i - 1].rho;
      rep.norm[i - 1][p] = nx;
      rep.gain[i - 1][p] = prev_norm[p] > 0.0 ? nx / prev_norm[p] * width_scale : 0.0;
      prev_norm[p] = nx;
      const double fx = outputs[static_cast<Eigen::Index>(2 * p)];
      const double fy = outputs[static_cast<Eigen::Index>(2 * p + 1)];
      rep.constancy[i - 1][p] = std::abs(fx - fy) / (std::abs(fx) + 1e-12);
      if (i == depth) rep.small_output[p] = std::abs(fx) < 1e-6;
    }
    fan_in = width;
  }

  for (std::size_t i = 0; i < depth; ++i) {
    double dev = 0.0;
    for (std::size_t p = 0; p < n_pairs; ++p) dev += std::abs(rep.cosine[i][p] - rep.kernel[i][p]);
    rep.mean_abs_deviation.push_back(dev / static_cast<double>(n_pairs));
    rep.median_gain.push_back(median(rep.gain[i]));
    rep.median_norm.push_back(median(rep.norm[i]));
    rep.median_constancy.push_back(median(rep.constancy[i]));
  }
  return rep;
}

}  // namespace rrnet
