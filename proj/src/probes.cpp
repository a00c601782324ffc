#include "rrnet/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rrnet/parallel.hpp"

namespace rrnet {

namespace {

constexpr std::uint64_t kRandomMaskTag = 0x424d41534b53ULL;  // "BMASKS"

double fraction(std::size_t count, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total);
}

}  // namespace

std::vector<double> ProbeReport::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("no column '" + name + "' in " + this->name);
  const auto c = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[c]);
  return out;
}

Quantiles ProbeReport::summary(const std::string& column_name) const {
  return summarize(column(column_name));
}

ProbeReport probe_value_gradient(const Architecture& arch, std::size_t trials, double delta,
                                 std::uint64_t master_seed, double c, std::size_t workers) {
  arch.validate();
  if (trials < 100) throw DomainError("probe_value_gradient: needs at least 100 trials");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("probe_value_gradient: delta not in (0,1)");

  const std::size_t ell = arch.depth();
  const double grad_bound = std::ldexp(1.0, -static_cast<int>(ell + 1));
  const double value_bound =
      c * std::ldexp(1.0, static_cast<int>(ell)) * std::sqrt(std::log(1.0 / delta));
  const Vector x = Vector::Ones(static_cast<Eigen::Index>(arch.input_dim));

  ProbeReport rep;
  rep.name = "value_gradient";
  rep.parameters = {{"d", static_cast<double>(arch.input_dim)},
                    {"ell", static_cast<double>(ell)},
                    {"trials", static_cast<double>(trials)},
                    {"delta", delta},
                    {"c", c}};
  rep.columns = {"trial", "f_x", "abs_f", "grad_norm", "euler_residual", "grad_ok", "value_ok"};
  rep.bounds = {{"grad_lower", grad_bound}, {"value_upper", value_bound}};
  rep.rows.resize(trials);

  parallel_for(trials, workers, [&](std::size_t k) {
    RngStream rng(master_seed, k);
    const Network net = Network::sample(arch, InitMode::Standard, rng);
    const ForwardTrace tr = forward(net, x, TiePolicy::RandomizedTies, rng);
    const Vector g = gradient(net, tr);
    const double f = tr.output;
    const double euler = std::abs(f - g.dot(x)) / std::max(std::abs(f), 1e-300);
    const double gn = g.norm();
    rep.rows[k] = {static_cast<double>(k), f, std::abs(f), gn, euler,
                   gn >= grad_bound ? 1.0 : 0.0, std::abs(f) <= value_bound ? 1.0 : 0.0};
  });

  std::size_t grad_ok = 0, value_ok = 0, both_ok = 0;
  double max_euler = 0.0;
  for (const auto& row : rep.rows) {
    grad_ok += row[5] != 0.0;
    value_ok += row[6] != 0.0;
    both_ok += row[5] != 0.0 && row[6] != 0.0;
    max_euler = std::max(max_euler, row[4]);
  }
  rep.statistics = {{"freq_grad_bound", fraction(grad_ok, trials)},
                    {"freq_value_bound", fraction(value_ok, trials)},
                    {"max_euler_residual", max_euler}};
  rep.violation_frequency = 1.0 - fraction(both_ok, trials);
  return rep;
}

ProbeReport probe_scale_preservation(const Network& net, const Vector& x, double radius,
                                     std::size_t n_samples, RngStream& rng) {
  if (!(radius >= 0.0)) throw DomainError("probe_scale_preservation: radius must be >= 0");
  if (n_samples < 10) throw DomainError("probe_scale_preservation: needs at least 10 samples");
  const std::size_t ell = net.depth();
  const ForwardTrace tx = forward(net, x, net.tie_policy(), rng);

  std::vector<double> max_pre(ell, 0.0), max_post(ell, 0.0);
  double max_lipschitz = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector y = uniform_ball(x, radius, rng);
    const ForwardTrace ty = forward(net, y, net.tie_policy(), rng);
    for (std::size_t i = 0; i < ell; ++i) {
      max_pre[i] = std::max(max_pre[i], (tx.pre[i] - ty.pre[i]).norm());
      max_post[i] = std::max(max_post[i], (tx.post[i] - ty.post[i]).norm());
    }
    const double dist = (x - y).norm();
    if (ell >= 1 && dist > 0.0) {
      max_lipschitz = std::max(max_lipschitz, (tx.pre[0] - ty.pre[0]).norm() / dist);
    }
  }

  ProbeReport rep;
  rep.name = "scale_preservation";
  rep.parameters = {{"radius", radius},
                    {"n_samples", static_cast<double>(n_samples)},
                    {"ell", static_cast<double>(ell)},
                    {"d", static_cast<double>(net.arch().input_dim)}};
  rep.columns = {"layer", "image_norm", "norm_bound", "max_pre_dist", "max_post_dist", "violated"};
  const double scale = radius > 0.0 ? radius : 1.0;
  std::size_t violations = 0;
  for (std::size_t i = 1; i <= ell; ++i) {
    const double norm = tx.post[i - 1].norm();
    const double bound = std::sqrt(static_cast<double>(net.arch().width(i))) /
                         std::ldexp(1.0, static_cast<int>(i));
    const bool violated = norm < bound;
    violations += violated;
    rep.rows.push_back({static_cast<double>(i), norm, bound, max_pre[i - 1] / scale,
                        max_post[i - 1] / scale, violated ? 1.0 : 0.0});
  }
  if (ell >= 1) {
    rep.statistics["layer1_spectral_norm"] = spectral_norm(net.layer(1), 1e-10, 100000);
    rep.statistics["layer1_max_lipschitz"] = max_lipschitz;
  }
  rep.statistics["violations"] = static_cast<double>(violations);
  rep.violation_frequency = fraction(violations, ell);
  return rep;
}

ProbeReport probe_activation_margin(const Network& net, const Vector& x, double alpha) {
  const double alpha_max = std::sqrt(std::numbers::pi / 8.0);
  if (!(alpha >= 0.0 && alpha < alpha_max)) {
    throw DomainError("probe_activation_margin: alpha must lie in [0, sqrt(pi/8))");
  }
  const std::size_t ell = net.depth();
  const ForwardTrace tx = forward(net, x);
  const double keep = 1.0 - 2.0 * std::sqrt(2.0 / std::numbers::pi) * alpha;

  ProbeReport rep;
  rep.name = "activation_margin";
  rep.parameters = {{"alpha", alpha}, {"ell", static_cast<double>(ell)}};
  rep.columns = {"layer", "count", "bound", "fan_out", "violated", "readout"};
  rep.bounds = {{"keep_fraction", keep}};

  std::size_t eligible = 0, violations = 0;
  double readout_violated = 0.0;
  for (std::size_t i = 1; i <= ell; ++i) {
    const Vector& fi = tx.post[i - 1];
    const double norm = fi.norm();
    if (norm == 0.0) {
      throw DegenerateInput("probe_activation_margin: layer " + std::to_string(i) + " image is zero");
    }
    const double threshold = alpha * norm / std::sqrt(static_cast<double>(net.arch().width(i)));
    const Vector inner = net.layer(i + 1) * fi;
    const auto count = static_cast<std::size_t>((inner.array().abs() >= threshold).count());
    const std::size_t fan_out = net.arch().width(i + 1);
    const double bound = keep * static_cast<double>(fan_out);
    const bool violated = static_cast<double>(count) < bound;
    const bool readout = fan_out == 1;
    if (readout) {
      readout_violated = violated ? 1.0 : 0.0;
    } else {
      ++eligible;
      violations += violated;
    }
    rep.rows.push_back({static_cast<double>(i), static_cast<double>(count), bound,
                        static_cast<double>(fan_out), violated ? 1.0 : 0.0, readout ? 1.0 : 0.0});
  }
  rep.statistics = {{"eligible_layers", static_cast<double>(eligible)},
                    {"violations", static_cast<double>(violations)},
                    {"readout_violated", readout_violated}};
  rep.violation_frequency = fraction(violations, eligible);
  return rep;
}

ProbeReport probe_gradient_smoothness(const Network& net, const Vector& x, double radius,
                                      std::size_t n_samples, RngStream& rng) {
  if (!(radius >= 0.0)) throw DomainError("probe_gradient_smoothness: radius must be >= 0");
  if (n_samples < 10) throw DomainError("probe_gradient_smoothness: needs at least 10 samples");
  const std::size_t ell = net.depth();
  const ForwardTrace tx = forward(net, x, net.tie_policy(), rng);
  const double grad_norm = gradient(net, tx).norm();
  const double log_dmax = std::log(static_cast<double>(net.arch().max_width()));

  ProbeReport rep;
  rep.name = "gradient_smoothness";
  rep.parameters = {{"radius", radius},
                    {"n_samples", static_cast<double>(n_samples)},
                    {"ell", static_cast<double>(ell)},
                    {"d", static_cast<double>(net.arch().input_dim)}};
  rep.columns = {"sample", "dist", "grad_diff", "ratio", "sum_term_norms"};
  for (std::size_t j = 1; j <= ell; ++j) rep.columns.push_back("term_norm_" + std::to_string(j));
  for (std::size_t j = 1; j <= ell; ++j) rep.columns.push_back("flips_" + std::to_string(j));

  std::size_t triangle_violations = 0;
  double max_ratio = 0.0, fitted_c = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector y = uniform_ball(x, radius, rng);
    const ForwardTrace ty = forward(net, y, net.tie_policy(), rng);
    const GradDecomposition dec = grad_difference_decomposition(net, tx, ty);
    const double diff = (dec.grad_x - dec.grad_y).norm();
    double sum_terms = 0.0;
    std::vector<double> row = {static_cast<double>(s), (x - y).norm(), diff,
                               grad_norm > 0.0 ? diff / grad_norm : 0.0, 0.0};
    for (const auto& t : dec.terms) {
      const double n = t.norm();
      sum_terms += n;
      row.push_back(n);
    }
    for (std::size_t j = 0; j < ell; ++j) {
      row.push_back(static_cast<double>((tx.masks[j] != ty.masks[j]).count()));
    }
    row[4] = sum_terms;
    // Exact identity up to rounding in the term sums.
    if (sum_terms < diff * (1.0 - 1e-12)) ++triangle_violations;
    max_ratio = std::max(max_ratio, row[3]);
    if (ell >= 1 && diff > 0.0) {
      fitted_c = std::max(fitted_c, std::pow(diff, 1.0 / static_cast<double>(ell)) * log_dmax);
    }
    rep.rows.push_back(std::move(row));
  }
  rep.bounds = {{"rate_unit_constant", ell >= 1 ? std::pow(log_dmax, -static_cast<double>(ell)) : 0.0}};
  rep.statistics = {{"grad_norm_x", grad_norm},
                    {"max_ratio", max_ratio},
                    {"fitted_C", fitted_c},
                    {"triangle_violations", static_cast<double>(triangle_violations)}};
  rep.violation_frequency = fraction(triangle_violations, n_samples);
  return rep;
}

double masked_segment_norm(const Network& net, const std::vector<Mask>& masks, std::size_t upper,
                           std::size_t lower, double tol, std::size_t max_iters) {
  if (!(upper > lower) || upper > net.depth()) {
    throw DomainError("masked_segment_norm: need depth >= upper > lower");
  }
  LinearOperator op;
  op.rows = net.arch().width(upper);
  op.cols = net.arch().width(lower);
  op.apply = [&](const Vector& v) {
    Vector h = v;
    for (std::size_t k = lower + 1; k <= upper; ++k) {
      h = (net.layer(k) * h).cwiseProduct(masks[k - 1].cast<double>().matrix());
    }
    return h;
  };
  op.apply_transpose = [&](const Vector& u) {
    Vector h = u;
    for (std::size_t k = upper; k > lower; --k) {
      h = net.layer(k).transpose() * h.cwiseProduct(masks[k - 1].cast<double>().matrix());
    }
    return h;
  };
  return spectral_norm(op, tol, max_iters);
}

ProbeReport probe_segment_spectral(const Network& net, const Vector& x, double radius,
                                   std::size_t n_samples, RngStream& rng, double C) {
  const BottleneckDecomposition bd = bottleneck_decomposition(net.arch());
  if (bd.size() < 2) {
    throw DomainError("probe_segment_spectral: needs at least two bottleneck layers");
  }
  if (!(radius >= 0.0)) throw DomainError("probe_segment_spectral: radius must be >= 0");
  const double ell = static_cast<double>(net.depth());
  const double log_dmax = std::log(static_cast<double>(net.arch().max_width()));
  const double base = C * ell * log_dmax;

  ProbeReport rep;
  rep.name = "segment_spectral";
  rep.parameters = {{"radius", radius}, {"n_samples", static_cast<double>(n_samples)}, {"C", C}};
  rep.columns = {"sample", "upper", "lower", "norm", "bound", "violated"};

  std::size_t violations = 0;
  double fitted_c = 0.0, max_norm = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector y = uniform_ball(x, radius, rng);
    const ForwardTrace ty = forward(net, y, net.tie_policy(), rng);
    for (std::size_t j = 0; j + 1 < bd.size(); ++j) {
      const std::size_t upper = bd.indices[j];
      const std::size_t lower = bd.indices[j + 1];
      const double len = static_cast<double>(upper - lower);
      const double norm = masked_segment_norm(net, ty.masks, upper, lower);
      const double bound = std::pow(base, len / 2.0);
      const bool violated = norm > bound;
      violations += violated;
      max_norm = std::max(max_norm, norm);
      fitted_c = std::max(fitted_c, std::pow(norm, 2.0 / len) / (ell * log_dmax));
      rep.rows.push_back({static_cast<double>(s), static_cast<double>(upper),
                          static_cast<double>(lower), norm, bound, violated ? 1.0 : 0.0});
    }
  }
  rep.bounds = {{"base", base}};
  rep.statistics = {{"fitted_C", fitted_c}, {"max_norm", max_norm}};
  rep.violation_frequency = fraction(violations, rep.rows.size());
  return rep;
}

SignFlipResult probe_sign_flip(const Vector& x, const Vector& y, std::size_t n_draws,
                               RngStream& rng) {
  if (x.size() != y.size()) throw DomainError("probe_sign_flip: dimension mismatch");
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) throw DegenerateInput("probe_sign_flip: zero vector");
  if (n_draws == 0) throw DomainError("probe_sign_flip: n_draws must be positive");

  SignFlipResult out;
  out.n_draws = n_draws;
  out.R = nx;
  out.r = (x - y).norm();
  const double cosine = std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
  out.oracle = std::acos(cosine) / std::numbers::pi;
  out.std_error = std::sqrt(out.oracle * (1.0 - out.oracle) / static_cast<double>(n_draws));
  if (out.r == 0.0) {
    out.bound = 0.0;
  } else if (out.r <= out.R) {
    out.bound = 3.0 * out.r / out.R * std::sqrt(std::log(out.R / out.r));
  }

  std::size_t flips = 0;
  Vector w(x.size());
  for (std::size_t k = 0; k < n_draws; ++k) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
    const double a = w.dot(x);
    const double b = w.dot(y);
    if ((a > 0.0) != (b > 0.0) || (a == 0.0) != (b == 0.0)) ++flips;
  }
  out.empirical = fraction(flips, n_draws);
  return out;
}

DistEquivResult probe_dist_equiv(const Architecture& arch, const Vector& x, std::size_t trials,
                                 std::uint64_t master_seed, double mask_prob,
                                 std::size_t workers) {
  arch.validate();
  if (trials < 1000) throw DomainError("probe_dist_equiv: needs at least 1000 trials");
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) throw DomainError("probe_dist_equiv: bad mask_prob");

  DistEquivResult out;
  out.sample_data_masks.resize(trials);
  out.sample_random_masks.resize(trials);
  const std::uint64_t random_seed = derive_seed(master_seed, kRandomMaskTag);
  const std::size_t ell = arch.depth();

  parallel_for(trials, workers, [&](std::size_t k) {
    RngStream rng(master_seed, k);
    const Network net = Network::sample(arch, InitMode::Standard, rng);
    const ForwardTrace tr = forward(net, x, TiePolicy::RandomizedTies, rng);
    out.sample_data_masks[k] = gradient(net, tr).norm();

    RngStream rng_b(random_seed, k);
    const Network other = Network::sample(arch, InitMode::Standard, rng_b);
    Eigen::RowVectorXd g = other.layer(ell + 1).row(0);
    for (std::size_t i = ell; i >= 1; --i) {
      Eigen::RowVectorXd masked = g;
      for (Eigen::Index j = 0; j < masked.size(); ++j) {
        if (!rng_b.bernoulli(mask_prob)) masked[j] = 0.0;
      }
      g = masked * other.layer(i);
    }
    out.sample_random_masks[k] = g.norm();
  });

  out.ks_statistic = ks_two_sample(out.sample_data_masks, out.sample_random_masks);
  out.threshold = ks_critical_value(0.01, trials, trials);
  out.pass = out.ks_statistic < out.threshold;
  return out;
}

GaussianSpectralResult probe_gaussian_spectral(std::size_t m, std::size_t n, double delta,
                                               std::size_t samples, std::uint64_t master_seed,
                                               std::size_t workers) {
  if (m == 0 || n == 0) throw DomainError("probe_gaussian_spectral: empty shape");
  if (samples < 100) throw DomainError("probe_gaussian_spectral: needs at least 100 samples");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("probe_gaussian_spectral: delta not in (0,1)");

  GaussianSpectralResult out;
  const double sm = std::sqrt(static_cast<double>(m));
  const double sn = std::sqrt(static_cast<double>(n));
  out.bound = 3.0 * (sm + sn + std::sqrt(std::log(1.0 / delta)));
  out.norms.resize(samples);
  parallel_for(samples, workers, [&](std::size_t k) {
    RngStream rng(master_seed, k);
    out.norms[k] = spectral_norm(gaussian_matrix(m, n, 1.0, rng), 1e-9, 200000);
  });
  double sum = 0.0;
  for (double v : out.norms) {
    out.violations += v > out.bound;
    sum += v / (sm + sn);
  }
  out.mean_edge_ratio = sum / static_cast<double>(samples);
  return out;
}

}  // namespace rrnet
