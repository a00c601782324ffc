#include "rrnet/adversarial.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "rrnet/parallel.hpp"
#include "rrnet/stats.hpp"

namespace rrnet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Walks t upward geometrically from `start` until `hit(t)` or t_max has been
// tried, then bisects the final bracket to width tol. Returns the hit end.
template <class Hit>
std::optional<double> bracket_and_bisect(double start, double t_max, double tol, Hit&& hit) {
  double lo = 0.0;
  std::optional<double> hi;
  for (double t = start;; t *= 2.0) {
    const double tt = std::min(t, t_max);
    if (hit(tt)) {
      hi = tt;
      break;
    }
    lo = tt;
    if (tt >= t_max) break;
  }
  if (!hi) return std::nullopt;
  while (*hi - lo > tol) {
    const double mid = lo + 0.5 * (*hi - lo);
    if (mid <= lo || mid >= *hi) break;  // bracket at floating-point resolution
    if (hit(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace

double paper_eta(std::size_t ell, double d, double delta, double grad_norm) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("paper_eta: delta must lie in (0, 1), got " + std::to_string(delta));
  }
  if (!(d >= 2.0)) throw DomainError("paper_eta: d must be at least 2");
  if (!(grad_norm > 0.0)) throw DomainError("paper_eta: gradient norm must be positive");
  return -(std::ldexp(1.0, static_cast<int>(ell)) * std::log(d) * std::sqrt(std::log(1.0 / delta))) /
         (grad_norm * grad_norm);
}

AttackResult flip_search(const Network& net, const Vector& x, double t_max, double tol,
                         double delta) {
  if (!(t_max > 0.0) || !(tol > 0.0)) throw DomainError("flip_search: t_max and tol must be positive");
  const ForwardTrace trace = forward(net, x);
  AttackResult r;
  r.f_x = trace.output;
  if (r.f_x == 0.0) throw DegenerateInput("flip_search: f(x) == 0");
  const Vector g = gradient(net, trace);
  r.grad_norm = g.norm();
  if (r.grad_norm == 0.0) throw DegenerateInput("flip_search: gradient vanishes at x");

  const double sign = r.f_x > 0.0 ? 1.0 : -1.0;
  r.direction = (-sign / r.grad_norm) * g;
  // The reference step is undefined for d < 2 (ln d <= 0); the search itself is not.
  const auto d = static_cast<double>(net.arch().input_dim);
  r.paper_eta = d >= 2.0 ? paper_eta(net.depth(), d, delta, r.grad_norm)
                         : std::numeric_limits<double>::quiet_NaN();

  double last_hit_value = 0.0;
  auto crossed = [&](double t) {
    ++r.evaluations;
    const double v = evaluate(net, x + t * r.direction);
    if (sign * v < 0.0) {
      last_hit_value = v;
      return true;
    }
    return false;
  };
  // bracket_and_bisect leaves `hi` at the last hit, so last_hit_value belongs to it.
  const auto hi = bracket_and_bisect(t_max * 1e-6, t_max, tol, crossed);
  if (!hi) return r;

  r.flipped = true;
  r.t_star = *hi;
  r.ratio = *hi / x.norm();
  r.magnitude_at_crossing = std::abs(last_hit_value) >= std::abs(r.f_x);
  return r;
}

AttackResult flip_search(const Network& net, const Vector& x) {
  const double n = x.norm();
  if (n == 0.0) throw DegenerateInput("flip_search: x == 0");
  return flip_search(net, x, 10.0 * n, 1e-6 * n);
}

Theorem1Check verify_theorem1(const Network& net, const Vector& x, double t_max, double tol) {
  Theorem1Check out;
  out.attack = flip_search(net, x, t_max, tol);
  out.flipped = out.attack.flipped;
  if (!out.flipped) return out;

  const AttackResult& a = out.attack;
  const double sign = a.f_x > 0.0 ? 1.0 : -1.0;
  const double t_star = *a.t_star;
  out.value_past_crossing = evaluate(net, x + (t_star + tol) * a.direction);

  auto both = [&](double t) {
    const double v = evaluate(net, x + t * a.direction);
    return sign * v < 0.0 && std::abs(v) >= std::abs(a.f_x);
  };
  std::optional<double> t_both;
  if (both(t_star)) {
    t_both = t_star;
  } else {
    // Continue from the crossing; the bracket's lower end is t_star.
    double lo = t_star;
    for (double t = 2.0 * t_star;; t *= 2.0) {
      const double tt = std::min(t, t_max);
      if (both(tt)) {
        t_both = tt;
        break;
      }
      lo = tt;
      if (tt >= t_max) break;
    }
    if (t_both) {
      while (*t_both - lo > tol) {
        const double mid = lo + 0.5 * (*t_both - lo);
        if (mid <= lo || mid >= *t_both) break;
        if (both(mid)) {
          t_both = mid;
        } else {
          lo = mid;
        }
      }
    }
  }
  out.magnitude_ok = t_both.has_value();
  if (t_both) {
    out.t_both = t_both;
    out.ratio = *t_both / x.norm();
  }
  return out;
}

std::vector<std::size_t> WidthRule::widths(std::size_t d, std::size_t ell) const {
  const auto w = static_cast<std::size_t>(std::llround(factor * static_cast<double>(d)));
  return std::vector<std::size_t>(ell, std::max<std::size_t>(1, w));
}

SweepTable dimension_sweep(const std::vector<std::size_t>& dims, std::size_t ell,
                           const WidthRule& width_rule, std::size_t trials,
                           std::uint64_t master_seed, std::size_t workers) {
  if (dims.empty()) throw DomainError("dimension_sweep: dims is empty");
  if (trials == 0) throw DomainError("dimension_sweep: trials must be positive");

  SweepTable table;
  table.trials.resize(dims.size() * trials);
  parallel_for(table.trials.size(), workers, [&](std::size_t idx) {
    const std::size_t j = idx / trials;
    const std::size_t k = idx % trials;
    const std::size_t d = dims[j];
    RngStream rng(master_seed, idx);
    const Architecture arch{d, width_rule.widths(d, ell)};
    const Network net = Network::sample(arch, InitMode::Standard, rng);
    const Vector x = uniform_sphere(d, std::sqrt(static_cast<double>(d)), rng);
    const AttackResult a = flip_search(net, x);

    SweepTrial& t = table.trials[idx];
    t.dim_index = j;
    t.d = d;
    t.trial = k;
    t.stream_id = idx;
    t.f_x = a.f_x;
    t.grad_norm = a.grad_norm;
    t.flipped = a.flipped;
    t.t_star = a.t_star.value_or(kNaN);
    t.ratio = a.ratio.value_or(kNaN);
    t.paper_eta = a.paper_eta;
    t.evaluations = a.evaluations;
  });

  std::vector<double> log_d, log_median;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    std::vector<double> ratios;
    SweepRow row;
    row.d = dims[j];
    row.trials = trials;
    std::size_t small = 0;
    for (std::size_t k = 0; k < trials; ++k) {
      const SweepTrial& t = table.trials[j * trials + k];
      if (!t.flipped) continue;
      ++row.flipped;
      ratios.push_back(t.ratio);
      if (t.ratio <= 0.5) ++small;
    }
    row.flip_rate = static_cast<double>(row.flipped) / static_cast<double>(trials);
    row.frac_ratio_le_half = static_cast<double>(small) / static_cast<double>(trials);
    row.ratio_q05 = quantile(ratios, 0.05);
    row.ratio_q25 = quantile(ratios, 0.25);
    row.ratio_median = quantile(ratios, 0.5);
    row.ratio_q75 = quantile(ratios, 0.75);
    row.ratio_q95 = quantile(ratios, 0.95);
    if (row.ratio_median > 0.0) {
      log_d.push_back(std::log(static_cast<double>(row.d)));
      log_median.push_back(std::log(row.ratio_median));
    }
    table.rows.push_back(row);
  }
  if (const auto fit = fit_line(log_d, log_median)) {
    table.slope = fit->slope;
    table.intercept = fit->intercept;
  }
  return table;
}

}  // namespace rrnet
