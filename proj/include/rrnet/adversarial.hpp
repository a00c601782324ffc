#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "rrnet/network.hpp"

namespace rrnet {

struct AttackResult {
  double f_x = 0.0;
  double grad_norm = 0.0;
  /// -sign(f(x)) grad f(x) / |grad f(x)|.
  Vector direction;
  /// Smallest located step with a strictly opposite output sign; within `tol`
  /// above the crossing. Absent when no sign change was found up to t_max.
  std::optional<double> t_star;
  /// t_star / |x|.
  std::optional<double> ratio;
  /// Reference step length from the existence proof (multiplies grad f, not the unit
  /// direction). NaN when d < 2.
  double paper_eta = 0.0;
  bool flipped = false;
  /// |f(x + t_star direction)| >= |f(x)| at the crossing itself.
  std::optional<bool> magnitude_at_crossing;
  std::size_t evaluations = 0;
};

/// Bracket-and-bisect search along the descent direction of |f|.
///
/// Steps t = t_max * 1e-6 * 2^k until f(x + t direction) has the strictly
/// opposite sign of f(x) or t passes t_max (t_max itself is always tried),
/// then bisects the last bracket down to width `tol`.
/// Throws DegenerateInput when f(x) == 0 or grad f(x) == 0.
AttackResult flip_search(const Network& net, const Vector& x, double t_max, double tol,
                         double delta = 0.01);

/// Default budget t_max = 10 |x| and tolerance 1e-6 |x|.
AttackResult flip_search(const Network& net, const Vector& x);

/// -(2^ell ln d sqrt(ln 1/delta)) / |grad f(x)|^2.
/// `d` is real so that closed-form checks can use non-integer dimensions. Throws
/// DomainError unless d >= 2, 0 < delta < 1 and grad_norm > 0.
double paper_eta(std::size_t ell, double d, double delta, double grad_norm);

struct Theorem1Check {
  bool flipped = false;
  /// Whether some t <= t_max gives both an opposite sign and |f| >= |f(x)|.
  /// Absent when the sign never flipped.
  std::optional<bool> magnitude_ok;
  /// f(x + (t_star + tol) direction), just past the crossing.
  std::optional<double> value_past_crossing;
  /// First located step (within tol) where both conditions hold.
  std::optional<double> t_both;
  /// t_both / |x|.
  std::optional<double> ratio;
  AttackResult attack;
};

Theorem1Check verify_theorem1(const Network& net, const Vector& x, double t_max, double tol);

/// Hidden widths as a function of the input dimension: round(factor * d) each.
struct WidthRule {
  double factor = 1.0;
  std::vector<std::size_t> widths(std::size_t d, std::size_t ell) const;
};

struct SweepTrial {
  std::size_t dim_index = 0;
  std::size_t d = 0;
  std::size_t trial = 0;
  std::uint64_t stream_id = 0;
  double f_x = 0.0;
  double grad_norm = 0.0;
  bool flipped = false;
  double t_star = 0.0;  // NaN when not flipped
  double ratio = 0.0;   // NaN when not flipped
  double paper_eta = 0.0;
  std::size_t evaluations = 0;
};

struct SweepRow {
  std::size_t d = 0;
  std::size_t trials = 0;
  std::size_t flipped = 0;
  double flip_rate = 0.0;
  double ratio_q05 = 0.0, ratio_q25 = 0.0, ratio_median = 0.0, ratio_q75 = 0.0, ratio_q95 = 0.0;
  /// Fraction of trials (flipped or not) with ratio <= 0.5.
  double frac_ratio_le_half = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::vector<SweepTrial> trials;
  /// Least-squares slope of ln(median ratio) against ln(d); absent with fewer
  /// than two usable dimensions.
  std::optional<double> slope;
  std::optional<double> intercept;
};

/// For each d, `trials` independent (Standard network, x uniform on the sphere of
/// radius sqrt(d)) pairs. Trial k of dimension index j uses RngStream(master_seed,
/// j * trials + k): the network is drawn first, then x.
SweepTable dimension_sweep(const std::vector<std::size_t>& dims, std::size_t ell,
                           const WidthRule& width_rule, std::size_t trials,
                           std::uint64_t master_seed, std::size_t workers = 1);

}  // namespace rrnet
