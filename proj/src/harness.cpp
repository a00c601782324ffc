#include "rrnet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "rrnet/adversarial.hpp"
#include "rrnet/collapse.hpp"
#include "rrnet/parallel.hpp"
#include "rrnet/probes.hpp"
#include "rrnet/stats.hpp"

#ifndef RRNET_VERSION
#define RRNET_VERSION "v0.1.0"
#endif

namespace rrnet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string> kExecutionKeys = {"workers", "out_dir", "format"};
const std::vector<std::string> kCommonKeys = {"seed", "workers", "out_dir", "format",
                                              "alert_level"};
const std::vector<std::string> kArchKeys = {"d", "ell", "width", "widths", "mode"};

const std::map<std::string, std::vector<std::string>>& kind_keys() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"sample", {"tie_policy", "output"}},
      {"attack", {"trials", "t_max", "tol", "delta", "network"}},
      {"sweep", {"dims", "ell", "width_factor", "trials"}},
      {"probe:value_gradient", {"trials", "delta", "c"}},
      {"probe:scale_preservation", {"trials", "radius", "n_samples"}},
      {"probe:activation_margin", {"trials", "alpha"}},
      {"probe:gradient_smoothness", {"trials", "radius", "n_samples"}},
      {"probe:segment_spectral", {"trials", "radius", "n_samples", "C"}},
      {"probe:sign_flip", {"trials", "ratios", "n_draws"}},
      {"probe:dist_equiv", {"trials", "mask_prob"}},
      {"probe:gaussian_spectral", {"m", "n", "delta", "samples"}},
      {"collapse", {"d", "width", "depth", "n_pairs"}},
      {"kernel", {"theta_0", "steps"}},
  };
  return table;
}

bool uses_arch_keys(const std::string& kind) {
  return kind == "sample" || kind == "attack" || kind == "probe:value_gradient" ||
         kind == "probe:scale_preservation" || kind == "probe:activation_margin" ||
         kind == "probe:gradient_smoothness" || kind == "probe:segment_spectral" ||
         kind == "probe:dist_equiv";
}

std::string stem_of(const std::string& kind) {
  std::string s = kind;
  std::replace(s.begin(), s.end(), ':', '_');
  return s;
}

/// Typed, validated access to config params. Every resolved value (defaults
/// included) is recorded so the summary echoes exactly what ran.
class Params {
 public:
  explicit Params(const ExperimentConfig& cfg) : cfg_(cfg) {}

  bool has(const std::string& key) const { return cfg_.params.contains(key); }

  std::uint64_t seed() {
    const std::uint64_t s = as_count("seed", lookup("seed", Json(0)));
    echo_["seed"] = s;
    return s;
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 1) {
    const std::size_t v = as_count(key, lookup(key, Json(fallback)));
    if (v < min) throw ConfigError(key, "must be at least " + std::to_string(min));
    echo_[key] = v;
    return v;
  }

  double real(const std::string& key, double fallback) {
    const Json& v = lookup(key, Json(fallback));
    if (!v.is_number()) throw ConfigError(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(key, "must be finite");
    echo_[key] = x;
    return x;
  }

  double probability(const std::string& key, double fallback) {
    const double x = real(key, fallback);
    if (!(x > 0.0 && x < 1.0)) throw ConfigError(key, "must lie in (0, 1)");
    return x;
  }

  double nonnegative(const std::string& key, double fallback) {
    const double x = real(key, fallback);
    if (x < 0.0) throw ConfigError(key, "must be >= 0");
    return x;
  }

  double positive(const std::string& key, double fallback) {
    const double x = real(key, fallback);
    if (!(x > 0.0)) throw ConfigError(key, "must be > 0");
    return x;
  }

  std::vector<std::size_t> counts(const std::string& key, const std::vector<std::size_t>& fallback) {
    const Json& v = lookup(key, Json(fallback));
    if (!v.is_array()) throw ConfigError(key, "must be a list of positive integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      const std::size_t c = as_count(key, e);
      if (c == 0) throw ConfigError(key, "entries must be positive");
      out.push_back(c);
    }
    echo_[key] = out;
    return out;
  }

  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback) {
    const Json& v = lookup(key, Json(fallback));
    if (!v.is_array()) throw ConfigError(key, "must be a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(key, "entries must be numbers");
      out.push_back(e.get<double>());
    }
    echo_[key] = out;
    return out;
  }

  std::string text(const std::string& key, const std::string& fallback,
                   const std::vector<std::string>& choices = {}) {
    const Json& v = lookup(key, Json(fallback));
    if (!v.is_string()) throw ConfigError(key, "must be a string");
    const auto s = v.get<std::string>();
    if (!choices.empty() && std::find(choices.begin(), choices.end(), s) == choices.end()) {
      std::string msg = "must be one of";
      for (const auto& c : choices) msg += " " + c;
      throw ConfigError(key, msg);
    }
    echo_[key] = s;
    return s;
  }

  /// `halving` gives widths d/2, d/4 when no width key is set, so that the
  /// architecture has more than one bottleneck.
  Architecture architecture(bool halving = false) {
    Architecture arch;
    arch.input_dim = count("d", 100);
    if (halving && !has("widths") && !has("ell") && !has("width")) {
      arch.hidden_widths = {std::max<std::size_t>(1, arch.input_dim / 2),
                            std::max<std::size_t>(1, arch.input_dim / 4)};
      echo_["widths"] = arch.hidden_widths;
    } else if (has("widths")) {
      arch.hidden_widths = counts("widths", {});
    } else {
      const std::size_t ell = count("ell", 2, 0);
      const std::size_t width = count("width", arch.input_dim);
      arch.hidden_widths.assign(ell, width);
    }
    return arch;
  }

  InitMode mode() {
    return text("mode", "standard", {"standard", "depth_collapse"}) == "standard"
               ? InitMode::Standard
               : InitMode::DepthCollapse;
  }

  const Json& echo() const { return echo_; }

 private:
  const Json& lookup(const std::string& key, Json fallback) {
    if (cfg_.params.contains(key)) return cfg_.params.at(key);
    defaults_.push_back(std::move(fallback));
    return defaults_.back();
  }

  static std::size_t as_count(const std::string& key, const Json& v) {
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer()) {
      if (v.get<std::int64_t>() < 0) throw ConfigError(key, "must be non-negative");
      return static_cast<std::size_t>(v.get<std::int64_t>());
    }
    if (v.is_number_float()) {
      const double x = v.get<double>();
      if (x >= 0.0 && x == std::floor(x) && x < 9.0e15) return static_cast<std::size_t>(x);
    }
    throw ConfigError(key, "must be a non-negative integer");
  }

  const ExperimentConfig& cfg_;
  std::deque<Json> defaults_;  // stable addresses for the references lookup() hands out
  Json echo_ = Json::object();
};

Json quantiles_json(std::span<const double> v) {
  const Quantiles q = summarize(v);
  return Json{{"min", q.min}, {"p01", q.p01}, {"p50", q.p50}, {"p99", q.p99}, {"max", q.max}};
}

Json map_json(const std::map<std::string, double>& m) {
  Json j = Json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

double optional_or_nan(const std::optional<double>& v) { return v.value_or(kNaN); }

double flag(bool b) { return b ? 1.0 : 0.0; }

struct KindOutput {
  std::vector<std::string> columns;
  std::vector<TrialRecord> rows;
  Json summary = Json::object();
  double violation_frequency = kNaN;  // NaN: no alert semantics
};

// ---------------------------------------------------------------------------

KindOutput run_attack(Params& p, std::uint64_t seed, std::size_t workers) {
  std::optional<Network> loaded;
  Architecture arch;
  InitMode mode = InitMode::Standard;
  if (p.has("network")) {
    for (const auto& key : kArchKeys) {
      if (p.has(key)) throw ConfigError(key, "cannot be combined with 'network'");
    }
    const std::string path = p.text("network", "");
    loaded = load_network(path);
    arch = loaded->arch();
  } else {
    arch = p.architecture();
    mode = p.mode();
  }
  const std::size_t trials = p.count("trials", 1);
  const double t_max = p.positive("t_max", 10.0);
  const double tol = p.positive("tol", 1e-6);
  const double delta = p.probability("delta", 0.01);

  KindOutput out;
  out.columns = {"f_x", "grad_norm", "t_star", "ratio", "paper_eta", "flipped",
                 "magnitude_at_crossing", "value_past_crossing", "t_both", "ratio_both",
                 "magnitude_ok", "evaluations"};
  out.rows.resize(trials);
  parallel_for(trials, workers, [&](std::size_t k) {
    RngStream rng(seed, k);
    const Network net = loaded ? *loaded : Network::sample(arch, mode, rng);
    const Vector x = uniform_sphere(arch.input_dim, std::sqrt(static_cast<double>(arch.input_dim)), rng);
    const double nx = x.norm();
    const Theorem1Check chk = verify_theorem1(net, x, t_max * nx, tol * nx);
    const AttackResult& a = chk.attack;
    const double eta = paper_eta(net.depth(), static_cast<double>(arch.input_dim), delta, a.grad_norm);
    TrialRecord& r = out.rows[k];
    r.index = k;
    r.seed = k;
    r.values = {a.f_x,
                a.grad_norm,
                optional_or_nan(a.t_star),
                optional_or_nan(a.ratio),
                eta,
                flag(a.flipped),
                a.magnitude_at_crossing ? flag(*a.magnitude_at_crossing) : kNaN,
                optional_or_nan(chk.value_past_crossing),
                optional_or_nan(chk.t_both),
                optional_or_nan(chk.ratio),
                chk.magnitude_ok ? flag(*chk.magnitude_ok) : kNaN,
                static_cast<double>(a.evaluations)};
    r.status = a.flipped ? "ok" : "not_flipped";
  });

  std::vector<double> ratios;
  std::size_t flipped = 0, both = 0;
  for (const auto& r : out.rows) {
    if (r.values[5] != 0.0) {
      ++flipped;
      ratios.push_back(r.values[3]);
    }
    if (r.values[10] == 1.0) ++both;
  }
  out.summary["trials"] = trials;
  out.summary["flip_rate"] = static_cast<double>(flipped) / static_cast<double>(trials);
  out.summary["both_conditions_rate"] = static_cast<double>(both) / static_cast<double>(trials);
  out.summary["ratio"] = quantiles_json(ratios);
  return out;
}

KindOutput run_sweep(Params& p, std::uint64_t seed, std::size_t workers) {
  const auto dims = p.counts("dims", {});
  if (dims.empty()) throw ConfigError("dims", "must list at least one dimension");
  const std::size_t ell = p.count("ell", 2, 0);
  const double factor = p.positive("width_factor", 1.0);
  const std::size_t trials = p.count("trials", 200, 30);

  const SweepTable table = dimension_sweep(dims, ell, WidthRule{factor}, trials, seed, workers);
  KindOutput out;
  out.columns = {"d", "trial_in_dim", "f_x", "grad_norm", "flipped", "t_star", "ratio",
                 "paper_eta", "evaluations"};
  for (std::size_t i = 0; i < table.trials.size(); ++i) {
    const SweepTrial& t = table.trials[i];
    TrialRecord r;
    r.index = i;
    r.seed = t.stream_id;
    r.values = {static_cast<double>(t.d), static_cast<double>(t.trial), t.f_x, t.grad_norm,
                flag(t.flipped), t.t_star, t.ratio, t.paper_eta, static_cast<double>(t.evaluations)};
    r.status = t.flipped ? "ok" : "not_flipped";
    out.rows.push_back(std::move(r));
  }
  Json rows = Json::array();
  for (const SweepRow& row : table.rows) {
    rows.push_back(Json{{"d", row.d},
                        {"trials", row.trials},
                        {"flipped", row.flipped},
                        {"flip_rate", row.flip_rate},
                        {"frac_ratio_le_half", row.frac_ratio_le_half},
                        {"ratio_q05", row.ratio_q05},
                        {"ratio_q25", row.ratio_q25},
                        {"ratio_median", row.ratio_median},
                        {"ratio_q75", row.ratio_q75},
                        {"ratio_q95", row.ratio_q95}});
  }
  out.summary["table"] = rows;
  out.summary["slope"] = table.slope ? Json(*table.slope) : Json(nullptr);
  out.summary["intercept"] = table.intercept ? Json(*table.intercept) : Json(nullptr);
  return out;
}

// Probes that run once per sampled network and produce a ProbeReport each.
template <class PerNet>
KindOutput run_per_net_probe(Params& p, const Architecture& arch, std::uint64_t seed,
                             std::size_t workers, std::size_t default_trials, PerNet&& per_net) {
  const InitMode mode = p.mode();
  const std::size_t trials = p.count("trials", default_trials);
  std::vector<ProbeReport> reports(trials);
  parallel_for(trials, workers, [&](std::size_t k) {
    RngStream rng(seed, k);
    const Network net = Network::sample(arch, mode, rng);
    const Vector x = uniform_sphere(arch.input_dim, std::sqrt(static_cast<double>(arch.input_dim)), rng);
    reports[k] = per_net(net, x, rng);
  });

  KindOutput out;
  out.columns.push_back("net");
  for (const auto& c : reports.front().columns) out.columns.push_back(c);
  std::size_t index = 0;
  double violation_sum = 0.0;
  std::map<std::string, std::vector<double>> stats;
  for (std::size_t k = 0; k < trials; ++k) {
    for (const auto& row : reports[k].rows) {
      TrialRecord r;
      r.index = index++;
      r.seed = k;
      r.values.push_back(static_cast<double>(k));
      r.values.insert(r.values.end(), row.begin(), row.end());
      out.rows.push_back(std::move(r));
    }
    violation_sum += reports[k].violation_frequency;
    for (const auto& [name, v] : reports[k].statistics) stats[name].push_back(v);
  }
  out.violation_frequency = violation_sum / static_cast<double>(trials);
  out.summary["nets"] = trials;
  out.summary["parameters"] = map_json(reports.front().parameters);
  out.summary["bounds"] = map_json(reports.front().bounds);
  Json st = Json::object();
  for (const auto& [name, values] : stats) st[name] = quantiles_json(values);
  out.summary["statistics"] = st;
  out.summary["violation_frequency"] = out.violation_frequency;
  return out;
}

KindOutput run_value_gradient(Params& p, std::uint64_t seed, std::size_t workers) {
  const Architecture arch = p.architecture();
  const std::size_t trials = p.count("trials", 1000, 100);
  const double delta = p.probability("delta", 0.01);
  const double c = p.positive("c", 8.0);
  const ProbeReport rep = probe_value_gradient(arch, trials, delta, seed, c, workers);
  KindOutput out;
  out.columns.assign(rep.columns.begin() + 1, rep.columns.end());
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    TrialRecord r;
    r.index = k;
    r.seed = k;
    r.values.assign(rep.rows[k].begin() + 1, rep.rows[k].end());
    out.rows.push_back(std::move(r));
  }
  out.violation_frequency = rep.violation_frequency;
  out.summary["bounds"] = map_json(rep.bounds);
  out.summary["statistics"] = map_json(rep.statistics);
  out.summary["abs_f"] = quantiles_json(rep.column("abs_f"));
  out.summary["grad_norm"] = quantiles_json(rep.column("grad_norm"));
  out.summary["violation_frequency"] = rep.violation_frequency;
  return out;
}

KindOutput run_sign_flip(Params& p, std::uint64_t seed, std::size_t workers) {
  const std::size_t d = p.count("d", 50, 2);
  const std::size_t trials = p.count("trials", 20);
  const auto ratios = p.reals("ratios", {0.01, 0.05, 0.1});
  if (ratios.empty()) throw ConfigError("ratios", "must list at least one ratio");
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("ratios", "entries must be positive");
  }
  const std::size_t n_draws = p.count("n_draws", 100000);

  KindOutput out;
  out.columns = {"r_over_R", "empirical", "oracle", "std_error", "bound", "z_score",
                 "within_3se", "below_bound"};
  out.rows.resize(trials);
  parallel_for(trials, workers, [&](std::size_t k) {
    RngStream rng(seed, k);
    const double rel = ratios[k % ratios.size()];
    const Vector x = uniform_sphere(d, std::sqrt(static_cast<double>(d)), rng);
    const Vector y = x + uniform_sphere(d, rel * x.norm(), rng);
    const SignFlipResult s = probe_sign_flip(x, y, n_draws, rng);
    const double z = s.std_error > 0.0 ? (s.empirical - s.oracle) / s.std_error : 0.0;
    TrialRecord& r = out.rows[k];
    r.index = k;
    r.seed = k;
    r.values = {s.r / s.R,
                s.empirical,
                s.oracle,
                s.std_error,
                optional_or_nan(s.bound),
                z,
                flag(std::abs(s.empirical - s.oracle) <= 3.0 * s.std_error),
                s.bound ? flag(s.empirical <= *s.bound) : kNaN};
  });
  std::size_t below = 0, within = 0;
  for (const auto& r : out.rows) {
    below += r.values[7] == 1.0;
    within += r.values[6] == 1.0;
  }
  out.violation_frequency = 1.0 - static_cast<double>(below) / static_cast<double>(trials);
  out.summary["pairs"] = trials;
  out.summary["frac_below_bound"] = static_cast<double>(below) / static_cast<double>(trials);
  out.summary["frac_within_3se"] = static_cast<double>(within) / static_cast<double>(trials);
  out.summary["violation_frequency"] = out.violation_frequency;
  return out;
}

KindOutput run_dist_equiv(Params& p, std::uint64_t seed, std::size_t workers) {
  const Architecture arch = p.architecture();
  const std::size_t trials = p.count("trials", 2000, 1000);
  const double mask_prob = p.real("mask_prob", 0.5);
  if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) throw ConfigError("mask_prob", "must lie in [0, 1]");
  const Vector x = Vector::Ones(static_cast<Eigen::Index>(arch.input_dim));
  const DistEquivResult res = probe_dist_equiv(arch, x, trials, seed, mask_prob, workers);

  KindOutput out;
  out.columns = {"data_mask_grad_norm", "random_mask_product_norm"};
  for (std::size_t k = 0; k < trials; ++k) {
    TrialRecord r;
    r.index = k;
    r.seed = k;
    r.values = {res.sample_data_masks[k], res.sample_random_masks[k]};
    out.rows.push_back(std::move(r));
  }
  out.violation_frequency = res.pass ? 0.0 : 1.0;
  out.summary["ks_statistic"] = res.ks_statistic;
  out.summary["threshold"] = res.threshold;
  out.summary["pass"] = res.pass;
  out.summary["violation_frequency"] = out.violation_frequency;
  return out;
}

KindOutput run_gaussian_spectral(Params& p, std::uint64_t seed, std::size_t workers) {
  const std::size_t m = p.count("m", 200);
  const std::size_t n = p.count("n", 300);
  const double delta = p.probability("delta", 0.01);
  const std::size_t samples = p.count("samples", 100, 100);
  const GaussianSpectralResult res = probe_gaussian_spectral(m, n, delta, samples, seed, workers);
  KindOutput out;
  out.columns = {"spectral_norm", "edge_ratio", "violated"};
  const double edge = std::sqrt(static_cast<double>(m)) + std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < samples; ++k) {
    TrialRecord r;
    r.index = k;
    r.seed = k;
    r.values = {res.norms[k], res.norms[k] / edge, flag(res.norms[k] > res.bound)};
    out.rows.push_back(std::move(r));
  }
  out.violation_frequency = static_cast<double>(res.violations) / static_cast<double>(samples);
  out.summary["bound"] = res.bound;
  out.summary["violations"] = res.violations;
  out.summary["mean_edge_ratio"] = res.mean_edge_ratio;
  out.summary["spectral_norm"] = quantiles_json(res.norms);
  out.summary["violation_frequency"] = out.violation_frequency;
  return out;
}

KindOutput run_collapse(Params& p, std::uint64_t seed) {
  const std::size_t d = p.count("d", 10, 2);
  const std::size_t width = p.count("width", 2000, 8);
  const std::size_t depth = p.count("depth", 200);
  const std::size_t n_pairs = p.count("n_pairs", 50, 2);
  const CollapseReport rep = collapse_simulate(d, width, depth, n_pairs, seed);

  KindOutput out;
  out.columns = {"layer", "mean_cosine", "mean_kernel", "mean_abs_deviation", "median_norm",
                 "median_gain", "median_constancy"};
  for (std::size_t i = 0; i < depth; ++i) {
    TrialRecord r;
    r.index = i + 1;
    r.seed = seed;
    r.values = {static_cast<double>(i + 1), mean(rep.cosine[i]), mean(rep.kernel[i]),
                rep.mean_abs_deviation[i], rep.median_norm[i], rep.median_gain[i],
                rep.median_constancy[i]};
    out.rows.push_back(std::move(r));
  }
  std::size_t small = 0;
  for (bool b : rep.small_output) small += b;
  const auto [gmin, gmax] = std::minmax_element(rep.median_gain.begin(), rep.median_gain.end());
  out.summary["tracking_error_first_50"] = rep.tracking_error(50);
  out.summary["median_gain_min"] = *gmin;
  out.summary["median_gain_max"] = *gmax;
  out.summary["median_constancy_depth_5"] =
      depth >= 5 ? Json(rep.median_constancy[4]) : Json(nullptr);
  out.summary["median_constancy_final"] = rep.median_constancy.back();
  out.summary["small_output_pairs"] = small;
  return out;
}

KindOutput run_kernel(Params& p) {
  const double theta_0 = p.real("theta_0", std::numbers::pi / 2.0);
  if (!(theta_0 >= 0.0 && theta_0 <= std::numbers::pi)) throw ConfigError("theta_0", "must lie in [0, pi]");
  const std::size_t steps = p.count("steps", 10);
  const KernelTrace tr = kernel_iterate(theta_0, steps);
  KindOutput out;
  out.columns = {"step", "theta", "rho"};
  for (std::size_t t = 0; t < steps; ++t) {
    TrialRecord r;
    r.index = t + 1;
    r.seed = 0;
    r.values = {static_cast<double>(t + 1), tr.steps[t].theta, tr.steps[t].rho};
    out.rows.push_back(std::move(r));
  }
  out.summary["final_rho"] = tr.steps.back().rho;
  out.summary["final_theta"] = tr.steps.back().theta;
  return out;
}

}  // namespace

const char* version_string() noexcept { return RRNET_VERSION; }

bool ExperimentConfig::is_execution_key(const std::string& key) {
  return std::find(kExecutionKeys.begin(), kExecutionKeys.end(), key) != kExecutionKeys.end();
}

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = [] {
    std::vector<std::string> k;
    for (const auto& [name, keys] : kind_keys()) {
      if (name != "sample") k.push_back(name);
    }
    return k;
  }();
  return kinds;
}

std::vector<std::string> allowed_keys(const std::string& kind) {
  const auto it = kind_keys().find(kind);
  if (it == kind_keys().end()) throw ConfigError("kind", "unknown experiment kind '" + kind + "'");
  std::vector<std::string> keys = kCommonKeys;
  if (uses_arch_keys(kind)) keys.insert(keys.end(), kArchKeys.begin(), kArchKeys.end());
  // These two probes are defined for Standard networks only.
  if (kind == "probe:value_gradient" || kind == "probe:dist_equiv") {
    keys.erase(std::find(keys.begin(), keys.end(), "mode"));
  }
  keys.insert(keys.end(), it->second.begin(), it->second.end());
  if (kind == "probe:sign_flip") keys.push_back("d");
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

ExperimentConfig parse_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("kind", "config must be a JSON object");
  if (!doc.contains("kind") || !doc.at("kind").is_string()) {
    throw ConfigError("kind", "missing experiment kind");
  }
  ExperimentConfig cfg;
  cfg.kind = doc.at("kind").get<std::string>();
  const auto keys = allowed_keys(cfg.kind);
  for (const auto& [key, value] : doc.items()) {
    if (key == "kind") continue;
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(key, "not a recognized key for kind '" + cfg.kind + "'");
    }
    cfg.params[key] = value;
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

Network sample_network(const ExperimentConfig& config) {
  Params p(config);
  const std::uint64_t seed = p.seed();
  const Architecture arch = p.architecture();
  const InitMode mode = p.mode();
  const std::string ties = p.text("tie_policy", "randomized", {"randomized", "one", "zero"});
  const TiePolicy policy = ties == "randomized" ? TiePolicy::RandomizedTies
                           : ties == "one"      ? TiePolicy::TiesToOne
                                                : TiePolicy::TiesToZero;
  RngStream rng(seed, 0);
  return Network::sample(arch, mode, rng, policy);
}

RunResult run_experiment(const ExperimentConfig& config) {
  // Re-validate keys so hand-built configs get the same checks as parsed ones.
  const auto keys = allowed_keys(config.kind);
  for (const auto& [key, value] : config.params.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(key, "not a recognized key for kind '" + config.kind + "'");
    }
  }
  if (config.kind == "sample") throw ConfigError("kind", "'sample' is handled by sample_network");

  Params p(config);
  const std::uint64_t seed = p.seed();
  std::size_t workers = 1;
  if (config.params.contains("workers")) {
    const Json& w = config.params.at("workers");
    if (!w.is_number_integer() || w.get<std::int64_t>() < 1) {
      throw ConfigError("workers", "must be a positive integer");
    }
    workers = w.get<std::size_t>();
  }
  const double alert_level = p.real("alert_level", 0.05);

  KindOutput out;
  const std::string& kind = config.kind;
  try {
    if (kind == "attack") {
      out = run_attack(p, seed, workers);
    } else if (kind == "sweep") {
      out = run_sweep(p, seed, workers);
    } else if (kind == "probe:value_gradient") {
      out = run_value_gradient(p, seed, workers);
    } else if (kind == "probe:scale_preservation") {
      const Architecture arch = p.architecture();
      const double d = static_cast<double>(arch.input_dim);
      const double radius = p.nonnegative("radius", std::sqrt(d) / 10.0);
      const std::size_t n = p.count("n_samples", 20, 10);
      out = run_per_net_probe(p, arch, seed, workers, 100, [&](const Network& net, const Vector& x, RngStream& rng) {
        return probe_scale_preservation(net, x, radius, n, rng);
      });
    } else if (kind == "probe:activation_margin") {
      const Architecture arch = p.architecture();
      const double alpha = p.nonnegative("alpha", 0.1);
      if (!(alpha < std::sqrt(std::numbers::pi / 8.0))) throw ConfigError("alpha", "must be below sqrt(pi/8)");
      out = run_per_net_probe(p, arch, seed, workers, 200, [&](const Network& net, const Vector& x, RngStream&) {
        return probe_activation_margin(net, x, alpha);
      });
    } else if (kind == "probe:gradient_smoothness") {
      const Architecture arch = p.architecture();
      const double d = static_cast<double>(arch.input_dim);
      const double radius = p.nonnegative("radius", 0.05 * std::sqrt(d));
      const std::size_t n = p.count("n_samples", 20, 10);
      out = run_per_net_probe(p, arch, seed, workers, 50, [&](const Network& net, const Vector& x, RngStream& rng) {
        return probe_gradient_smoothness(net, x, radius, n, rng);
      });
    } else if (kind == "probe:segment_spectral") {
      const Architecture arch = p.architecture(true);
      if (bottleneck_decomposition(arch).size() < 2) {
        throw ConfigError(p.has("widths") ? "widths" : "width",
                          "segment_spectral needs a hidden layer narrower than the input");
      }
      const double d = static_cast<double>(arch.input_dim);
      const double radius = p.nonnegative("radius", std::sqrt(d) / 10.0);
      const std::size_t n = p.count("n_samples", 100);
      const double C = p.positive("C", 8.0);
      out = run_per_net_probe(p, arch, seed, workers, 1, [&](const Network& net, const Vector& x, RngStream& rng) {
        return probe_segment_spectral(net, x, radius, n, rng, C);
      });
    } else if (kind == "probe:sign_flip") {
      out = run_sign_flip(p, seed, workers);
    } else if (kind == "probe:dist_equiv") {
      out = run_dist_equiv(p, seed, workers);
    } else if (kind == "probe:gaussian_spectral") {
      out = run_gaussian_spectral(p, seed, workers);
    } else if (kind == "collapse") {
      out = run_collapse(p, seed);
    } else if (kind == "kernel") {
      out = run_kernel(p);
    }
  } catch (const DomainError& e) {
    throw ConfigError(kind, e.what());
  }

  RunResult result;
  result.stem = stem_of(kind);
  result.columns = std::move(out.columns);
  result.rows = std::move(out.rows);
  result.alert = !std::isnan(out.violation_frequency) && out.violation_frequency > alert_level;

  Json config_echo = Json::object();
  for (const auto& [key, value] : p.echo().items()) {
    if (!ExperimentConfig::is_execution_key(key)) config_echo[key] = value;
  }
  result.summary = Json{{"tool", "rrnet"},
                        {"version", version_string()},
                        {"kind", kind},
                        {"config", config_echo},
                        {"columns", result.columns},
                        {"row_count", result.rows.size()},
                        {"summary", out.summary},
                        {"alert", result.alert}};
  return result;
}

const std::vector<std::string>& summary_keys() {
  static const std::vector<std::string> keys = {"tool",    "version",   "kind",    "config",
                                                "columns", "row_count", "summary", "alert"};
  return keys;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_csv(const std::vector<std::string>& columns,
                       const std::vector<TrialRecord>& rows) {
  std::string out = "trial,seed";
  for (const auto& c : columns) out += "," + c;
  out += ",status\n";
  for (const auto& r : rows) {
    out += std::to_string(r.index) + "," + std::to_string(r.seed);
    for (double v : r.values) {
      out += ",";
      if (!std::isnan(v)) out += format_real(v);
    }
    out += "," + r.status + "\n";
  }
  return out;
}

void write_csv(const std::vector<std::string>& columns, const std::vector<TrialRecord>& rows,
               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << format_csv(columns, rows);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void write_summary_json(const Json& summary, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << summary.dump(2) << "\n";
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace rrnet
