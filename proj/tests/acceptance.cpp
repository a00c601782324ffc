// Acceptance suite: one line per criterion, exit status 1 if any fails.
//
//   rrnet_acceptance [--cli PATH] [--workers N] [--only K]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "rrnet/adversarial.hpp"
#include "rrnet/collapse.hpp"
#include "rrnet/harness.hpp"
#include "rrnet/network.hpp"
#include "rrnet/parallel.hpp"
#include "rrnet/probes.hpp"

using namespace rrnet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::size_t g_workers = std::max(1u, std::thread::hardware_concurrency());
std::string g_cli;

std::size_t draw_between(RngStream& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

Architecture random_arch(RngStream& rng) {
  Architecture a;
  a.input_dim = draw_between(rng, 32, 512);
  const std::size_t ell = draw_between(rng, 1, 3);
  for (std::size_t i = 0; i < ell; ++i) a.hidden_widths.push_back(draw_between(rng, 32, 512));
  return a;
}

Outcome c1_decomposition() {
  double worst = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    RngStream rng(101, k);
    const Architecture arch = random_arch(rng);
    const Network net = Network::sample(arch, InitMode::Standard, rng);
    const double n = std::sqrt(static_cast<double>(arch.input_dim));
    const Vector x = uniform_sphere(arch.input_dim, n, rng);
    const Vector y = uniform_ball(x, 0.2 * n, rng);
    const ForwardTrace tx = forward(net, x), ty = forward(net, y);
    const GradDecomposition dec = grad_difference_decomposition(net, tx, ty);
    const double scale = dec.grad_x.norm() + dec.grad_y.norm();
    worst = std::max(worst, (dec.sum() - (dec.grad_x - dec.grad_y)).norm() / scale);
  }
  return {worst <= 1e-10, fmt("max relative residual %.3g (limit 1e-10)", worst)};
}

Outcome c2_euler() {
  double worst_euler = 0.0, worst_homog = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    RngStream rng(102, k);
    const Architecture arch = random_arch(rng);
    const Network net = Network::sample(arch, InitMode::Standard, rng);
    const Vector x = uniform_sphere(arch.input_dim, std::sqrt(static_cast<double>(arch.input_dim)), rng);
    const ForwardTrace t = forward(net, x);
    const double f = t.output;
    worst_euler = std::max(worst_euler, std::abs(f - gradient(net, t).dot(x)) / std::abs(f));
    worst_homog = std::max(worst_homog, std::abs(evaluate(net, 3.7 * x) - 3.7 * f) / std::abs(3.7 * f));
  }
  return {worst_euler <= 1e-10 && worst_homog <= 1e-10,
          fmt("max Euler residual %.3g, max homogeneity residual %.3g (limit 1e-10)", worst_euler,
              worst_homog)};
}

Outcome c3_finite_differences() {
  std::size_t agree = 0, used = 0, rejected = 0;
  for (std::uint64_t k = 0; k < 500; ++k) {
    RngStream rng(103, k);
    const Architecture arch = random_arch(rng);
    const Network net = Network::sample(arch, InitMode::Standard, rng);
    const Vector x = uniform_sphere(arch.input_dim, std::sqrt(static_cast<double>(arch.input_dim)), rng);
    const ForwardTrace t = forward(net, x);
    const Vector u = uniform_sphere(arch.input_dim, 1.0, rng);
    const double h = 1e-5 * x.norm();
    const ForwardTrace tp = forward(net, x + h * u), tm = forward(net, x - h * u);
    bool same = true;
    for (std::size_t i = 0; i < t.masks.size(); ++i) {
      same = same && (tp.masks[i] == t.masks[i]).all() && (tm.masks[i] == t.masks[i]).all();
    }
    if (!same) {
      ++rejected;
      continue;
    }
    ++used;
    const double exact = gradient(net, t).dot(u);
    const double fd = (tp.output - tm.output) / (2.0 * h);
    agree += std::abs(fd - exact) <= 1e-5 * std::abs(exact);
  }
  const double frac = used ? static_cast<double>(agree) / static_cast<double>(used) : 0.0;
  return {used > 0 && frac >= 0.95,
          fmt("%zu/%zu guarded directions agree (%.4f, need >= 0.95); %zu rejected by the guard",
              agree, used, frac, rejected)};
}

Outcome c4_flip_scaling() {
  // Part 1: flip with ratio <= 0.5 at d = 500.
  const std::size_t trials = 200;
  std::vector<int> ok(trials, 0);
  std::vector<double> ratios(trials, std::numeric_limits<double>::quiet_NaN());
  const Architecture arch{500, {500, 500}};
  parallel_for(trials, g_workers, [&](std::size_t k) {
    RngStream rng(104, k);
    const Network net = Network::sample(arch, InitMode::Standard, rng);
    const Vector x = uniform_sphere(500, std::sqrt(500.0), rng);
    const AttackResult a = flip_search(net, x);
    if (a.flipped) {
      ratios[k] = *a.ratio;
      ok[k] = *a.ratio <= 0.5;
    }
  });
  const double rate = static_cast<double>(std::count(ok.begin(), ok.end(), 1)) / trials;

  // Part 2: scaling exponent.
  const SweepTable table = dimension_sweep({125, 250, 500, 1000, 2000}, 2, WidthRule{1.0}, 200, 204, g_workers);
  const double slope = table.slope.value_or(std::numeric_limits<double>::quiet_NaN());
  std::string medians;
  for (const auto& row : table.rows) medians += fmt(" d=%zu:%.4f", row.d, row.ratio_median);
  return {rate >= 0.95 && slope >= -0.60 && slope <= -0.40,
          fmt("d=500 flip with ratio<=0.5 in %.3f of 200 (need >= 0.95), median ratio %.4f; "
              "sweep slope %.4f (need [-0.60, -0.40]); medians%s",
              rate, median(ratios), slope, medians.c_str())};
}

Outcome c5_gradient_concentration() {
  const ProbeReport r = probe_value_gradient({256, {256, 256}}, 1000, 0.01, 105, 8.0, g_workers);
  const auto ok = r.column("grad_ok");
  const double freq = std::count(ok.begin(), ok.end(), 1.0) / static_cast<double>(ok.size());
  return {freq >= 0.99, fmt("|grad f| >= 2^-3 in %.4f of 1000 nets (need >= 0.99); min |grad f| %.4f",
                            freq, r.summary("grad_norm").min)};
}

Outcome c6_scale_preservation() {
  const Architecture arch{512, {512, 512, 512}};
  std::vector<double> violations(100), worst(100);
  parallel_for(100, g_workers, [&](std::size_t k) {
    RngStream rng(106, k);
    const Network net = Network::sample(arch, InitMode::Standard, rng);
    const Vector x = uniform_sphere(512, std::sqrt(512.0), rng);
    const ProbeReport r = probe_scale_preservation(net, x, 0.0, 10, rng);
    violations[k] = r.statistics.at("violations");
    const auto n = r.column("image_norm"), b = r.column("norm_bound");
    double w = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n.size(); ++i) w = std::min(w, n[i] / b[i]);
    worst[k] = w;
  });
  double total = 0.0;
  for (double v : violations) total += v;
  return {total == 0.0, fmt("%.0f violations over 100 nets x 3 layers (need 0); smallest norm/bound %.3f",
                            total, *std::min_element(worst.begin(), worst.end()))};
}

Outcome c7_activation_margin() {
  const Architecture arch{512, {512, 512, 512}};
  std::vector<double> violations(200), eligible(200);
  parallel_for(200, g_workers, [&](std::size_t k) {
    RngStream rng(107, k);
    const Network net = Network::sample(arch, InitMode::Standard, rng);
    const Vector x = uniform_sphere(512, std::sqrt(512.0), rng);
    const ProbeReport r = probe_activation_margin(net, x, 0.1);
    violations[k] = r.statistics.at("violations");
    eligible[k] = r.statistics.at("eligible_layers");
  });
  double v = 0.0, e = 0.0;
  for (std::size_t k = 0; k < 200; ++k) {
    v += violations[k];
    e += eligible[k];
  }
  const double freq = v / e;
  return {freq <= 0.01, fmt("violated in %.0f of %.0f (net, layer) pairs = %.4f (need <= 0.01)", v, e, freq)};
}

Outcome c8_sign_flip() {
  const double rels[] = {0.01, 0.05, 0.1};
  const std::size_t pairs = 20, d = 50;
  std::size_t below = 0, within = 0;
  double worst_z = 0.0;
  for (std::size_t k = 0; k < pairs; ++k) {
    RngStream rng(108, k);
    const Vector x = uniform_sphere(d, std::sqrt(static_cast<double>(d)), rng);
    const Vector y = x + uniform_sphere(d, rels[k % 3] * x.norm(), rng);
    const SignFlipResult s = probe_sign_flip(x, y, 100000, rng);
    below += s.bound && s.empirical <= *s.bound;
    const double z = std::abs(s.empirical - s.oracle) / s.std_error;
    within += z <= 3.0;
    worst_z = std::max(worst_z, z);
  }
  return {below == pairs && within == pairs,
          fmt("%zu/20 below the bound, %zu/20 within 3 SE of theta/pi (largest |z| %.2f)", below,
              within, worst_z)};
}

Outcome c9_dist_equiv() {
  const Architecture arch{128, {128, 128}};
  const Vector x = Vector::Ones(128);
  const DistEquivResult r = probe_dist_equiv(arch, x, 2000, 109, 0.5, g_workers);
  const DistEquivResult control = probe_dist_equiv(arch, x, 2000, 109, 0.9, g_workers);
  return {r.pass && !control.pass,
          fmt("KS %.4f vs critical %.4f (%s); Bernoulli(0.9) control KS %.4f (%s, must fail)",
              r.ks_statistic, r.threshold, r.pass ? "pass" : "fail", control.ks_statistic,
              control.pass ? "pass" : "fail")};
}

Outcome c10_gaussian_spectral() {
  const GaussianSpectralResult r = probe_gaussian_spectral(200, 300, 0.01, 100, 110, g_workers);
  return {r.violations <= 1, fmt("%zu violations of %.2f in 100 samples (need <= 1); max norm %.2f",
                                 r.violations, r.bound, *std::max_element(r.norms.begin(), r.norms.end()))};
}

Outcome c11_kernel_mc() {
  const double angles[] = {std::numbers::pi / 6, std::numbers::pi / 2, 2 * std::numbers::pi / 3};
  bool pass = true;
  std::string detail;
  for (std::size_t i = 0; i < 3; ++i) {
    RngStream rng(111, i);
    const KernelEstimate e = kernel_mc_estimate(angles[i], 1000000, rng);
    const double z = (e.estimate - kernel_map(angles[i])) / e.std_error;
    pass = pass && std::abs(z) <= 3.0;
    detail += fmt("%sz=%.2f", i ? ", " : "", z);
  }
  return {pass, "standardized errors " + detail + " (need |z| <= 3)"};
}

Outcome c12_sin_cos() {
  const SinCosGap g = sin_cos_gap(10000);
  return {g.min_margin >= 0.0, fmt("min margin %.3g at x=%.4g (need >= 0)", g.min_margin, g.argmin)};
}

Outcome c13_collapse() {
  const CollapseReport r = collapse_simulate(10, 2000, 200, 50, 113);
  const double track = r.tracking_error(50);
  const double c5 = r.median_constancy[4], c200 = r.median_constancy[199];
  const auto [gmin, gmax] = std::minmax_element(r.median_gain.begin(), r.median_gain.end());
  const auto [nmin, nmax] = std::minmax_element(r.median_norm.begin(), r.median_norm.end());
  const double scale = std::sqrt(10.0 / 2000.0);
  const bool a = track <= 0.05, b = c200 < c5, c = *gmin >= 0.8 && *gmax <= 1.2;
  return {a && b && c,
          fmt("(a) tracking error %.4f (need <= 0.05); (b) median constancy %.3g at depth 200 vs %.3g at "
              "depth 5; (c) median per-layer norm gain in [%.3f, %.3f] (need [0.8, 1.2]); median norm "
              "times sqrt(d/width) in [%.3f, %.3f] (not gated)",
              track, c200, c5, *gmin, *gmax, *nmin * scale, *nmax * scale)};
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome c14_determinism() {
  const std::vector<Json> configs = {
      {{"kind", "attack"}, {"d", 60}, {"trials", 8}, {"seed", 14}},
      {{"kind", "sweep"}, {"dims", {20, 40}}, {"trials", 30}, {"seed", 14}},
      {{"kind", "probe:sign_flip"}, {"trials", 6}, {"n_draws", 5000}, {"seed", 14}},
      {{"kind", "probe:gradient_smoothness"}, {"d", 40}, {"trials", 4}, {"seed", 14}},
      {{"kind", "probe:dist_equiv"}, {"d", 16}, {"ell", 1}, {"trials", 1000}, {"seed", 14}},
      {{"kind", "collapse"}, {"width", 64}, {"depth", 10}, {"n_pairs", 4}, {"seed", 14}},
      {{"kind", "kernel"}, {"steps", 5}}};
  const fs::path root = fs::temp_directory_path() / "rrnet_acceptance_determinism";
  fs::remove_all(root);
  std::size_t checked = 0, identical = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    std::vector<std::string> csv, json;
    for (std::size_t workers : {std::size_t{1}, std::size_t{1}, std::size_t{4}}) {
      const fs::path dir = root / std::to_string(csv.size());
      fs::create_directories(dir);
      Json cfg = configs[i];
      const std::string kind = cfg["kind"];
      const std::string stem = kind.rfind("probe:", 0) == 0 ? "probe_" + kind.substr(6) : kind;
      if (!g_cli.empty()) {
        cfg.erase("kind");
        const fs::path cfg_path = dir / "config.json";
        std::ofstream(cfg_path) << Json(cfg).dump();
        const std::string sub = kind.rfind("probe:", 0) == 0 ? "probe " + kind.substr(6) : kind;
        const std::string cmd = "\"" + g_cli + "\" --config \"" + cfg_path.string() + "\" --out-dir \"" +
                                dir.string() + "\" --workers " + std::to_string(workers) + " " + sub +
                                " > /dev/null";
        if (std::system(cmd.c_str()) != 0) return {false, "CLI run failed: " + cmd};
      } else {
        cfg["workers"] = workers;
        const RunResult r = run_experiment(parse_config(cfg));
        write_csv(r.columns, r.rows, dir / (stem + ".csv"));
        write_summary_json(r.summary, dir / (stem + ".json"));
      }
      csv.push_back(read_all(dir / (stem + ".csv")));
      json.push_back(read_all(dir / (stem + ".json")));
    }
    ++checked;
    identical += !csv[0].empty() && csv[0] == csv[1] && csv[0] == csv[2] && json[0] == json[1] &&
                 json[0] == json[2];
    fs::remove_all(root);
  }
  return {identical == checked,
          fmt("%zu/%zu kinds byte-identical across 2 serial runs and a 4-worker run (%s)", identical,
              checked, g_cli.empty() ? "in-process" : "via CLI")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rrnet acceptance suite"};
  int only = 0;
  app.add_option("--cli", g_cli, "rrnet executable for the determinism criterion");
  app.add_option("--workers", g_workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "run a single criterion");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "gradient difference decomposition is exact", 10, c1_decomposition},
      {2, "Euler identity and homogeneity", 5, c2_euler},
      {3, "gradient matches central differences", 30, c3_finite_differences},
      {4, "sign flip at small ratio and 1/sqrt(d) scaling", 600, c4_flip_scaling},
      {5, "gradient norm lower bound", 120, c5_gradient_concentration},
      {6, "layer norms stay above sqrt(d_i)/2^i", 60, c6_scale_preservation},
      {7, "activation margin at alpha 0.1", 120, c7_activation_margin},
      {8, "sign-flip probability bound and oracle", 60, c8_sign_flip},
      {9, "data masks match Bernoulli masks in distribution", 180, c9_dist_equiv},
      {10, "Gaussian spectral norm bound", 60, c10_gaussian_spectral},
      {11, "kernel map Monte Carlo", 30, c11_kernel_mc},
      {12, "sin/cos inequality on a grid", 1, c12_sin_cos},
      {13, "depth collapse substitute", 300, c13_collapse},
      {14, "end-to-end determinism", 600, c14_determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (only && c.id != only) continue;
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("[%s] %2d %s: %s; %.1fs (limit %.0fs%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                out.detail.c_str(), secs, c.limit_seconds, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
