#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rrnet/probes.hpp"

using namespace rrnet;

TEST_SUITE("probes") {

TEST_CASE("value and gradient: linear case concentrates") {
  const ProbeReport r = probe_value_gradient({64, {}}, 200, 0.01, 3);
  const auto g = r.column("grad_norm");
  REQUIRE(g.size() == 200);
  int above = 0;
  for (double v : g) above += v >= 0.5;
  // |w| ~ chi_64 / 8: P(|w| < 1/2) = P(chi^2_64 < 16) ~ 1e-7.
  CHECK(above == 200);
  const auto f = r.column("abs_f");
  CHECK(std::abs(f[0]) > 0);
}

TEST_CASE("value and gradient: requires enough trials") {
  CHECK_THROWS(probe_value_gradient({8, {8}}, 10, 0.01, 1));
}

TEST_CASE("scale preservation at radius zero") {
  RngStream rng(4, 0);
  const Network net = Network::sample({32, {32, 32}}, InitMode::Standard, rng);
  const Vector x = uniform_sphere(32, std::sqrt(32.0), rng);
  const ProbeReport r = probe_scale_preservation(net, x, 0.0, 10, rng);
  for (double v : r.column("max_pre_dist")) CHECK(v == 0.0);
  for (double v : r.column("max_post_dist")) CHECK(v == 0.0);
  CHECK(r.rows.size() == 2);
}

TEST_CASE("scale preservation lower bound at moderate width") {
  RngStream rng(5, 0);
  const Network net = Network::sample({256, {256, 256}}, InitMode::Standard, rng);
  const Vector x = uniform_sphere(256, 16.0, rng);
  const ProbeReport r = probe_scale_preservation(net, x, 1.6, 10, rng);
  CHECK(r.violation_frequency == 0.0);
  const auto norms = r.column("image_norm");
  const auto bounds = r.column("norm_bound");
  for (std::size_t i = 0; i < norms.size(); ++i) CHECK(norms[i] >= bounds[i]);
}

TEST_CASE("activation margin at alpha zero") {
  RngStream rng(6, 0);
  const Network net = Network::sample({20, {30, 25}}, InitMode::Standard, rng);
  const Vector x = uniform_sphere(20, std::sqrt(20.0), rng);
  const ProbeReport r = probe_activation_margin(net, x, 0.0);
  const auto count = r.column("count");
  const auto bound = r.column("bound");
  const auto width = r.column("fan_out");
  REQUIRE(count.size() == 2);
  for (std::size_t i = 0; i < count.size(); ++i) {
    CHECK(count[i] == width[i]);
    CHECK(bound[i] == width[i]);
  }
  CHECK(r.violation_frequency == 0.0);
  CHECK_THROWS_AS(probe_activation_margin(net, x, 0.7), DomainError);
}

TEST_CASE("gradient smoothness at radius zero") {
  RngStream rng(7, 0);
  const Network net = Network::sample({16, {16, 16}}, InitMode::Standard, rng);
  const Vector x = uniform_sphere(16, 4.0, rng);
  const ProbeReport r = probe_gradient_smoothness(net, x, 0.0, 10, rng);
  for (const auto& row : r.rows) {
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (!std::isnan(row[c])) CHECK(row[c] == 0.0);
    }
  }
}

TEST_CASE("gradient smoothness triangle inequality") {
  RngStream rng(8, 0);
  const Network net = Network::sample({64, {64, 64}}, InitMode::Standard, rng);
  const Vector x = uniform_sphere(64, 8.0, rng);
  const ProbeReport r = probe_gradient_smoothness(net, x, 2.0, 20, rng);
  CHECK(r.violation_frequency == 0.0);
  const auto diff = r.column("grad_diff");
  const auto sum = r.column("sum_term_norms");
  for (std::size_t i = 0; i < diff.size(); ++i) CHECK(diff[i] <= sum[i] * (1 + 1e-12) + 1e-300);
}

TEST_CASE("masked segment norm") {
  RngStream rng(9, 0);
  const Network net = Network::sample({10, {12, 8}}, InitMode::Standard, rng);
  const Vector x = uniform_sphere(10, 3.0, rng);
  const ForwardTrace t = forward(net, x);
  std::vector<Mask> masks = t.masks;
  masks[0].setZero();
  CHECK(masked_segment_norm(net, masks, 2, 0) == 0.0);
  // Oracle: explicit product D_2 W_2 D_1 W_1.
  const Matrix d2 = t.masks[1].cast<double>().matrix().asDiagonal();
  const Matrix d1 = t.masks[0].cast<double>().matrix().asDiagonal();
  const Matrix prod = d2 * net.layer(2) * d1 * net.layer(1);
  CHECK(masked_segment_norm(net, t.masks, 2, 0) == doctest::Approx(spectral_norm(prod)).epsilon(1e-7));
  CHECK(masked_segment_norm(net, t.masks, 1, 0) ==
        doctest::Approx(spectral_norm(Matrix(d1 * net.layer(1)))).epsilon(1e-7));
}

TEST_CASE("segment spectral needs two bottlenecks") {
  RngStream rng(10, 0);
  const Network wide = Network::sample({8, {16, 16}}, InitMode::Standard, rng);
  CHECK_THROWS_AS(probe_segment_spectral(wide, Vector::Ones(8), 0.1, 5, rng), DomainError);
  const Network narrow = Network::sample({30, {20, 10}}, InitMode::Standard, rng);
  const ProbeReport r = probe_segment_spectral(narrow, Vector::Ones(30), 0.5, 5, rng);
  CHECK(r.rows.size() > 0);
}

TEST_CASE("segment of length one with open masks is the weight norm") {
  RngStream rng(14, 0);
  const Network net = Network::sample({12, {7, 9}}, InitMode::Standard, rng);
  const std::vector<Mask> open = {Mask::Ones(7), Mask::Ones(9)};
  CHECK(masked_segment_norm(net, open, 1, 0) == doctest::Approx(spectral_norm(net.layer(1))).epsilon(1e-8));
}

TEST_CASE("segment norms against the growth rate at C = 8") {
  RngStream rng(15, 0);
  const Network net = Network::sample({512, {512, 64, 512}}, InitMode::Standard, rng);
  const Vector x = uniform_sphere(512, std::sqrt(512.0), rng);
  const ProbeReport r = probe_segment_spectral(net, x, 0.1 * std::sqrt(512.0), 100, rng);
  // Bottlenecks 2 > 0: one segment per sample.
  CHECK(r.rows.size() == 100);
  CHECK(r.violation_frequency <= 0.01);
}

// Known miss at this width: about 1% of units per layer change sign inside the
// ball, which moves the gradient by roughly sqrt(2 * 0.016) per layer. Kept
// as a visible, non-fatal check.
TEST_CASE("gradient changes little inside a small ball at width 1024" * doctest::may_fail()) {
  std::vector<double> max_ratio(50);
  for (std::uint64_t k = 0; k < 50; ++k) {
    RngStream rng(16, k);
    const Network net = Network::sample({1024, {1024, 1024}}, InitMode::Standard, rng);
    const Vector x = uniform_sphere(1024, 32.0, rng);
    max_ratio[k] = probe_gradient_smoothness(net, x, 0.05 * 32.0, 10, rng).statistics.at("max_ratio");
  }
  MESSAGE("median max ratio " << median(max_ratio));
  CHECK(median(max_ratio) <= 0.2);
}

TEST_CASE("sign flip probe") {
  RngStream rng(11, 0);
  const Vector x = uniform_sphere(10, 1.0, rng);
  const SignFlipResult same = probe_sign_flip(x, x, 1000, rng);
  CHECK(same.empirical == 0.0);
  CHECK(same.oracle == 0.0);
  REQUIRE(same.bound);
  CHECK(*same.bound == 0.0);

  const SignFlipResult anti = probe_sign_flip(x, -x, 1000, rng);
  CHECK(anti.oracle == doctest::Approx(1.0));
  CHECK(anti.empirical == 1.0);
  CHECK_FALSE(anti.bound);

  Vector y = x;
  y += 0.05 * uniform_sphere(10, 1.0, rng);
  const SignFlipResult near = probe_sign_flip(x, y, 100000, rng);
  CHECK(std::abs(near.empirical - near.oracle) <= 4 * near.std_error);
  REQUIRE(near.bound);
  CHECK(near.R == doctest::Approx(1.0));
  CHECK(near.r == doctest::Approx(0.05));
  CHECK(*near.bound == doctest::Approx(3 * 0.05 * std::sqrt(std::log(20.0))));
}

TEST_CASE("distributional equivalence: linear case") {
  const DistEquivResult r = probe_dist_equiv({16, {}}, Vector::Ones(16), 1000, 12);
  CHECK(r.pass);
  CHECK(r.ks_statistic <= r.threshold);
  CHECK(r.sample_data_masks.size() == 1000);
}

TEST_CASE("gaussian spectral: scalar case") {
  const GaussianSpectralResult r = probe_gaussian_spectral(1, 1, 0.01, 100, 13);
  CHECK(r.violations == 0);
  CHECK(r.bound == doctest::Approx(3 * (2 + std::sqrt(std::log(100.0)))));
  CHECK(r.bound >= 6);
  for (double v : r.norms) CHECK(v >= 0.0);
}

}
