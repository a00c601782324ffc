#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rrnet/collapse.hpp"

using namespace rrnet;
using std::numbers::pi;

TEST_SUITE("collapse") {

TEST_CASE("kernel map values") {
  CHECK(kernel_map(0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(kernel_map(pi)) < 1e-15);
  CHECK(kernel_map(pi / 2) == doctest::Approx(1.0 / pi).epsilon(1e-15));
  CHECK_THROWS_AS(kernel_map(-0.1), DomainError);
  CHECK_THROWS_AS(kernel_map(3.2), DomainError);
  for (int k = 0; k <= 1000; ++k) {
    const double t = pi * k / 1000.0;
    CHECK(kernel_map(t) >= std::cos(t) - 1e-15);
    CHECK(kernel_map(t) >= 0.0);
    CHECK(kernel_map(t) <= 1.0);
  }
}

TEST_CASE("kernel Monte Carlo") {
  RngStream rng(1, 0);
  const KernelEstimate same = kernel_mc_estimate(0.0, 100000, rng);
  CHECK(std::abs(same.estimate - 1.0) <= 3 * same.std_error);
  const KernelEstimate right = kernel_mc_estimate(pi / 2, 1000000, rng);
  CHECK(std::abs(right.estimate - 1.0 / pi) <= 3 * right.std_error);
  CHECK(right.estimate == doctest::Approx(2 * right.numerator));
  CHECK(right.std_error == doctest::Approx(2 * right.numerator_std_error));
}

TEST_CASE("kernel iteration") {
  const KernelTrace fixed = kernel_iterate(0.0, 20);
  for (const auto& s : fixed.steps) CHECK(s.rho == doctest::Approx(1.0).epsilon(1e-15));

  const KernelTrace anti = kernel_iterate(pi, 1);
  REQUIRE(anti.steps.size() == 1);
  CHECK(std::abs(anti.steps[0].rho) < 1e-15);
  CHECK(anti.steps[0].theta == doctest::Approx(pi / 2));

  const KernelTrace tr = kernel_iterate(pi / 2, 500);
  for (std::size_t t = 1; t < tr.steps.size(); ++t) CHECK(tr.steps[t].rho >= tr.steps[t - 1].rho);
  CHECK(tr.steps.back().rho > 0.99);
  // First step by hand.
  CHECK(tr.steps[0].rho == doctest::Approx(1.0 / pi));
  CHECK(tr.steps[0].theta == doctest::Approx(std::acos(1.0 / pi)));
}

TEST_CASE("sin cos inequality") {
  CHECK(sin_cos_margin(0.0) == 0.0);
  CHECK(sin_cos_margin(pi) == doctest::Approx(pi - std::pow(2.0, 1.5) / 15).epsilon(1e-14));
  CHECK(sin_cos_margin(pi) > 2.9);
  const SinCosGap g = sin_cos_gap(10000);
  CHECK(g.min_margin >= 0.0);
  CHECK(g.argmin == 0.0);
  CHECK_THROWS(sin_cos_gap(1));
}

TEST_CASE("identical pairs stay aligned") {
  CollapseOptions opt;
  opt.identical_pairs = true;
  const CollapseReport r = collapse_simulate(5, 16, 1, 3, 7, opt);
  REQUIRE(r.cosine.size() == 1);
  for (double c : r.cosine[0]) CHECK(c == doctest::Approx(1.0).epsilon(1e-14));
  for (double q : r.constancy[0]) CHECK(q == 0.0);
}

TEST_CASE("small collapse run is deterministic and tracks the kernel") {
  const CollapseReport a = collapse_simulate(6, 400, 10, 8, 3);
  const CollapseReport b = collapse_simulate(6, 400, 10, 8, 3);
  CHECK(a.cosine == b.cosine);
  CHECK(a.norm == b.norm);
  CHECK(a.constancy == b.constancy);
  CHECK(a.tracking_error(10) < 0.1);
  for (double g : a.median_gain) CHECK(std::abs(g - 1.0) < 0.2);
  CHECK_THROWS(collapse_simulate(1, 400, 10, 8, 3));
  CHECK_THROWS(collapse_simulate(6, 4, 10, 8, 3));
}

}
