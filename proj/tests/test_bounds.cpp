#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "sbacc/bounds.hpp"

using namespace sbacc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Formulas transcribed again, with M_PI and plain doubles.
double lebesgue_ref(int n, int s) {
  const double r = (s + 1.0) * (s + 4.0) * M_PI * M_PI / 8.0;
  return (r + 1.0) * (1.0 + M_PI * M_PI * (s + 1.0) * std::log(double(n - s)));
}

double theorem1_ref(int n, int s, double d1, double d2) {
  const double delta = ((n - s) & 1) ? d2 : d1 + d2;
  const double r = (s + 1.0) * (s + 4.0) * M_PI * M_PI / 8.0;
  return 2.0 * delta * (1.0 + r) * std::sin((s + 1.0) * M_PI / (2.0 * n));
}

ExperimentConfig fig2_config() {
  ExperimentConfig cfg;
  cfg.K1 = 43;
  cfg.N1 = 35;
  cfg.sigma_a2 = 1e4;
  return cfg;
}

}  // namespace

TEST_CASE("Lebesgue bound closed form") {
  CHECK_THAT(lebesgue_bound(53, 0), WithinAbs(238.5, 0.05));
  CHECK(lebesgue_bound(53, 10) > lebesgue_bound(53, 0));
  const double r8 = 9.0 * 12.0 * M_PI * M_PI / 8.0;
  CHECK_THAT(lebesgue_bound(10, 8), WithinRel((r8 + 1.0) * (1.0 + 9.0 * M_PI * M_PI * std::log(2.0)), 1e-14));
  for (int n = 3; n <= 64; ++n)
    for (int s = 0; s <= n - 2; ++s) CHECK_THAT(lebesgue_bound(n, s), WithinRel(lebesgue_ref(n, s), 1e-13));
  CHECK_THROWS_AS(lebesgue_bound(10, 9), std::invalid_argument);
  CHECK_THROWS_AS(lebesgue_bound(10, 10), std::invalid_argument);
}

TEST_CASE("R factor") {
  CHECK(r_factor(0) == 4.0 * M_PI * M_PI / 8.0);
  CHECK(r_factor(3) == 4.0 * 7.0 * M_PI * M_PI / 8.0);
}

TEST_CASE("straggler error bound closed form") {
  CHECK(theorem1_bound(53, 0, 0.0, 0.0) == 0.0);
  CHECK_THAT(theorem1_bound(53, 0, 123.0, 1.0),
             WithinRel(2.0 * (1.0 + M_PI * M_PI / 2.0) * std::sin(M_PI / 106.0), 1e-14));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int n = 3; n <= 64; ++n)
    for (int s = 0; s + 2 < n; ++s) {
      const double d1 = u(rng), d2 = u(rng);
      CHECK_THAT(theorem1_bound(n, s, d1, d2), WithinRel(theorem1_ref(n, s, d1, d2), 1e-13));
    }
  CHECK_THROWS_AS(theorem1_bound(10, 8, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(theorem1_bound(10, 0, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("straggler error bound grows with S up to N/2") {
  for (const int n : {10, 21, 53, 64}) {
    double prev = 0.0;
    for (int s = 0; 2 * s <= n && s + 2 < n; ++s) {
      // d1 = 0 keeps the parity switch of Delta from masking the trend.
      const double b = theorem1_bound(n, s, 0.0, 1.0);
      CHECK(b >= prev);
      prev = b;
    }
  }
}

TEST_CASE("derivative norms of a known function") {
  // K = 1 makes u constant, so g has zero derivatives.
  ExperimentConfig cfg;
  cfg.K = 1;
  const auto flat = estimate_derivative_norms(sample_dataset(cfg, 0), cfg.f);
  CHECK(flat.d1 == 0.0);
  CHECK(flat.d2 == 0.0);

  // K = 2: u(z) = X0 + (X1 - X0)(z - a0)/(a1 - a0) is linear in z.
  cfg.K = 2;
  const Dataset ds = sample_dataset(cfg, 0);
  const double slope = ((ds.blocks[1] - ds.blocks[0]) / (ds.alpha[1] - ds.alpha[0])).cwiseAbs().maxCoeff();
  const auto lin = estimate_derivative_norms(ds, TargetFunction::parse("identity"));
  CHECK_THAT(lin.d1, WithinRel(slope, 1e-9));
  CHECK(lin.d2 < 1e-6);
  const auto sq = estimate_derivative_norms(ds, TargetFunction::parse("poly:0,0,1"));
  CHECK_THAT(sq.d2, WithinRel(2.0 * slope * slope, 1e-6));
}

TEST_CASE("weight ratio") {
  const auto nodes = cheb_first_kind(9);
  const auto grid = uniform_grid(2001);
  const double w = max_weight_ratio(nodes.points(), grid);
  CHECK(w > 0.0);
  double ref = 0.0;  // product form
  for (const double z : grid) {
    long double den = 0;
    std::vector<long double> num(9);
    for (std::size_t k = 0; k < 9; ++k) {
      long double p = 1;
      for (std::size_t i = 0; i < 9; ++i)
        if (i != k) p *= z - nodes[i];
      num[k] = p;
      den += (k % 2 ? -p : p);
    }
    for (const auto p : num) ref = std::max(ref, double((p * p) / (den * den)));
  }
  CHECK_THAT(w, WithinRel(ref, 1e-9));
  const auto coarse = uniform_grid(11);
  CHECK(max_weight_ratio(nodes.points(), coarse) <= w);
  CHECK_THROWS_AS(max_weight_ratio({}, grid), std::invalid_argument);
}

TEST_CASE("adversarial bound terms without adversaries") {
  ExperimentConfig cfg;
  const auto b0 = theorem2_bound(cfg, 2.0, 3.0);
  CHECK(b0.t2 == 0.0);
  CHECK(b0.t3 == 0.0);
  CHECK(b0.t4 == 0.0);
  CHECK(b0.total == b0.t1);
  CHECK_THAT(b0.t1, WithinRel(std::pow(theorem1_ref(53, 0, 2.0, 3.0), 2), 1e-13));

  cfg.sigma_p2 = 1e-6;
  const auto b1 = theorem2_bound(cfg, 2.0, 3.0);
  CHECK(b1.t2 > 0.0);
  CHECK(b1.t3 == 0.0);
  CHECK(b1.t4 == 0.0);
  CHECK_THAT(b1.t2, WithinRel(53 * 1e-6 * b1.weight_ratio, 1e-15));
}

TEST_CASE("adversarial bound terms with adversaries") {
  ExperimentConfig cfg = fig2_config();
  cfg.A = 3;
  cfg.sigma_p2 = 1e-6;
  cfg.sigma_q2 = 0.04;
  cfg.p_loc = 0.25;
  const auto b = theorem2_bound(cfg, 2.0, 3.0);
  const double w = b.weight_ratio;
  CHECK(b.R == r_factor(18));
  CHECK(b.delta == 3.0);  // N1 = 35 is odd
  cfg.N1 = 36;
  CHECK(theorem2_bound(cfg, 2.0, 3.0).delta == 5.0);
  cfg.N1 = 35;
  CHECK_THAT(b.t3, WithinRel(2.0 * 0.2 * 100.0 + 0.75 * 3 * 0.04 * w, 1e-14));
  const double ff = (35.0 * 34.0 * 33.0) / (53.0 * 52.0 * 51.0);
  CHECK_THAT(b.t4, WithinRel(0.25 * ff * 2.0 * 3.0 * 1e4 * w, 1e-14));
  CHECK_THAT(b.total, WithinRel(b.t1 + b.t2 + b.t3 + b.t4, 1e-15));
  for (const double t : {b.t1, b.t2, b.t3, b.t4}) CHECK(t >= 0.0);
}

TEST_CASE("adversarial bound rejects more adversaries than reconstruction points") {
  ExperimentConfig cfg;
  cfg.K1 = 2;
  cfg.N1 = 4;
  cfg.A = 5;
  CHECK_THROWS_AS(theorem2_bound(cfg, 1.0, 1.0), std::invalid_argument);
  cfg.N1 = 0;
  cfg.S = 60;
  CHECK_THROWS_AS(theorem2_bound(cfg, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("first adversarial bound term falls as N1 grows") {
  ExperimentConfig cfg;
  cfg.K1 = 2;
  const auto grid = uniform_grid(101);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t n1 = 2; n1 <= 53; ++n1) {
    cfg.N1 = n1;
    const auto z = cheb_first_kind(n1);
    // d1 = 0: with d1 > 0 the parity switch of Delta doubles t1 on even N1.
    const double t1 = theorem2_bound(cfg, 0.0, 1.0, grid, z.points()).t1;
    CHECK(t1 < prev);
    prev = t1;
  }
}
