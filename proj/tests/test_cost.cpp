#include <catch_amalgamated.hpp>

#include <random>

#include "mqshmm/cost.hpp"
#include "mqshmm/errors.hpp"

using namespace mqshmm;
using Catch::Approx;

namespace {
CostParams example() {
  CostParams p;
  p.N_TS = 10;
  p.N_NR = 3;
  p.N_GP = 5;
  p.N_dim = 3;
  p.C_sol = 1;
  p.C_com = 0.1;
  p.N_WR = 2;
  p.N_TW = 1;
  p.C_jac = 0.05;
  return p;
}
}  // namespace

TEST_CASE("cost model worked examples", "[cost]") {
  const CostReport r = cost_model(example());
  CHECK(r.mono == Approx(465.0).epsilon(1e-14));
  CHECK(r.wr == Approx(102.5).epsilon(1e-14));
  CHECK(r.mono_approx == Approx(465.0).epsilon(1e-14));
}

TEST_CASE("predicted speedup for vanishing tangent cost", "[cost]") {
  CostParams p = example();
  p.kappa = 0.0;
  CHECK(std::abs(cost_model(p).predicted_speedup - 4.5) <= 1e-12);
}

TEST_CASE("efficiency predicate matches the approximate cost ratio", "[cost]") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    CostParams p;
    p.N_TS = 1 + std::floor(100 * u(rng));
    p.N_TW = 1 + std::floor((p.N_TS - 1) * u(rng));
    p.N_NR = 1 + std::floor(6 * u(rng));
    p.N_WR = 1 + std::floor(15 * u(rng));
    p.N_GP = 1 + std::floor(50 * u(rng));
    p.N_dim = 3;
    p.C_sol = 0.1 + u(rng);
    p.C_com = 0.0;
    const double q = p.N_TW / p.N_TS;
    p.kappa = 0.99 * u(rng);
    p.C_jac = p.kappa * p.C_sol / (q * p.N_NR);  // tangent cost consistent with kappa
    const CostReport r = cost_model(p);
    CHECK(r.kappa_implied == Approx(p.kappa).epsilon(1e-12));
    CHECK(r.speedup_approx == Approx(r.predicted_speedup).epsilon(1e-12));
    const double margin = std::abs(r.speedup_approx - 1.0);
    if (margin > 1e-9) CHECK(r.wr_more_efficient == (r.speedup_approx > 1.0));
  }
}

TEST_CASE("cost parameters are validated", "[cost]") {
  CostParams p = example();
  p.N_WR = 0;
  CHECK_THROWS_AS(cost_model(p), ConfigError);
  p = example();
  p.C_sol = -1;
  CHECK_THROWS_AS(cost_model(p), ConfigError);
  p = example();
  p.N_TW = 20;
  CHECK_THROWS_AS(cost_model(p), ConfigError);
}
