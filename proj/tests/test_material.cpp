#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "mqshmm/errors.hpp"
#include "mqshmm/material.hpp"

using namespace mqshmm;
using Catch::Approx;

namespace {
const MaterialLaw kBrauer = MaterialLaw::brauer(388.0, 0.3774, 2.97);
}

TEST_CASE("h_of_b oracles", "[material]") {
  CHECK(h_of_b(kBrauer, Vec2::Zero()).norm() == 0.0);
  const Vec2 h = h_of_b(kBrauer, Vec2(1, 0));
  CHECK(h[0] == Approx(388.0 + 0.3774 * std::exp(2.97)).epsilon(1e-14));
  CHECK(h[0] == Approx(395.36).margin(0.01));
  CHECK(h[1] == 0.0);
  const Vec2 hl = h_of_b(MaterialLaw::linear(100), Vec2(0.5, -0.5));
  CHECK(hl[0] == Approx(50));
  CHECK(hl[1] == Approx(-50));
}

TEST_CASE("dh_db oracles", "[material]") {
  CHECK((dh_db(MaterialLaw::linear(7.0), Vec2(0.3, -2)) - 7.0 * Mat2::Identity()).norm() == 0.0);
  const Mat2 d = dh_db(kBrauer, Vec2(1, 0));
  const double nu1 = 388.0 + 0.3774 * std::exp(2.97);
  CHECK(d(0, 0) == Approx(nu1 + 2 * 0.3774 * 2.97 * std::exp(2.97)).epsilon(1e-14));
  CHECK(d(0, 0) == Approx(439.05).margin(0.01));
  CHECK(d(1, 1) == Approx(nu1).epsilon(1e-14));
  CHECK(d(0, 1) == 0.0);
  CHECK(d(1, 0) == 0.0);
}

TEST_CASE("dh_db matches central differences at random states", "[material]") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 100; ++i) {
    const Vec2 b(u(rng), u(rng));
    const Mat2 d = dh_db(kBrauer, b);
    CHECK((d - d.transpose()).norm() <= 1e-12 * d.norm());
    Mat2 fd;
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      Vec2 e = Vec2::Zero();
      e[j] = h;
      fd.col(j) = (h_of_b(kBrauer, b + e) - h_of_b(kBrauer, b - e)) / (2 * h);
    }
    CHECK((fd - d).norm() <= 1e-6 * d.norm());
  }
}

TEST_CASE("co-energy density oracles", "[material]") {
  CHECK(coenergy_density(kBrauer, Vec2::Zero()) == 0.0);
  CHECK(coenergy_density(MaterialLaw::linear(2.0), Vec2(3, 0)) == Approx(9.0));
  const double w = coenergy_density(kBrauer, Vec2(0.6, 0.8));
  const double closed = 194.0 + 0.3774 / (2 * 2.97) * (std::exp(2.97) - 1.0);
  CHECK(w == Approx(closed).epsilon(1e-13));
  CHECK(w == Approx(195.17).margin(0.01));
  // Quadrature of nu(s^2) s over [0,1] (composite Simpson).
  const int n = 2000;
  double q = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = static_cast<double>(i) / n;
    const double f = kBrauer.nu(s * s) * s;
    q += f * ((i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2));
  }
  q /= 3.0 * n;
  CHECK(w == Approx(q).epsilon(1e-10));
  // Small-|b| limit uses the stable (e^x-1)/x form.
  const Vec2 tiny(1e-9, 0);
  CHECK(coenergy_density(kBrauer, tiny) == Approx(0.5 * kBrauer.nu(0) * 1e-18).epsilon(1e-12));
}

TEST_CASE("non-finite flux is rejected", "[material]") {
  const Vec2 bad(std::numeric_limits<double>::quiet_NaN(), 0);
  CHECK_THROWS_AS(h_of_b(kBrauer, bad), NumericDomain);
  CHECK_THROWS_AS(dh_db(kBrauer, bad), NumericDomain);
  CHECK_THROWS_AS(coenergy_density(kBrauer, Vec2(std::numeric_limits<double>::infinity(), 0)), NumericDomain);
}

TEST_CASE("conductivity field", "[material]") {
  const ConductivityField s = ConductivityField::physical(5e6);
  CHECK(s(Region::ConductingGrain) == 5e6);
  CHECK(s(Region::Insulation) == 0.0);
  CHECK(s(Region::Air) == 0.0);
  CHECK_NOTHROW(s.validate());
  ConductivityField bad = s;
  bad.sigma[static_cast<size_t>(Region::Air)] = 1.0;
  CHECK_THROWS(bad.validate());
}
