#include "mqshmm/material.hpp"

#include <cmath>
#include <sstream>

#include "mqshmm/errors.hpp"

namespace mqshmm {

MaterialLaw MaterialLaw::linear(double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw NumericDomain("linear law requires nu > 0");
  return MaterialLaw(Kind::Linear, nu, 0.0, 0.0);
}

MaterialLaw MaterialLaw::brauer(double alpha, double beta, double gamma) {
  if (!(alpha > 0.0) || !(beta >= 0.0) || !(gamma >= 0.0) || !std::isfinite(alpha) || !std::isfinite(beta) ||
      !std::isfinite(gamma))
    throw NumericDomain("Brauer law requires alpha > 0, beta >= 0, gamma >= 0");
  return MaterialLaw(Kind::Brauer, alpha, beta, gamma);
}

namespace {
void check_finite(const Vec2& b) {
  if (!std::isfinite(b[0]) || !std::isfinite(b[1])) {
    std::ostringstream os;
    os << "non-finite flux density (" << b[0] << ", " << b[1] << ")";
    throw NumericDomain(os.str());
  }
}
}  // namespace

double MaterialLaw::nu(double b2) const { return alpha_ + beta_ * std::exp(gamma_ * b2); }

Vec2 MaterialLaw::h(const Vec2& b) const {
  check_finite(b);
  return nu(b.squaredNorm()) * b;
}

Mat2 MaterialLaw::tangent(const Vec2& b) const {
  check_finite(b);
  const double b2 = b.squaredNorm();
  const double e = std::exp(gamma_ * b2);
  const double n = alpha_ + beta_ * e;
  return n * Mat2::Identity() + (2.0 * beta_ * gamma_ * e) * (b * b.transpose());
}

double expm1_over_x(double x, double ex) {
  if (std::abs(x) < 0.1) {
    // Taylor series of (e^x - 1)/x through x^9.
    double s = 1.0 / 3628800.0;
    s = s * x + 1.0 / 362880.0;
    s = s * x + 1.0 / 40320.0;
    s = s * x + 1.0 / 5040.0;
    s = s * x + 1.0 / 720.0;
    s = s * x + 1.0 / 120.0;
    s = s * x + 1.0 / 24.0;
    s = s * x + 1.0 / 6.0;
    s = s * x + 0.5;
    s = s * x + 1.0;
    return s;
  }
  return (ex - 1.0) / x;
}

double MaterialLaw::coenergy(const Vec2& b) const {
  check_finite(b);
  const double b2 = b.squaredNorm();
  const double x = gamma_ * b2;
  // alpha b^2/2 + (beta/(2 gamma)) (e^{gamma b^2} - 1), written so gamma = 0 is the linear limit.
  return 0.5 * b2 * (alpha_ + beta_ * expm1_over_x(x, std::exp(x)));
}

Vec2 h_of_b(const MaterialLaw& law, const Vec2& b) { return law.h(b); }
Mat2 dh_db(const MaterialLaw& law, const Vec2& b) { return law.tangent(b); }
double coenergy_density(const MaterialLaw& law, const Vec2& b) { return law.coenergy(b); }

ConductivityField ConductivityField::physical(double sigma_grain) {
  ConductivityField f;
  f.sigma[static_cast<size_t>(Region::ConductingGrain)] = sigma_grain;
  f.validate();
  return f;
}

double ConductivityField::max() const {
  double m = 0.0;
  for (double s : sigma) m = std::max(m, s);
  return m;
}

void ConductivityField::validate() const {
  for (double s : sigma)
    if (!(s >= 0.0) || !std::isfinite(s)) throw NumericDomain("conductivity must be finite and non-negative");
  if (sigma[static_cast<size_t>(Region::Insulation)] != 0.0 || sigma[static_cast<size_t>(Region::Air)] != 0.0)
    throw NumericDomain("conductivity must vanish in insulation and air");
}

const MaterialLaw& MaterialSet::law(Region r) const {
  switch (r) {
    case Region::ConductingGrain: return grain;
    case Region::Insulation: return insulation;
    case Region::Air: return air;
    case Region::Inductor: return inductor;
    case Region::Homogenized: break;
  }
  throw CoverageError("homogenized region has no direct material law");
}

}  // namespace mqshmm
