#pragma once
// Magnetic constitutive laws h = H(b) (linear and Brauer) with exact tangents
// and co-energy densities, and piecewise-constant conductivity fields.

#include <array>

#include "mqshmm/fem.hpp"
#include "mqshmm/mesh.hpp"

namespace mqshmm {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kMu0 = 4e-7 * kPi;
inline constexpr double kNu0 = 1.0 / kMu0;

// Reluctivity law nu(|b|^2) = alpha + beta exp(gamma |b|^2); the linear law is
// the special case beta = gamma = 0 with alpha = nu.
class MaterialLaw {
 public:
  enum class Kind { Linear, Brauer };

  MaterialLaw() : MaterialLaw(linear(kNu0)) {}
  static MaterialLaw linear(double nu);
  static MaterialLaw brauer(double alpha, double beta, double gamma);

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ == Kind::Linear; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }

  double nu(double b_squared) const;
  Vec2 h(const Vec2& b) const;
  Mat2 tangent(const Vec2& b) const;
  double coenergy(const Vec2& b) const;

 private:
  MaterialLaw(Kind k, double a, double b, double g) : kind_(k), alpha_(a), beta_(b), gamma_(g) {}
  Kind kind_;
  double alpha_, beta_, gamma_;
};

// Free-function API; all throw NumericDomain on non-finite b.
Vec2 h_of_b(const MaterialLaw& law, const Vec2& b);
Mat2 dh_db(const MaterialLaw& law, const Vec2& b);
double coenergy_density(const MaterialLaw& law, const Vec2& b);

// (e^x - 1)/x, accurate for all x including 0; shared by the scalar and SIMD kernels.
double expm1_over_x(double x, double ex);

struct ConductivityField {
  std::array<double, kRegionCount> sigma{};  // [S/m] per region

  // sigma_grain in ConductingGrain, zero elsewhere.
  static ConductivityField physical(double sigma_grain);
  double operator()(Region r) const { return sigma[static_cast<size_t>(r)]; }
  double max() const;
  // sigma >= 0 everywhere and exactly 0 in Insulation and Air.
  void validate() const;
};

// Laws per region. Homogenized regions carry no direct law (their data comes
// from the cell problems).
struct MaterialSet {
  MaterialLaw grain = MaterialLaw::brauer(388.0, 0.3774, 2.97);
  MaterialLaw insulation = MaterialLaw::linear(kNu0);
  MaterialLaw air = MaterialLaw::linear(kNu0);
  MaterialLaw inductor = MaterialLaw::linear(kNu0);
  const MaterialLaw& law(Region r) const;
};

}  // namespace mqshmm
