#pragma once
// Macroscale transient solver: residual/tangent assembly with a per-Gauss-point
// constitutive table for the homogenized region, plain Newton-Raphson and
// backward-Euler time stepping.

#include <functional>
#include <memory>
#include <vector>

#include "mqshmm/cell.hpp"
#include "mqshmm/fem.hpp"
#include "mqshmm/material.hpp"
#include "mqshmm/mesh.hpp"
#include "mqshmm/waveform.hpp"

namespace mqshmm {

struct SourceSpec {
  double j_s0 = 0.0;  // [A/m^2]
  double f = 50e3;    // [Hz]
  double s(double t) const;
  void validate() const;
};

enum class Provenance { Exact, FiniteDifference, FrozenWaveform };
const char* to_string(Provenance p);

struct GaussPointLaw {
  Vec2 h_M = Vec2::Zero();
  Mat2 dh_M_db_M = Mat2::Zero();
  Provenance provenance = Provenance::Exact;
  bool valid = false;
};
using GaussPointTable = std::vector<GaussPointLaw>;

struct MacroOptions {
  std::vector<BoundaryTag> dirichlet = {BoundaryTag::GammaInf, BoundaryTag::GammaH};
  double sigma_M = 0.0;  // out-of-plane homogenized conductivity [S/m] (0: magnetostatic macro problem)
};

class MacroModel {
 public:
  static std::shared_ptr<const MacroModel> build(Mesh2D mesh, MaterialSet laws, MacroOptions options = {});

  const Mesh2D& mesh() const { return mesh_; }
  const DofMap& dofs() const { return dofs_; }
  const MaterialSet& laws() const { return laws_; }
  const MacroOptions& options() const { return options_; }
  int n_free() const { return dofs_.n_free(); }
  int n_gauss() const { return static_cast<int>(gauss_elements_.size()); }
  // Triangle index of Gauss point g.
  int gauss_element(int g) const { return gauss_elements_[static_cast<size_t>(g)]; }
  double element_area(int t) const { return area_[static_cast<size_t>(t)]; }
  const Mat23& element_curl(int t) const { return curl_[static_cast<size_t>(t)]; }
  const AssemblyPattern& pattern() const { return pattern_; }
  const SpMat& mass_matrix() const { return mass_; }        // sigma_M mass
  const SpMat& l2_mass_matrix() const { return l2_mass_; }  // unit mass (spatial L2 norm)
  const Vec& unit_source_load() const { return source_load_; }  // int_inductor phi_i

  // Element-wise flux density b = curl a (piecewise constant).
  Vec2 element_b(const Vec& alpha, int t) const;
  // Element mean of a_z.
  double element_a(const Vec& alpha, int t) const;
  std::vector<Vec2> gauss_b(const Vec& alpha) const;
  // Co-energy of all non-homogenized elements.
  double direct_energy(const Vec& alpha) const;
  // Spatial L2 norm of the field a_z for free DOF values.
  double l2_norm(const Vec& alpha) const;

 private:
  Mesh2D mesh_;
  MaterialSet laws_;
  MacroOptions options_;
  DofMap dofs_;
  AssemblyPattern pattern_;
  std::vector<double> area_;
  std::vector<Mat23> curl_;
  std::vector<int> gauss_elements_;
  std::vector<int> gauss_of_element_;
  SpMat mass_, l2_mass_;
  Vec source_load_;
};
using MacroModelPtr = std::shared_ptr<const MacroModel>;

struct MacroState {
  Vec alpha;
  double t = 0.0;
};

struct MacroAssembly {
  Vec residual;
  SpMat jacobian;
  double abs_scale = 0.0;  // round-off scale of the residual
};

// Residual M (a - a_prev)/dt + F(a) - j_s0 s(t) f and (optionally) its tangent.
MacroAssembly assemble_macro(const MacroModel& model, const MacroState& prev, const MacroState& state,
                             const GaussPointTable& laws, double dt, const SourceSpec& source, bool want_jacobian);
Vec macro_residual(const MacroModel& model, const MacroState& prev, const MacroState& state,
                   const GaussPointTable& laws, double dt, const SourceSpec& source);
// One Newton update using residual and tangent from `laws` at `state`.
MacroState macro_newton_step(const MacroModel& model, const MacroState& prev, const MacroState& state,
                             const GaussPointTable& laws, double dt, const SourceSpec& source);

struct ProviderContext {
  int step = 0;        // 1-based time step index
  int iteration = 0;   // 0-based Newton iteration (evaluation) index
  double t = 0.0;
  double dt = 0.0;
  const MacroState* prev = nullptr;
  const MacroState* iterate = nullptr;
};
// Fills the constitutive table for every Gauss point at the current iterate.
using MaterialProvider =
    std::function<void(const ProviderContext& ctx, const std::vector<Vec2>& b_M, GaussPointTable& table)>;
// Called once per accepted step.
using StepCallback = std::function<void(int step, const MacroState& accepted)>;

struct MacroNewtonOptions {
  double tol = 1e-6;  // residual relative to the source-amplitude load
  int max_iter = 25;
};

struct MacroRunResult {
  Waveform waveform;
  std::vector<int> newton_evaluations;  // per step: provider evaluations (>= 1)
  std::vector<std::vector<double>> residual_traces;
  double provider_seconds = 0.0;  // time spent inside the provider
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
};

// Backward-Euler transient from `initial` over n_steps uniform steps. When
// `guess` (same grid) is given, sample k seeds the Newton iteration of step k.
MacroRunResult backward_euler_run(const MacroModel& model, const MacroState& initial, double t_end, int n_steps,
                                  const SourceSpec& source, const MaterialProvider& provider,
                                  const MacroNewtonOptions& newton = {}, const StepCallback& on_step = {},
                                  const Waveform* guess = nullptr);

// Table filled from fixed per-Gauss-point laws (homogenized single-scale runs).
MaterialProvider constant_law_provider(const MaterialLaw& law);

}  // namespace mqshmm
