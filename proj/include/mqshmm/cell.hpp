#pragma once
// Mesoscale cell engine: the conductivity cell problem and homogenized
// conductivity, the transient nonlinear correction problem, upscaling of the
// magnetic law, and the exact (frozen-correction) and finite-difference
// Jacobians of the upscaled law.
//
// The cell is the unit square yhat in [-1/2,1/2]^2. The unknown is the scaled
// correction ahat_c = a_c / eps, so that b_c = curl_yhat ahat_c and the
// conductivity enters as sigma_eff = eps^2 sigma.

#include <Eigen/SparseCholesky>
#include <memory>
#include <vector>

#include "mqshmm/fem.hpp"
#include "mqshmm/material.hpp"
#include "mqshmm/mesh.hpp"

namespace mqshmm {

struct CellOptions {
  CellLayout layout = SquareInclusion{0.64};
  int n_per_side = 20;
  MaterialLaw grain_law = MaterialLaw::brauer(388.0, 0.3774, 2.97);
  MaterialLaw insulation_law = MaterialLaw::linear(kNu0);
  ConductivityField conductivity = ConductivityField::physical(5e6);  // [S/m]
  double period = 125e-6;            // eps: physical cell size [m]
  double sigma_reg_factor = 1e-6;    // regularization of the conductivity cell problem
};

class CellModel {
 public:
  static std::shared_ptr<const CellModel> build(const CellOptions& options);

  const CellOptions& options() const { return options_; }
  const Mesh2D& mesh() const { return mesh_; }
  const PeriodicPairing& pairing() const { return pairing_; }
  const DofMap& dofs() const { return dofs_; }
  int n_free() const { return dofs_.n_free(); }
  int n_elements() const { return static_cast<int>(area_.size()); }
  double domain_area() const { return domain_area_; }

  // Per-element data (structure of arrays).
  const std::vector<double>& area() const { return area_; }
  const std::vector<Mat23>& curl() const { return curl_; }
  const std::vector<std::array<int, 3>>& element_dofs() const { return elem_dofs_; }
  const std::vector<double>& sigma_eff() const { return sigma_eff_; }
  const std::vector<double>& law_alpha() const { return alpha_; }
  const std::vector<double>& law_beta() const { return beta_; }
  const std::vector<double>& law_gamma() const { return gamma_; }

  const AssemblyPattern& pattern() const { return pattern_; }
  const Vec& mass_moment() const { return m_; }                           // m_i = int sigma_eff phi_i
  double total_conductance() const { return S_; }                         // S = int sigma_eff
  bool conducting() const { return S_ > 0.0; }
  // Load vectors of the projected source for unit db_x/dt and db_y/dt (kappa = 1).
  const Vec& source_bx() const { return src_bx_; }
  const Vec& source_by() const { return src_by_; }
  // Conductivity-weighted cell means removed from the source field.
  double source_mean_x() const { return mean_ex_; }
  double source_mean_y() const { return mean_ey_; }
  // Node coordinates of element e (actual, not periodically wrapped).
  const TrianglePoints& element_points(int e) const { return points_[static_cast<size_t>(e)]; }

  // Projected mass applied to a vector: (M - m m^T / S) v.
  Vec projected_mass_times(const Vec& v) const;
  // sigma_eff mass matrix; shares the storage layout of pattern().
  const SpMat& mass_matrix() const { return mass_; }

 private:
  CellOptions options_;
  Mesh2D mesh_;
  PeriodicPairing pairing_;
  DofMap dofs_;
  double domain_area_ = 1.0;
  std::vector<double> area_;
  std::vector<Mat23> curl_;
  std::vector<std::array<int, 3>> elem_dofs_;
  std::vector<TrianglePoints> points_;
  std::vector<double> sigma_eff_;
  std::vector<double> alpha_, beta_, gamma_;
  AssemblyPattern pattern_;
  SpMat mass_;
  Vec m_;
  double S_ = 0.0;
  Vec src_bx_, src_by_;
  double mean_ex_ = 0.0, mean_ey_ = 0.0;
};

using CellModelPtr = std::shared_ptr<const CellModel>;

struct MacroSource {
  Vec2 b_M = Vec2::Zero();      // [T]
  Vec2 db_M_dt = Vec2::Zero();  // [T/s]
  double da_M_dt = 0.0;         // [V s/m / s]; annihilated by the zero-net-current projection
  double kappa = 1.0;
};

struct UpscaledLaw {
  Vec2 h_M = Vec2::Zero();
  Mat2 dh_M_db_M = Mat2::Zero();
};

struct NewtonOptions {
  double tol = 1e-6;   // relative residual tolerance
  int max_iter = 15;
};

struct NewtonTrace {
  std::vector<double> residuals;  // residual norm at each evaluated iterate
  bool converged = false;
  int updates() const { return residuals.empty() ? 0 : static_cast<int>(residuals.size()) - 1; }
};

// One mesoscale cell: immutable model plus correction DOFs at time t.
struct CellState {
  CellModelPtr model;
  Vec alpha;      // n_free entries; the anchor DOF is implicit and equal to 0
  double t = 0.0;

  static CellState initial(CellModelPtr model, double t0 = 0.0);
  // Area-weighted cell average of b_c.
  Vec2 mean_bc() const;
  double max_bc() const;
};

// Element-wise b_c = curl(ahat_c) for a DOF vector.
void cell_flux(const CellModel& model, const Vec& alpha, std::vector<double>& bx, std::vector<double>& by);

// Conductivity cell problem ((grad psi), sigma (grad chi - e_j)) = 0, j in {0,1};
// returns nodal chi (periodic, anchored).
Vec solve_conductivity_cell(const CellModel& model, int direction);
Mat2 homogenized_sigma(const CellModel& model);

// Residual of one backward-Euler step of the correction problem at `alpha`.
Vec cell_residual(const CellState& prev, const Vec& alpha, const MacroSource& source, double dt);

// Backward-Euler step solved by Newton. Throws ConvergenceFailure.
CellState meso_step(const CellState& prev, const MacroSource& source, double dt, const NewtonOptions& newton = {},
                    NewtonTrace* trace = nullptr, const Vec* initial_guess = nullptr);

Vec2 upscale_h(const CellState& cell, const Vec2& b_M);
Mat2 exact_jacobian(const CellState& cell, const Vec2& b_M);
UpscaledLaw upscale(const CellState& cell, const Vec2& b_M);
// Area-averaged co-energy density at b_c + b_M.
double cell_energy_density(const CellState& cell, const Vec2& b_M);
// Cell-averaged Joule density of the step prev -> cur (backward difference).
double cell_loss_density(const CellState& prev, const CellState& cur, const MacroSource& source, double dt);

double default_fd_delta(const Vec2& b_M);

struct FdJacobianResult {
  UpscaledLaw law;
  int solve_count = 0;
  CellState nominal;
};
// Three meso steps (nominal, b_M + delta e_x, b_M + delta e_y); the time
// derivative of b_M is perturbed consistently by delta/dt.
FdJacobianResult fd_jacobian(const CellState& cell_prev, const MacroSource& source, double dt, double delta,
                             const NewtonOptions& newton = {}, const Vec* initial_guess = nullptr);

// Blocks of the coupled (macro, cell) Newton system at one Gauss point, all
// evaluated at (alpha, b_M) with backward difference to `prev`.
struct CellLinearization {
  Vec residual;            // R_m
  SpMat stiffness;         // K_t (tangent of the material term)
  Eigen::Matrix<double, Eigen::Dynamic, 2> dR_db;  // dR_m/db_M (includes source term / dt)
  Eigen::Matrix<double, 2, Eigen::Dynamic> dh_dalpha;  // d h_M / d alpha
  Mat2 dh_db = Mat2::Zero();  // partial d h_M / d b_M (alpha frozen)
  Vec2 h = Vec2::Zero();
  double abs_scale = 0.0;  // round-off scale of the residual
};
CellLinearization linearize_cell(const CellState& prev, const Vec& alpha, const MacroSource& source, double dt);

// Solves (M~/dt + K) x = r for a cell (projected mass handled exactly).
class CellJacobianSolver {
 public:
  CellJacobianSolver(const CellModel& model, const SpMat& stiffness, double dt);
  Vec solve(const Vec& r) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& r) const;

 private:
  const CellModel& model_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  Vec w_;              // A^{-1} m
  double denom_ = 1.0; // S dt - m^T A^{-1} m
  bool projected_ = false;
};

}  // namespace mqshmm
