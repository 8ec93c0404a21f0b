#include "mqshmm/cell.hpp"

#include <cmath>
#include <sstream>

#include "mqshmm/errors.hpp"
#include "mqshmm/kernels.hpp"

namespace mqshmm {

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

std::shared_ptr<const CellModel> CellModel::build(const CellOptions& options) {
  if (!(options.period > 0.0)) throw InvalidGeometry("cell period must be positive");
  if (!(options.sigma_reg_factor > 0.0)) throw NumericDomain("sigma_reg_factor must be positive");
  std::shared_ptr<CellModel> c(new CellModel());
  c->options_ = options;
  CellMesh cm = generate_cell_mesh(options.layout, options.n_per_side);
  c->mesh_ = std::move(cm.mesh);
  c->pairing_ = std::move(cm.pairing);
  c->pairing_.validate(c->mesh_);
  c->dofs_ = apply_periodic(DofMap::all_free(c->mesh_.num_nodes()), c->pairing_);
  c->domain_area_ = c->mesh_.total_area();

  const int ne = c->mesh_.num_triangles();
  const double eps2 = options.period * options.period;
  c->area_.resize(static_cast<size_t>(ne));
  c->curl_.resize(static_cast<size_t>(ne));
  c->elem_dofs_.resize(static_cast<size_t>(ne));
  c->points_.resize(static_cast<size_t>(ne));
  c->sigma_eff_.resize(static_cast<size_t>(ne));
  c->alpha_.resize(static_cast<size_t>(ne));
  c->beta_.resize(static_cast<size_t>(ne));
  c->gamma_.resize(static_cast<size_t>(ne));
  for (int e = 0; e < ne; ++e) {
    const size_t k = static_cast<size_t>(e);
    c->points_[k] = triangle_points(c->mesh_, e);
    const ElementGeometry g = element_geometry(c->points_[k]);
    c->area_[k] = g.area;
    c->curl_[k] = g.curl();
    for (int a = 0; a < 3; ++a) c->elem_dofs_[k][static_cast<size_t>(a)] = c->dofs_.dof(c->mesh_.triangles[k][static_cast<size_t>(a)]);
    const Region r = c->mesh_.regions[k];
    const MaterialLaw& law = r == Region::ConductingGrain ? options.grain_law : options.insulation_law;
    c->alpha_[k] = law.alpha();
    c->beta_[k] = law.beta();
    c->gamma_[k] = law.gamma();
    c->sigma_eff_[k] = eps2 * options.conductivity(r);
  }

  c->pattern_ = AssemblyPattern(c->mesh_, c->dofs_);
  c->mass_ = c->pattern_.zero_matrix();
  const int n = c->dofs_.n_free();
  c->m_ = Vec::Zero(n);
  Vec raw_x = Vec::Zero(n), raw_y = Vec::Zero(n);
  double int_y2 = 0.0, int_y1 = 0.0;
  for (int e = 0; e < ne; ++e) {
    const size_t k = static_cast<size_t>(e);
    const double s = c->sigma_eff_[k];
    if (s == 0.0) continue;
    const double a = c->area_[k];
    c->pattern_.scatter_matrix(e, element_mass(c->points_[k], s), c->mass_);
    const auto& p = c->points_[k];
    const double sx = p[0].x + p[1].x + p[2].x, sy = p[0].y + p[1].y + p[2].y;
    Vec3 mi, fx, fy;
    for (int i = 0; i < 3; ++i) {
      mi[i] = s * a / 3.0;
      // int_T y phi_i = (A/12)(sum_j y_j + y_i); source field for unit db/dt:
      // e = -(db_x/dt) y2 + (db_y/dt) y1.
      fx[i] = -s * a / 12.0 * (sy + p[static_cast<size_t>(i)].y);
      fy[i] = s * a / 12.0 * (sx + p[static_cast<size_t>(i)].x);
    }
    c->pattern_.scatter_vector(e, mi, c->m_);
    c->pattern_.scatter_vector(e, fx, raw_x);
    c->pattern_.scatter_vector(e, fy, raw_y);
    c->S_ += s * a;
    int_y2 += s * a * sy / 3.0;
    int_y1 += s * a * sx / 3.0;
  }
  if (c->S_ > 0.0) {
    c->mean_ex_ = -int_y2 / c->S_;
    c->mean_ey_ = int_y1 / c->S_;
  }
  c->src_bx_ = raw_x - c->mean_ex_ * c->m_;
  c->src_by_ = raw_y - c->mean_ey_ * c->m_;
  return c;
}

Vec CellModel::projected_mass_times(const Vec& v) const {
  Vec out = mass_ * v;
  if (S_ > 0.0) out -= m_ * (m_.dot(v) / S_);
  return out;
}

// ---------------------------------------------------------------------------
// State helpers
// ---------------------------------------------------------------------------

CellState CellState::initial(CellModelPtr model, double t0) {
  CellState s;
  s.alpha = Vec::Zero(model->n_free());
  s.model = std::move(model);
  s.t = t0;
  return s;
}

void cell_flux(const CellModel& model, const Vec& alpha, std::vector<double>& bx, std::vector<double>& by) {
  const int ne = model.n_elements();
  bx.resize(static_cast<size_t>(ne));
  by.resize(static_cast<size_t>(ne));
  const auto& curl = model.curl();
  const auto& dofs = model.element_dofs();
  for (int e = 0; e < ne; ++e) {
    const size_t k = static_cast<size_t>(e);
    double x = 0.0, y = 0.0;
    for (int a = 0; a < 3; ++a) {
      const int d = dofs[k][static_cast<size_t>(a)];
      if (d < 0) continue;
      x += curl[k](0, a) * alpha[d];
      y += curl[k](1, a) * alpha[d];
    }
    bx[k] = x;
    by[k] = y;
  }
}

Vec2 CellState::mean_bc() const {
  std::vector<double> bx, by;
  cell_flux(*model, alpha, bx, by);
  Vec2 m = Vec2::Zero();
  for (size_t k = 0; k < bx.size(); ++k) {
    m[0] += model->area()[k] * bx[k];
    m[1] += model->area()[k] * by[k];
  }
  return m / model->domain_area();
}

double CellState::max_bc() const {
  std::vector<double> bx, by;
  cell_flux(*model, alpha, bx, by);
  double m = 0.0;
  for (size_t k = 0; k < bx.size(); ++k) m = std::max(m, std::hypot(bx[k], by[k]));
  return m;
}

// ---------------------------------------------------------------------------
// Conductivity cell problem
// ---------------------------------------------------------------------------

namespace {

std::vector<double> regularized_sigma(const CellModel& model) {
  const auto& sig = model.options().conductivity;
  const double reg = model.options().sigma_reg_factor * sig.max();
  std::vector<double> s(static_cast<size_t>(model.n_elements()));
  for (int e = 0; e < model.n_elements(); ++e) {
    const double v = sig(model.mesh().regions[static_cast<size_t>(e)]);
    s[static_cast<size_t>(e)] = v > 0.0 ? v : reg;
  }
  return s;
}

}  // namespace

Vec solve_conductivity_cell(const CellModel& model, int direction) {
  if (direction != 0 && direction != 1) throw Inconsistency("conductivity cell direction must be 0 or 1");
  if (!(model.options().conductivity.max() > 0.0)) throw SolverFailure("conductivity cell problem: sigma vanishes everywhere");
  const std::vector<double> sig = regularized_sigma(model);
  const auto& mesh = model.mesh();
  SparseSystem sys = assemble(mesh, model.dofs(), [&](int e) {
    const auto& p = model.element_points(e);
    const ElementGeometry g = element_geometry(p);
    const double s = sig[static_cast<size_t>(e)];
    ElementContribution c;
    c.matrix = s * g.area * (g.grad.transpose() * g.grad);
    for (int i = 0; i < 3; ++i) c.vector[i] = s * g.area * g.grad(direction, i);
    return c;
  });
  const Vec chi = solve_linear(sys, LinearSolverKind::LDLT);
  return model.dofs().expand(chi);
}

Mat2 homogenized_sigma(const CellModel& model) {
  const std::vector<double> sig = regularized_sigma(model);
  Mat2 out = Mat2::Zero();
  for (int j = 0; j < 2; ++j) {
    const Vec chi = solve_conductivity_cell(model, j);
    for (int e = 0; e < model.n_elements(); ++e) {
      const auto& tri = model.mesh().triangles[static_cast<size_t>(e)];
      const ElementGeometry g = element_geometry(model.element_points(e));
      Vec2 grad_chi = Vec2::Zero();
      for (int a = 0; a < 3; ++a) grad_chi += g.grad.col(a) * chi[tri[static_cast<size_t>(a)]];
      const double s = sig[static_cast<size_t>(e)];
      for (int i = 0; i < 2; ++i) out(i, j) += g.area * s * ((i == j ? 1.0 : 0.0) - grad_chi[i]);
    }
  }
  return out / model.domain_area();
}

// ---------------------------------------------------------------------------
// Transient correction problem
// ---------------------------------------------------------------------------

namespace {

struct MaterialAssembly {
  Vec force;          // F(alpha; b_M)
  double abs_scale;   // norm of the element-wise absolute contributions (round-off scale)
  SpMat tangent;      // K_t (pattern storage), only if requested
  std::vector<double> d11, d12, d22;
};

MaterialAssembly assemble_material(const CellModel& model, const Vec& alpha, const Vec2& b_M, bool want_tangent) {
  const int ne = model.n_elements();
  std::vector<double> bx, by, hx(static_cast<size_t>(ne)), hy(static_cast<size_t>(ne));
  cell_flux(model, alpha, bx, by);
  MaterialAssembly out;
  if (want_tangent) {
    out.d11.resize(static_cast<size_t>(ne));
    out.d12.resize(static_cast<size_t>(ne));
    out.d22.resize(static_cast<size_t>(ne));
  }
  kernels::FluxBatch fb{static_cast<size_t>(ne), bx.data(), by.data(), b_M[0], b_M[1]};
  kernels::LawParams lp{model.law_alpha().data(), model.law_beta().data(), model.law_gamma().data()};
  kernels::LawOutputs lo{hx.data(), hy.data(), want_tangent ? out.d11.data() : nullptr,
                         want_tangent ? out.d12.data() : nullptr, want_tangent ? out.d22.data() : nullptr, nullptr};
  kernels::evaluate_law(fb, lp, lo);

  const int n = model.n_free();
  out.force = Vec::Zero(n);
  Vec abs_sum = Vec::Zero(n);
  if (want_tangent) out.tangent = model.pattern().zero_matrix();
  const auto& curl = model.curl();
  const auto& area = model.area();
  for (int e = 0; e < ne; ++e) {
    const size_t k = static_cast<size_t>(e);
    const Vec2 h(hx[k], hy[k]);
    if (!std::isfinite(h[0]) || !std::isfinite(h[1])) {
      std::ostringstream os;
      os << "non-finite field in cell element " << e;
      throw NumericDomain(os.str());
    }
    const Vec3 f = area[k] * (curl[k].transpose() * h);
    model.pattern().scatter_vector(e, f, out.force);
    model.pattern().scatter_vector(e, f.cwiseAbs(), abs_sum);
    if (want_tangent) {
      Mat2 d;
      d << out.d11[k], out.d12[k], out.d12[k], out.d22[k];
      model.pattern().scatter_matrix(e, area[k] * (curl[k].transpose() * d * curl[k]), out.tangent);
    }
  }
  out.abs_scale = abs_sum.norm();
  return out;
}

Vec source_load(const CellModel& model, const MacroSource& src) {
  return src.kappa * (src.db_M_dt[0] * model.source_bx() + src.db_M_dt[1] * model.source_by());
}

void check_source(const MacroSource& src, double dt) {
  if (!(dt > 0.0)) throw NumericDomain("time step must be positive");
  if (!src.b_M.allFinite() || !src.db_M_dt.allFinite() || !std::isfinite(src.da_M_dt))
    throw NumericDomain("non-finite macroscale source");
}

Vec residual_from(const CellModel& model, const Vec& alpha_prev, const Vec& alpha, const Vec& force, const Vec& load,
                  double dt) {
  return model.projected_mass_times(alpha - alpha_prev) / dt + force - load;
}

}  // namespace

CellJacobianSolver::CellJacobianSolver(const CellModel& model, const SpMat& stiffness, double dt) : model_(model) {
  SpMat a = stiffness;
  const SpMat& m = model.mass_matrix();
  if (a.nonZeros() != m.nonZeros()) throw Inconsistency("cell Jacobian: stiffness/mass storage layouts differ");
  for (Eigen::Index k = 0; k < a.nonZeros(); ++k) a.valuePtr()[k] += m.valuePtr()[k] / dt;
  ldlt_.compute(a);
  if (ldlt_.info() != Eigen::Success) throw SolverFailure("cell Jacobian factorization failed");
  const Vec d = ldlt_.vectorD();
  if (d.size() > 0 && !(d.cwiseAbs().minCoeff() > 1e-14 * d.cwiseAbs().maxCoeff()))
    throw SolverFailure("cell Jacobian is singular (zero pivot)");
  projected_ = model.conducting();
  if (projected_) {
    w_ = ldlt_.solve(model.mass_moment());
    denom_ = model.total_conductance() * dt - model.mass_moment().dot(w_);
    if (!(std::abs(denom_) > 1e-14 * model.total_conductance() * dt))
      throw SolverFailure("cell Jacobian: projected mass update is singular");
  }
}

Vec CellJacobianSolver::solve(const Vec& r) const {
  Vec y = ldlt_.solve(r);
  if (projected_) y += w_ * (model_.mass_moment().dot(y) / denom_);
  return y;
}

Eigen::MatrixXd CellJacobianSolver::solve(const Eigen::MatrixXd& r) const {
  Eigen::MatrixXd y = ldlt_.solve(r);
  if (projected_) y += w_ * ((model_.mass_moment().transpose() * y) / denom_);
  return y;
}

Vec cell_residual(const CellState& prev, const Vec& alpha, const MacroSource& source, double dt) {
  check_source(source, dt);
  const CellModel& model = *prev.model;
  const MaterialAssembly ma = assemble_material(model, alpha, source.b_M, false);
  return residual_from(model, prev.alpha, alpha, ma.force, source_load(model, source), dt);
}

namespace {
constexpr int kMaxBacktracks = 12;
}  // namespace

CellState meso_step(const CellState& prev, const MacroSource& source, double dt, const NewtonOptions& newton,
                    NewtonTrace* trace, const Vec* initial_guess) {
  check_source(source, dt);
  if (!prev.alpha.allFinite()) throw NumericDomain("previous cell state is not finite");
  const CellModel& model = *prev.model;
  const Vec load = source_load(model, source);

  // Reference scale: residual at the previous state (independent of the guess).
  double ref = 0.0;
  Vec alpha = prev.alpha;
  if (initial_guess) {
    if (initial_guess->size() != prev.alpha.size()) throw Inconsistency("meso_step: initial guess has wrong size");
    const MaterialAssembly m0 = assemble_material(model, prev.alpha, source.b_M, false);
    ref = (m0.force - load).norm();
    alpha = *initial_guess;
  }
  NewtonTrace local;
  NewtonTrace& tr = trace ? *trace : local;
  tr.residuals.clear();
  tr.converged = false;
  for (int it = 0;; ++it) {
    const MaterialAssembly ma = assemble_material(model, alpha, source.b_M, true);
    const Vec r = residual_from(model, prev.alpha, alpha, ma.force, load, dt);
    const double rn = r.norm();
    tr.residuals.push_back(rn);
    if (it == 0 && !initial_guess) ref = rn;
    const double floor = 1e-12 * (ma.abs_scale + load.norm());
    if (rn <= std::max(newton.tol * ref, floor)) {
      tr.converged = true;
      break;
    }
    if (it >= newton.max_iter) {
      std::ostringstream os;
      os << "cell Newton did not converge in " << newton.max_iter << " iterations (residual " << rn << ", target "
         << newton.tol * ref << ", round-off floor " << floor << "; history";
      for (double v : tr.residuals) os << ' ' << v;
      os << ")";
      throw ConvergenceFailure(os.str(), rn);
    }
    const CellJacobianSolver solver(model, ma.tangent, dt);
    const Vec step = solver.solve(r);
    // Backtracking on the residual norm: the exponential branch of the law
    // makes full steps from far-off iterates overshoot.
    double s = 1.0;
    for (int ls = 0;; ++ls) {
      Vec trial = alpha - s * step;
      if (ls == kMaxBacktracks) {
        alpha = std::move(trial);
        break;
      }
      if (trial.allFinite()) {
        const MaterialAssembly mt = assemble_material(model, trial, source.b_M, false);
        const double rt = residual_from(model, prev.alpha, trial, mt.force, load, dt).norm();
        if (std::isfinite(rt) && rt <= (1.0 - 1e-4 * s) * rn) {
          alpha = std::move(trial);
          break;
        }
      }
      s *= 0.5;
    }
    if (!alpha.allFinite()) throw ConvergenceFailure("cell Newton produced a non-finite iterate", rn);
  }
  CellState next;
  next.model = prev.model;
  next.alpha = std::move(alpha);
  next.t = prev.t + dt;
  return next;
}

// ---------------------------------------------------------------------------
// Upscaling
// ---------------------------------------------------------------------------

namespace {

kernels::WeightedSums upscale_sums(const CellState& cell, const Vec2& b_M, unsigned flags) {
  if (!b_M.allFinite()) throw NumericDomain("non-finite macroscale flux density");
  const CellModel& model = *cell.model;
  std::vector<double> bx, by;
  cell_flux(model, cell.alpha, bx, by);
  std::vector<double> w(model.area());
  for (double& v : w) v /= model.domain_area();
  kernels::FluxBatch fb{bx.size(), bx.data(), by.data(), b_M[0], b_M[1]};
  kernels::LawParams lp{model.law_alpha().data(), model.law_beta().data(), model.law_gamma().data()};
  const kernels::WeightedSums s = kernels::weighted_law_sums(fb, lp, w.data(), flags);
  if (!std::isfinite(s.hx + s.hy + s.d11 + s.d12 + s.d22 + s.energy)) throw NumericDomain("non-finite upscaled field");
  return s;
}

}  // namespace

Vec2 upscale_h(const CellState& cell, const Vec2& b_M) {
  const auto s = upscale_sums(cell, b_M, kernels::kSumH);
  return {s.hx, s.hy};
}

Mat2 exact_jacobian(const CellState& cell, const Vec2& b_M) {
  const auto s = upscale_sums(cell, b_M, kernels::kSumTangent);
  Mat2 d;
  d << s.d11, s.d12, s.d12, s.d22;
  return d;
}

UpscaledLaw upscale(const CellState& cell, const Vec2& b_M) {
  const auto s = upscale_sums(cell, b_M, kernels::kSumH | kernels::kSumTangent);
  UpscaledLaw u;
  u.h_M = {s.hx, s.hy};
  u.dh_M_db_M << s.d11, s.d12, s.d12, s.d22;
  return u;
}

double cell_energy_density(const CellState& cell, const Vec2& b_M) {
  return upscale_sums(cell, b_M, kernels::kSumEnergy).energy;
}

double cell_loss_density(const CellState& prev, const CellState& cur, const MacroSource& source, double dt) {
  check_source(source, dt);
  const CellModel& model = *cur.model;
  if (!model.conducting()) return 0.0;
  const Vec rate = (cur.alpha - prev.alpha) / dt;
  const double mean_rate = model.mass_moment().dot(rate) / model.total_conductance();
  const double k = source.kappa;
  const double gx = source.db_M_dt[0], gy = source.db_M_dt[1];
  double loss = 0.0;
  for (int e = 0; e < model.n_elements(); ++e) {
    const size_t ke = static_cast<size_t>(e);
    const double s = model.sigma_eff()[ke];
    if (s == 0.0) continue;
    const auto& p = model.element_points(e);
    Vec3 v;
    for (int a = 0; a < 3; ++a) {
      const Point& q = p[static_cast<size_t>(a)];
      const double e_src = k * (gx * (-q.y - model.source_mean_x()) + gy * (q.x - model.source_mean_y()));
      const int d = model.element_dofs()[ke][static_cast<size_t>(a)];
      const double r = (d >= 0 ? rate[d] : 0.0) - mean_rate;
      v[a] = e_src - r;
    }
    loss += s * model.area()[ke] / 12.0 * (v.squaredNorm() + v.sum() * v.sum());
  }
  return loss / model.domain_area();
}

// ---------------------------------------------------------------------------
// Jacobians
// ---------------------------------------------------------------------------

double default_fd_delta(const Vec2& b_M) { return 1e-6 * std::max(1.0, b_M.norm()); }

FdJacobianResult fd_jacobian(const CellState& cell_prev, const MacroSource& source, double dt, double delta,
                             const NewtonOptions& newton, const Vec* initial_guess) {
  if (!(delta > 0.0)) throw NumericDomain("finite-difference step must be positive");
  // Difference quotients need cell solutions far below the perturbation size.
  NewtonOptions tight = newton;
  tight.tol = std::min(newton.tol, 1e-11);
  FdJacobianResult out;
  out.nominal = meso_step(cell_prev, source, dt, tight, nullptr, initial_guess);
  out.law.h_M = upscale_h(out.nominal, source.b_M);
  for (int k = 0; k < 2; ++k) {
    MacroSource s = source;
    s.b_M[k] += delta;
    s.db_M_dt[k] += delta / dt;
    const CellState pert = meso_step(cell_prev, s, dt, tight, nullptr, &out.nominal.alpha);
    out.law.dh_M_db_M.col(k) = (upscale_h(pert, s.b_M) - out.law.h_M) / delta;
  }
  out.solve_count = 3;
  return out;
}

CellLinearization linearize_cell(const CellState& prev, const Vec& alpha, const MacroSource& source, double dt) {
  check_source(source, dt);
  const CellModel& model = *prev.model;
  const MaterialAssembly ma = assemble_material(model, alpha, source.b_M, true);
  CellLinearization lin;
  const Vec load = source_load(model, source);
  lin.residual = residual_from(model, prev.alpha, alpha, ma.force, load, dt);
  lin.stiffness = ma.tangent;
  lin.abs_scale = ma.abs_scale + load.norm();
  const int n = model.n_free();
  lin.dR_db = Eigen::Matrix<double, Eigen::Dynamic, 2>::Zero(n, 2);
  lin.dh_dalpha = Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, n);
  const double inv_area = 1.0 / model.domain_area();
  std::vector<double> bx, by;
  cell_flux(model, alpha, bx, by);
  for (int e = 0; e < model.n_elements(); ++e) {
    const size_t k = static_cast<size_t>(e);
    Mat2 d;
    d << ma.d11[k], ma.d12[k], ma.d12[k], ma.d22[k];
    const Eigen::Matrix<double, 3, 2> fb = model.area()[k] * (model.curl()[k].transpose() * d);
    const Mat23 hb = (model.area()[k] * inv_area) * (d * model.curl()[k]);
    for (int a = 0; a < 3; ++a) {
      const int dof = model.element_dofs()[k][static_cast<size_t>(a)];
      if (dof < 0) continue;
      lin.dR_db.row(dof) += fb.row(a);
      lin.dh_dalpha.col(dof) += hb.col(a);
    }
    lin.dh_db += (model.area()[k] * inv_area) * d;
    const Vec2 b(bx[k] + source.b_M[0], by[k] + source.b_M[1]);
    lin.h += (model.area()[k] * inv_area) * ((model.law_alpha()[k] + model.law_beta()[k] *
                                                                         std::exp(model.law_gamma()[k] * b.squaredNorm())) *
                                             b);
  }
  lin.dR_db.col(0) -= source.kappa * model.source_bx() / dt;
  lin.dR_db.col(1) -= source.kappa * model.source_by() / dt;
  return lin;
}

}  // namespace mqshmm
