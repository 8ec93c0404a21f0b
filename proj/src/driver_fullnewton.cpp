#include <Eigen/Dense>
#include <sstream>
#include <string>

#include "mqshmm/driver_monolithic.hpp"
#include "mqshmm/errors.hpp"

namespace mqshmm {

namespace {

// Free macro DOF of each node of the triangle of Gauss point g (-1 if constrained).
std::array<int, 3> element_free_dofs(const MacroModel& model, int t) {
  const auto& tri = model.mesh().triangles[static_cast<size_t>(t)];
  return {model.dofs().dof(tri[0]), model.dofs().dof(tri[1]), model.dofs().dof(tri[2])};
}

// Change of the element flux density for a macro update.
Vec2 element_db(const MacroModel& model, int t, const Vec& d_alpha) {
  const auto d = element_free_dofs(model, t);
  const Mat23& c = model.element_curl(t);
  Vec2 db = Vec2::Zero();
  for (int a = 0; a < 3; ++a)
    if (d[static_cast<size_t>(a)] >= 0) db += c.col(a) * d_alpha[d[static_cast<size_t>(a)]];
  return db;
}

}  // namespace

FullNewtonReport run_monolithic_fullnewton(const Problem& problem, const FullNewtonOptions& options) {
  const RunConfig& cfg = problem.cfg;
  if (cfg.n_steps_meso != cfg.n_steps_macro)
    throw ConfigError("the coupled Newton scheme requires equal macro and meso time grids");
  const MacroModel& model = *problem.macro;
  const CellModel& cell = *problem.cell;
  const int ng = model.n_gauss();
  const int nM = model.n_free();
  const int nc = cell.n_free();
  const std::size_t N = static_cast<std::size_t>(nM) + static_cast<std::size_t>(ng) * static_cast<std::size_t>(nc);
  const bool need_dense = options.cross_check || !options.advance_with_schur;
  if (need_dense && N > cfg.fullnewton_dof_budget) {
    std::ostringstream os;
    os << "coupled system of " << N << " unknowns exceeds the budget of " << cfg.fullnewton_dof_budget;
    throw BudgetExceeded(os.str());
  }

  FullNewtonReport rep;
  rep.system_size = N;
  rep.waveform = Waveform(0.0, cfg.t_end, cfg.n_steps_macro, nM);
  const double dt = cfg.macro_dt();
  const double ref = std::abs(cfg.source.j_s0) * model.unit_source_load().norm();

  // Constant part of the cell block: projected sigma mass / dt.
  Eigen::MatrixXd cell_mass = Eigen::MatrixXd(cell.mass_matrix()) / dt;
  if (cell.conducting())
    cell_mass -= cell.mass_moment() * cell.mass_moment().transpose() / (cell.total_conductance() * dt);

  std::vector<CellState> cells_prev(static_cast<size_t>(ng), CellState::initial(problem.cell, 0.0));
  MacroState prev{Vec::Zero(nM), 0.0};
  rep.qoi.push(0.0, 0.0, homogenized_energy(model, prev.alpha, cells_prev));

  for (int k = 1; k <= cfg.n_steps_macro; ++k) {
    MacroState state{prev.alpha, rep.waveform.time(k)};
    std::vector<Vec> c(static_cast<size_t>(ng));
    for (int g = 0; g < ng; ++g) c[static_cast<size_t>(g)] = cells_prev[static_cast<size_t>(g)].alpha;
    std::vector<MacroSource> src(static_cast<size_t>(ng));
    int evaluations = 0;
    try {
      for (int j = 0;; ++j) {
        ++evaluations;
        std::vector<CellLinearization> lin(static_cast<size_t>(ng));
        GaussPointTable table(static_cast<size_t>(ng));
        bool cells_converged = true;
        for (int g = 0; g < ng; ++g) {
          const size_t kg = static_cast<size_t>(g);
          src[kg] = gauss_source(model, g, state.alpha, prev.alpha, dt, cfg.kappa);
          lin[kg] = linearize_cell(cells_prev[kg], c[kg], src[kg], dt);
          table[kg] = GaussPointLaw{lin[kg].h, lin[kg].dh_db, Provenance::Exact, true};
          const double tol_g = std::max(cfg.cell_newton_tol, 1e-12) * lin[kg].abs_scale;
          if (lin[kg].residual.norm() > tol_g) cells_converged = false;
        }
        const MacroAssembly asmb = assemble_macro(model, prev, state, table, dt, cfg.source, true);
        const double rn = asmb.residual.norm();
        if (cells_converged && rn <= std::max(cfg.newton_tol * ref, 1e-12 * asmb.abs_scale)) break;
        if (j + 1 >= cfg.newton_max) {
          std::ostringstream os;
          os << "coupled Newton did not converge in " << cfg.newton_max << " evaluations (macro residual " << rn << ")";
          throw ConvergenceFailure(os.str(), rn);
        }

        // Reduced path: eliminate the cell blocks Gauss point by Gauss point.
        std::vector<Eigen::MatrixXd> X(static_cast<size_t>(ng));
        std::vector<Vec> y(static_cast<size_t>(ng));
        GaussPointTable reduced(static_cast<size_t>(ng));
        for (int g = 0; g < ng; ++g) {
          const size_t kg = static_cast<size_t>(g);
          const CellJacobianSolver solver(cell, lin[kg].stiffness, dt);
          X[kg] = solver.solve(Eigen::MatrixXd(lin[kg].dR_db));
          y[kg] = solver.solve(lin[kg].residual);
          reduced[kg].h_M = lin[kg].h - lin[kg].dh_dalpha * y[kg];
          reduced[kg].dh_M_db_M = lin[kg].dh_db - lin[kg].dh_dalpha * X[kg];
          reduced[kg].provenance = Provenance::Exact;
          reduced[kg].valid = true;
        }
        Vec dM_schur;
        std::vector<Vec> dc_schur(static_cast<size_t>(ng));
        if (options.cross_check || options.advance_with_schur) {
          const MacroAssembly r = assemble_macro(model, prev, state, reduced, dt, cfg.source, true);
          SparseSystem sys{r.jacobian, -r.residual};
          dM_schur = solve_linear(sys, LinearSolverKind::LU);
          for (int g = 0; g < ng; ++g) {
            const size_t kg = static_cast<size_t>(g);
            dc_schur[kg] = -y[kg] - X[kg] * element_db(model, model.gauss_element(g), dM_schur);
          }
        }

        // Coupled path: assemble and solve the full block Jacobian.
        Vec delta;
        if (need_dense) {
          const Eigen::Index n = static_cast<Eigen::Index>(N);
          Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
          Vec rhs(n);
          J.topLeftCorner(nM, nM) = Eigen::MatrixXd(asmb.jacobian);
          rhs.head(nM) = -asmb.residual;
          for (int g = 0; g < ng; ++g) {
            const size_t kg = static_cast<size_t>(g);
            const Eigen::Index off = nM + static_cast<Eigen::Index>(g) * nc;
            const int t = model.gauss_element(g);
            const auto d = element_free_dofs(model, t);
            const Mat23& cu = model.element_curl(t);
            const double area = model.element_area(t);
            for (int a = 0; a < 3; ++a) {
              const int da = d[static_cast<size_t>(a)];
              if (da < 0) continue;
              J.block(da, off, 1, nc) += area * (cu.col(a).transpose() * lin[kg].dh_dalpha);
              J.block(off, da, nc, 1) += lin[kg].dR_db * cu.col(a);
            }
            J.block(off, off, nc, nc) = Eigen::MatrixXd(lin[kg].stiffness) + cell_mass;
            rhs.segment(off, nc) = -lin[kg].residual;
          }
          const Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
          delta = lu.solve(rhs);
          // Two refinement sweeps: the blocks mix 1/mu0-scaled macro entries
          // with cell entries, and near convergence the update is small.
          for (int sweep = 0; sweep < 2; ++sweep) delta += lu.solve(rhs - J * delta);
          if (!delta.allFinite()) throw SolverFailure("coupled Jacobian solve produced non-finite values");
          rep.macro_updates_full.push_back(delta.head(nM));
        }
        if (options.cross_check) {
          rep.macro_updates_schur.push_back(dM_schur);
          const double nf = delta.head(nM).norm();
          const double diff = (delta.head(nM) - dM_schur).norm();
          rep.schur_discrepancy.push_back(nf > 0.0 ? diff / nf : diff);
        }

        if (options.advance_with_schur) {
          state.alpha += dM_schur;
          for (int g = 0; g < ng; ++g) c[static_cast<size_t>(g)] += dc_schur[static_cast<size_t>(g)];
        } else {
          state.alpha += delta.head(nM);
          for (int g = 0; g < ng; ++g)
            c[static_cast<size_t>(g)] += delta.segment(nM + static_cast<Eigen::Index>(g) * nc, nc);
        }
      }
    } catch (...) {
      rethrow_with_context("time step " + std::to_string(k));
    }
    rep.newton_counts.push_back(evaluations);
    std::vector<CellState> cells(static_cast<size_t>(ng));
    for (int g = 0; g < ng; ++g) {
      const size_t kg = static_cast<size_t>(g);
      cells[kg] = CellState{problem.cell, c[kg], state.t};
    }
    const double p = homogenized_losses(model, cells_prev, cells, src, dt);
    rep.qoi.push(state.t, p, homogenized_energy(model, state.alpha, cells));
    rep.waveform.set(k, state.alpha);
    cells_prev = std::move(cells);
    prev = state;
  }
  rep.final_cells = std::move(cells_prev);
  return rep;
}

}  // namespace mqshmm
