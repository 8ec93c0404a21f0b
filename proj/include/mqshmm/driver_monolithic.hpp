#pragma once
// Monolithic two-scale time loop: every macro Newton iteration re-solves all
// cell problems (finite-difference upscaled Jacobian), on a shared time grid.
// Also the fully coupled Newton solver on the joint (macro, cells) system,
// used as an equivalence oracle for the reduced (Schur complement) tangent.

#include <cstddef>
#include <vector>

#include "mqshmm/cell.hpp"
#include "mqshmm/macro.hpp"
#include "mqshmm/problem.hpp"
#include "mqshmm/qoi.hpp"
#include "mqshmm/waveform.hpp"

namespace mqshmm {

struct PhaseTimings {
  double meso = 0.0;           // cell solves (incl. upscaling)
  double communication = 0.0;  // emulated exchanges
  double macro_assemble = 0.0;
  double macro_solve = 0.0;
  double total = 0.0;
};

struct CouplingCounters {
  long meso_solves = 0;     // single-cell, single-time-step nonlinear solves
  long communications = 0;  // macro <-> cell exchanges (one per Gauss point and exchange)
};

// Global quantities of a homogenized state.
// Energy: direct co-energy of non-homogenized elements + sum |T_g| <w>_cell,g.
double homogenized_energy(const MacroModel& model, const Vec& alpha, const std::vector<CellState>& cells);
// Losses of a step: sum |T_g| <sigma |e|^2>_cell,g for the transition prev -> cur.
double homogenized_losses(const MacroModel& model, const std::vector<CellState>& prev,
                          const std::vector<CellState>& cur, const std::vector<MacroSource>& sources, double dt);
// Source handed to Gauss point g: b_M, backward differences of b_M and of the element mean of a_M.
MacroSource gauss_source(const MacroModel& model, int g, const Vec& alpha, const Vec& alpha_prev, double dt,
                         double kappa);

struct MonolithicOptions {
  bool warm_start = true;         // seed cell Newton with the previous evaluation at the same step
  bool keep_cell_history = false;  // store the cell DOFs of every accepted step
};

struct MonolithicRunReport {
  Waveform waveform;                    // macro DOFs on the time grid
  std::vector<int> newton_counts;       // per step: macro Newton evaluations N_NR(k)
  std::vector<std::vector<double>> residual_traces;
  CouplingCounters counters;
  PhaseTimings timings;
  LossSeries qoi;
  int n_gauss = 0;
  int n_dim = 3;                          // cell solves per Gauss point and evaluation
  std::vector<CellState> final_cells;
  std::vector<std::vector<Vec>> cell_history;  // [g][k] (optional)
};

MonolithicRunReport run_monolithic(const Problem& problem, const MonolithicOptions& options = {});
MonolithicRunReport run_monolithic(const RunConfig& cfg, const MonolithicOptions& options = {});

struct FullNewtonOptions {
  bool cross_check = true;         // compute both the dense coupled and the Schur-reduced update
  bool advance_with_schur = false;  // otherwise advance with the dense coupled update
};

struct FullNewtonReport {
  Waveform waveform;
  std::vector<int> newton_counts;  // per step: evaluations of the coupled residual
  LossSeries qoi;
  std::size_t system_size = 0;     // N_M + N_GP N_c
  // Per Newton update: macro updates of both paths and their relative discrepancy.
  std::vector<Vec> macro_updates_full, macro_updates_schur;
  std::vector<double> schur_discrepancy;
  std::vector<CellState> final_cells;
};

// Throws BudgetExceeded when a dense coupled system is required and
// N_M + N_GP N_c exceeds cfg.fullnewton_dof_budget.
FullNewtonReport run_monolithic_fullnewton(const Problem& problem, const FullNewtonOptions& options = {});

}  // namespace mqshmm
