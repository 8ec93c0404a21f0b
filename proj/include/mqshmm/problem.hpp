#pragma once
// Run configuration shared by all drivers and the construction of the
// benchmark models (macro mesh/model and the cell model) from it.

#include <cstddef>
#include <string>

#include "mqshmm/cell.hpp"
#include "mqshmm/macro.hpp"
#include "mqshmm/mesh.hpp"

namespace mqshmm {

struct RunConfig {
  // [geometry]
  int grains = 4;  // grains per side of the quarter SMC block
  GeometryParams geometry;
  int cell_n = 20;       // cell subdivisions per side
  double cell_fill = 0.64;
  // [material]
  double alpha = 388.0, beta = 0.3774, gamma = 2.97;
  double sigma = 5e6;      // grain conductivity [S/m]
  double mu_r_ins = 1.0;   // insulation relative permeability
  // [source]
  SourceSpec source{1.2e10, 50e3};  // peak |b_M| about 1.5 T on the benchmark
  // [time]
  double t_end = 2e-5;
  int n_steps_macro = 20;
  int n_steps_meso = 20;
  int n_windows = 1;
  // [solver]
  double newton_tol = 1e-6;
  int newton_max = 25;
  double cell_newton_tol = 1e-8;
  int cell_newton_max = 15;
  double wr_tol = 1e-8;
  int wr_max = 20;
  double fd_delta = 0.0;  // 0: 1e-6 max(1, |b_M|)
  double kappa = 1.0;
  std::size_t fullnewton_dof_budget = 4000;
  double comm_delay_us = 0.0;  // emulated latency per exchange
  // [reference]
  int ref_refinement = 1;
  int ref_steps = 0;             // 0: n_steps_macro
  bool insulated_grains = true;  // zero net current per grain
  // [run] / [output]
  std::string mode = "compare";
  std::string out_dir = "out";

  double period() const { return 0.5 * geometry.L / grains; }
  double macro_dt() const { return t_end / n_steps_macro; }
  void validate() const;
};

MaterialSet material_set(const RunConfig& cfg);
CellOptions cell_options(const RunConfig& cfg);
NewtonOptions cell_newton(const RunConfig& cfg);
MacroNewtonOptions macro_newton(const RunConfig& cfg);

struct Problem {
  RunConfig cfg;
  MacroModelPtr macro;
  CellModelPtr cell;
};
Problem build_problem(const RunConfig& cfg);

// Emulated exchange between the scales (counted; optional busy delay).
void emulate_communication(double delay_us);

}  // namespace mqshmm
