#pragma once
// Small problem instances shared by the driver tests.

#include "mqshmm/cell.hpp"
#include "mqshmm/macro.hpp"
#include "mqshmm/problem.hpp"

namespace mqshmm::testing {

// 2x2-grain quarter block, coarse cells, a few steps over part of a period.
inline RunConfig tiny_config(int steps = 4) {
  RunConfig c;
  c.grains = 2;
  c.geometry.macro_div = 3;
  c.cell_n = 6;
  c.n_steps_macro = steps;
  c.n_steps_meso = steps;
  c.t_end = 1e-5;
  c.newton_tol = 1e-9;
  c.cell_newton_tol = 1e-10;
  return c;
}

// Linear homogeneous conducting cells with reluctivity nu and the matching
// single-scale macro model.
inline Problem linear_homogeneous_problem(const RunConfig& cfg, double nu) {
  RunConfig c = cfg;
  c.beta = 0.0;
  c.gamma = 0.0;
  c.alpha = nu;
  Problem p = build_problem(c);
  CellOptions o = cell_options(p.cfg);
  o.layout = Homogeneous{};
  o.grain_law = MaterialLaw::linear(nu);
  o.insulation_law = MaterialLaw::linear(nu);
  o.conductivity.sigma[static_cast<size_t>(Region::Insulation)] = c.sigma;
  p.cell = CellModel::build(o);
  return p;
}

}  // namespace mqshmm::testing
