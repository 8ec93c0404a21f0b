#pragma once
// Finescale reference: the eddy-current problem on the mesh that resolves
// every grain, with the same backward-Euler/Newton integrator as the
// two-scale drivers. Grains are electrically insulated from each other: the
// net current of every grain vanishes (one scalar constraint per grain).

#include <vector>

#include "mqshmm/fem.hpp"
#include "mqshmm/macro.hpp"
#include "mqshmm/material.hpp"
#include "mqshmm/mesh.hpp"
#include "mqshmm/problem.hpp"
#include "mqshmm/qoi.hpp"
#include "mqshmm/waveform.hpp"

namespace mqshmm {

struct ReferenceSetup {
  Mesh2D mesh;
  MaterialSet laws;
  double sigma_grain = 5e6;  // conductivity of ConductingGrain elements [S/m]
  SourceSpec source;
  double t_end = 2e-5;
  int n_steps = 20;
  MacroNewtonOptions newton;
  bool insulated_grains = true;
  std::size_t dof_budget = 400000;
};

struct ReferenceRun {
  Mesh2D mesh;
  DofMap dofs;
  Waveform waveform;  // free DOFs of a_z
  LossSeries qoi;
  std::vector<int> newton_counts;
  std::vector<double> element_sigma;
  std::vector<int> grain_of_element;  // -1 outside conducting grains
  int n_grains = 0;
};

ReferenceRun run_reference(const ReferenceSetup& setup);
// Resolved benchmark geometry and materials of `cfg` (refinement cfg.ref_refinement).
ReferenceRun run_reference(const RunConfig& cfg);
ReferenceSetup reference_setup(const RunConfig& cfg);

}  // namespace mqshmm
