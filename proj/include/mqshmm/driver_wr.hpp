#pragma once
// Waveform-relaxation two-scale driver: per time window, Gauss-Seidel
// iteration between the cell ensemble (solved over the whole window on the
// meso grid with the frozen macro waveform) and the macro transient (solved
// over the window with the frozen cell waveforms and exact upscaled tangents).

#include <vector>

#include "mqshmm/cell.hpp"
#include "mqshmm/driver_monolithic.hpp"
#include "mqshmm/macro.hpp"
#include "mqshmm/problem.hpp"
#include "mqshmm/qoi.hpp"
#include "mqshmm/waveform.hpp"

namespace mqshmm {

struct WindowPlan {
  double t0 = 0.0;
  double t_end = 2e-5;
  int n_windows = 1;
  int macro_steps = 20;  // total over [t0, t_end]
  int meso_steps = 20;   // total; an integer multiple of macro_steps
  int max_iter = 20;     // N_WR
  double tol = 1e-8;     // tol_M

  int macro_steps_per_window() const { return macro_steps / n_windows; }
  int meso_steps_per_window() const { return meso_steps / n_windows; }
  int ratio() const { return meso_steps / macro_steps; }
  double window_start(int w) const { return t0 + (t_end - t0) * w / n_windows; }
  double window_end(int w) const { return t0 + (t_end - t0) * (w + 1) / n_windows; }
  void validate() const;  // throws InvalidLayout / ConfigError
  static WindowPlan from_config(const RunConfig& cfg);
};

// Cell sources on the meso grid of a window: sample i (1..meso_steps) holds
// b_M linearly interpolated at t_i and the backward differences of b_M and of
// the element mean of a_M over the macro interval containing t_i. Sample 0
// holds b_M at the window start and the derivatives of the first interval.
std::vector<MacroSource> downscale_waveform(const MacroModel& model, const Waveform& macro_wf, int gauss_id,
                                            int meso_steps, double kappa);

// Element fields sampled on the macro grid: b (2 components per element) and
// the backward difference of the element mean of a_z (sample 0: zero).
Waveform element_b_waveform(const MacroModel& model, const Waveform& alpha_wf);
Waveform element_dta_waveform(const MacroModel& model, const Waveform& alpha_wf);

// max_k max_e |u_cur - u_prev| / max_k max_e |u_init|, with per-element
// Euclidean norms over `components` consecutive entries. Throws Inconsistency
// for mismatched grids and UndefinedNorm when the normalization vanishes.
double wr_error_metrics(const Waveform& wf_prev, const Waveform& wf_cur, const Waveform& wf_init, int components = 1);
// Maximum per-element norm over all samples.
double waveform_linf(const Waveform& wf, int components = 1);

struct WrIterationRecord {
  int window = 0;
  int l = 0;
  double gate = 0.0;            // max_k ||a^l - a^(l-1)||_L2 / max_k ||a^l||_L2
  double err_b = 0.0;           // field change of b_M (normalized by the initial iterate)
  double err_dta = 0.0;         // field change of d_t a_M
  bool b_normalized_by_first = false;    // initial iterate vanished: normalized by iterate 1
  bool dta_normalized_by_first = false;
  LossSeries qoi;               // window-local (macro grid, first sample = window start)
  Waveform waveform;            // macro DOFs of this iterate over the window
  int macro_newton_evaluations = 0;
};

struct WrRunReport {
  Waveform waveform;  // final macro DOFs on the global macro grid
  LossSeries qoi;     // final, global macro grid
  std::vector<WrIterationRecord> iterations;
  std::vector<int> iterations_per_window;  // realized N_WR per window
  std::vector<bool> window_converged;
  std::vector<int> macro_newton_counts;    // final iterate, per macro step
  int n_gauss = 0;
  int meso_steps_per_window = 0;
  CouplingCounters counters;
  PhaseTimings timings;
  std::vector<CellState> final_cells;
  bool converged() const;
};

WrRunReport run_wr(const Problem& problem, const WindowPlan& plan);
WrRunReport run_wr(const RunConfig& cfg);

}  // namespace mqshmm
