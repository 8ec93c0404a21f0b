#pragma once
// Cost model of the two coupling schemes (per-step unit costs times loop
// counts), the efficiency predicate, and the audit of realized solve and
// exchange counts of a driver run against the model's counting structure.

#include <string>
#include <vector>

namespace mqshmm {

struct MonolithicRunReport;
struct WrRunReport;
struct Problem;

struct CostParams {
  double N_TS = 1;    // macro time steps
  double N_TW = 1;    // time windows
  double N_WR = 1;    // waveform-relaxation iterations per window
  double N_NR = 1;    // macro Newton iterations per step
  double N_GP = 1;    // Gauss points (cells)
  double N_dim = 3;   // cell solves per Gauss point for the finite-difference tangent
  double C_sol = 1.0;   // one cell, one time step
  double C_com = 0.0;   // one exchange
  double C_jac = 0.0;   // upscaled law/tangent from stored cell fields, one window
  double C_ass = 0.0;   // macro assembly, one Newton iteration
  double C_Msol = 0.0;  // macro linear solve, one Newton iteration
  double kappa = 0.0;   // tangent-evaluation cost relative to the cell solve (in (0,1))
  void validate() const;  // throws ConfigError
};

struct CostReport {
  double mono_meso = 0, mono_macro = 0, mono = 0;  // exact forms
  double wr_meso = 0, wr_macro = 0, wr = 0;
  double mono_approx = 0, wr_approx = 0;           // macro costs neglected
  double speedup_approx = 0;                        // mono_approx / wr_approx
  double kappa_implied = 0;      // (N_TW/N_TS) N_NR C_jac / (C_sol + (N_TW/N_TS) C_com)
  double predicted_speedup = 0;  // N_dim N_NR / ((1 + kappa) N_WR), communication neglected
  bool wr_more_efficient = false;  // N_WR < N_dim N_NR / (1 + kappa)
};

CostReport cost_model(const CostParams& p);

struct CostAudit {
  long counted_solves = 0, expected_solves = 0;
  long counted_communications = 0, expected_communications = 0;
  long discrepancy() const;
};
CostAudit audit_costs(const MonolithicRunReport& report);
CostAudit audit_costs(const WrRunReport& report);

// Realized loop counts of runs as cost-model parameters (averages over steps/windows).
CostParams realized_params(const MonolithicRunReport& mono, const WrRunReport& wr, int n_windows);

// Unit costs measured as wall-time medians [s] of `repetitions` micro-runs on
// the problem: one cell time step, one upscaled-law evaluation per stored cell
// sample of a window, one macro assembly and one macro solve. C_com is the
// configured emulated exchange latency. Counts of `p` are kept.
CostParams calibrate_costs(const Problem& problem, CostParams p, int repetitions = 15);

}  // namespace mqshmm
