#include "mqshmm/cost.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "mqshmm/driver_monolithic.hpp"
#include "mqshmm/driver_wr.hpp"
#include "mqshmm/errors.hpp"
#include "mqshmm/problem.hpp"

namespace mqshmm {

void CostParams::validate() const {
  for (double c : {N_TS, N_TW, N_WR, N_NR, N_GP, N_dim})
    if (!(c >= 1.0)) throw ConfigError("cost model counts must be >= 1");
  for (double c : {C_sol, C_com, C_jac, C_ass, C_Msol})
    if (!(c >= 0.0)) throw ConfigError("cost model unit costs must be non-negative");
  if (!(kappa >= 0.0 && kappa < 1.0)) throw ConfigError("cost model kappa must lie in [0,1)");
  if (N_TW > N_TS) throw ConfigError("more time windows than time steps");
}

CostReport cost_model(const CostParams& p) {
  p.validate();
  CostReport r;
  r.mono_meso = p.N_TS * p.N_NR * p.N_GP * (p.N_dim * p.C_sol + p.C_com);
  r.mono_macro = p.N_TS * p.N_NR * (p.C_ass + p.C_Msol);
  r.mono = r.mono_meso + r.mono_macro;
  r.wr_meso = p.N_TS * p.N_WR * p.N_GP * p.C_sol + p.N_TW * p.N_WR * p.N_GP * p.C_com;
  r.wr_macro = p.N_TW * p.N_WR * p.N_NR * (p.N_GP * p.C_jac + p.C_ass + p.C_Msol);
  r.wr = r.wr_meso + r.wr_macro;
  const double q = p.N_TW / p.N_TS;
  r.mono_approx = r.mono_meso;
  r.wr_approx = p.N_TS * p.N_WR * p.N_GP * (p.C_sol + q * (p.N_NR * p.C_jac + p.C_com));
  r.speedup_approx = r.wr_approx > 0.0 ? r.mono_approx / r.wr_approx : INFINITY;
  const double base = p.C_sol + q * p.C_com;
  r.kappa_implied = base > 0.0 ? q * p.N_NR * p.C_jac / base : 0.0;
  r.predicted_speedup = p.N_dim * p.N_NR / ((1.0 + p.kappa) * p.N_WR);
  r.wr_more_efficient = p.N_WR < p.N_dim * p.N_NR / (1.0 + p.kappa);
  return r;
}

long CostAudit::discrepancy() const {
  return std::labs(counted_solves - expected_solves) + std::labs(counted_communications - expected_communications);
}

CostAudit audit_costs(const MonolithicRunReport& rep) {
  CostAudit a;
  const long nr = std::accumulate(rep.newton_counts.begin(), rep.newton_counts.end(), 0L);
  a.counted_solves = rep.counters.meso_solves;
  a.expected_solves = nr * rep.n_gauss * rep.n_dim;
  a.counted_communications = rep.counters.communications;
  a.expected_communications = nr * rep.n_gauss;
  return a;
}

CostAudit audit_costs(const WrRunReport& rep) {
  CostAudit a;
  const long nwr = std::accumulate(rep.iterations_per_window.begin(), rep.iterations_per_window.end(), 0L);
  a.counted_solves = rep.counters.meso_solves;
  a.expected_solves = nwr * rep.n_gauss * rep.meso_steps_per_window;
  a.counted_communications = rep.counters.communications;
  a.expected_communications = nwr * rep.n_gauss;
  return a;
}

CostParams realized_params(const MonolithicRunReport& mono, const WrRunReport& wr, int n_windows) {
  CostParams p;
  p.N_TS = static_cast<double>(mono.newton_counts.size());
  p.N_TW = n_windows;
  p.N_NR = mono.newton_counts.empty()
               ? 1.0
               : std::accumulate(mono.newton_counts.begin(), mono.newton_counts.end(), 0.0) / p.N_TS;
  p.N_WR = wr.iterations_per_window.empty()
               ? 1.0
               : std::accumulate(wr.iterations_per_window.begin(), wr.iterations_per_window.end(), 0.0) /
                     static_cast<double>(wr.iterations_per_window.size());
  p.N_GP = mono.n_gauss;
  p.N_dim = mono.n_dim;
  return p;
}

namespace {
template <class F>
double median_seconds(int repetitions, F&& f) {
  std::vector<double> t;
  for (int i = 0; i < repetitions; ++i) {
    const auto a = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - a).count());
  }
  std::nth_element(t.begin(), t.begin() + static_cast<long>(t.size() / 2), t.end());
  return t[t.size() / 2];
}
}  // namespace

CostParams calibrate_costs(const Problem& problem, CostParams p, int repetitions) {
  if (repetitions < 1) throw ConfigError("calibration needs at least one repetition");
  const RunConfig& cfg = problem.cfg;
  const MacroModel& model = *problem.macro;
  const double dt = cfg.macro_dt();
  // Representative state: a cell driven at 1 T with the ramp of one step.
  MacroSource src;
  src.b_M = Vec2(1.0, 0.3);
  src.db_M_dt = src.b_M / (0.25 / cfg.source.f);
  src.kappa = cfg.kappa;
  const CellState c0 = CellState::initial(problem.cell, 0.0);
  const CellState c1 = meso_step(c0, src, dt, cell_newton(cfg));
  p.C_sol = median_seconds(repetitions, [&] { (void)meso_step(c0, src, dt, cell_newton(cfg)); });
  const int samples = std::max(1, static_cast<int>(std::lround(p.N_TS / p.N_TW)));
  p.C_jac = median_seconds(repetitions, [&] {
    for (int k = 0; k < samples; ++k) (void)upscale(c1, src.b_M);
  });
  GaussPointTable table(static_cast<size_t>(model.n_gauss()));
  for (auto& e : table) {
    const UpscaledLaw u = upscale(c1, src.b_M);
    e = GaussPointLaw{u.h_M, u.dh_M_db_M, Provenance::Exact, true};
  }
  const MacroState prev{Vec::Zero(model.n_free()), 0.0};
  const MacroState cur{Vec::Zero(model.n_free()), dt};
  MacroAssembly a;
  p.C_ass = median_seconds(repetitions, [&] { a = assemble_macro(model, prev, cur, table, dt, cfg.source, true); });
  SparseSystem sys{a.jacobian, -a.residual};
  p.C_Msol = median_seconds(repetitions, [&] { (void)solve_linear(sys, LinearSolverKind::LU); });
  p.C_com = cfg.comm_delay_us * 1e-6;
  return p;
}

}  // namespace mqshmm
