#include "mqshmm/driver_monolithic.hpp"

#include <chrono>
#include <exception>
#include <string>

#include "mqshmm/errors.hpp"

namespace mqshmm {

namespace {
using Clock = std::chrono::steady_clock;
double since(Clock::time_point a) { return std::chrono::duration<double>(Clock::now() - a).count(); }
}  // namespace

MacroSource gauss_source(const MacroModel& model, int g, const Vec& alpha, const Vec& alpha_prev, double dt,
                         double kappa) {
  const int t = model.gauss_element(g);
  MacroSource s;
  s.b_M = model.element_b(alpha, t);
  s.db_M_dt = (s.b_M - model.element_b(alpha_prev, t)) / dt;
  s.da_M_dt = (model.element_a(alpha, t) - model.element_a(alpha_prev, t)) / dt;
  s.kappa = kappa;
  return s;
}

double homogenized_energy(const MacroModel& model, const Vec& alpha, const std::vector<CellState>& cells) {
  if (static_cast<int>(cells.size()) != model.n_gauss()) throw CoverageError("cell ensemble does not cover the Gauss points");
  double w = model.direct_energy(alpha);
  for (int g = 0; g < model.n_gauss(); ++g) {
    const int t = model.gauss_element(g);
    w += model.element_area(t) * cell_energy_density(cells[static_cast<size_t>(g)], model.element_b(alpha, t));
  }
  return w;
}

double homogenized_losses(const MacroModel& model, const std::vector<CellState>& prev,
                          const std::vector<CellState>& cur, const std::vector<MacroSource>& sources, double dt) {
  const size_t ng = static_cast<size_t>(model.n_gauss());
  if (prev.size() != ng || cur.size() != ng || sources.size() != ng)
    throw CoverageError("cell ensemble does not cover the Gauss points");
  double p = 0.0;
  for (size_t g = 0; g < ng; ++g)
    p += model.element_area(model.gauss_element(static_cast<int>(g))) *
         cell_loss_density(prev[g], cur[g], sources[g], dt);
  return p;
}

MonolithicRunReport run_monolithic(const RunConfig& cfg, const MonolithicOptions& options) {
  return run_monolithic(build_problem(cfg), options);
}

MonolithicRunReport run_monolithic(const Problem& problem, const MonolithicOptions& options) {
  const auto start = Clock::now();
  const RunConfig& cfg = problem.cfg;
  if (cfg.n_steps_meso != cfg.n_steps_macro)
    throw ConfigError("the monolithic scheme requires equal macro and meso time grids");
  const MacroModel& model = *problem.macro;
  const int ng = model.n_gauss();
  const NewtonOptions cnewton = cell_newton(cfg);

  MonolithicRunReport rep;
  rep.n_gauss = ng;
  std::vector<CellState> committed(static_cast<size_t>(ng), CellState::initial(problem.cell, 0.0));
  std::vector<CellState> nominal = committed;
  std::vector<MacroSource> sources(static_cast<size_t>(ng));
  if (options.keep_cell_history) {
    rep.cell_history.assign(static_cast<size_t>(ng), {});
    for (int g = 0; g < ng; ++g) rep.cell_history[static_cast<size_t>(g)].push_back(committed[static_cast<size_t>(g)].alpha);
  }

  MacroState init{Vec::Zero(model.n_free()), 0.0};
  rep.qoi.push(0.0, 0.0, homogenized_energy(model, init.alpha, committed));

  MaterialProvider provider = [&](const ProviderContext& ctx, const std::vector<Vec2>& b, GaussPointTable& table) {
    (void)b;
    const auto t_meso = Clock::now();
    std::vector<std::exception_ptr> errors(static_cast<size_t>(ng));
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic)
#endif
    for (int g = 0; g < ng; ++g) {
      const size_t kg = static_cast<size_t>(g);
      try {
        const MacroSource src = gauss_source(model, g, ctx.iterate->alpha, ctx.prev->alpha, ctx.dt, cfg.kappa);
        const double delta = cfg.fd_delta > 0.0 ? cfg.fd_delta : default_fd_delta(src.b_M);
        const Vec* guess = (options.warm_start && ctx.iteration > 0) ? &nominal[kg].alpha : nullptr;
        FdJacobianResult fd = fd_jacobian(committed[kg], src, ctx.dt, delta, cnewton, guess);
        table[kg] = GaussPointLaw{fd.law.h_M, fd.law.dh_M_db_M, Provenance::FiniteDifference, true};
        nominal[kg] = std::move(fd.nominal);
        sources[kg] = src;
      } catch (...) {
        errors[kg] = std::current_exception();
      }
    }
    rep.timings.meso += since(t_meso);
    for (int g = 0; g < ng; ++g) {
      if (errors[static_cast<size_t>(g)]) {
        try {
          std::rethrow_exception(errors[static_cast<size_t>(g)]);
        } catch (...) {
          rethrow_with_context("Newton iteration " + std::to_string(ctx.iteration) + ", Gauss point " +
                               std::to_string(g));
        }
      }
    }
    rep.counters.meso_solves += static_cast<long>(ng) * rep.n_dim;
    const auto t_com = Clock::now();
    for (int g = 0; g < ng; ++g) emulate_communication(cfg.comm_delay_us);
    rep.counters.communications += ng;
    rep.timings.communication += since(t_com);
  };

  StepCallback on_step = [&](int k, const MacroState& accepted) {
    (void)k;
    const double dt = cfg.macro_dt();
    const double p = homogenized_losses(model, committed, nominal, sources, dt);
    committed = nominal;
    rep.qoi.push(accepted.t, p, homogenized_energy(model, accepted.alpha, committed));
    if (options.keep_cell_history)
      for (int g = 0; g < ng; ++g)
        rep.cell_history[static_cast<size_t>(g)].push_back(committed[static_cast<size_t>(g)].alpha);
  };

  MacroRunResult run = backward_euler_run(model, init, cfg.t_end, cfg.n_steps_macro, cfg.source, provider,
                                          macro_newton(cfg), on_step);
  rep.waveform = std::move(run.waveform);
  rep.newton_counts = std::move(run.newton_evaluations);
  rep.residual_traces = std::move(run.residual_traces);
  rep.timings.macro_assemble = run.assemble_seconds;
  rep.timings.macro_solve = run.solve_seconds;
  rep.final_cells = std::move(committed);
  rep.timings.total = since(start);
  return rep;
}

}  // namespace mqshmm
